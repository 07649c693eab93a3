//! Monte Carlo generation of detector click streams.
//!
//! Pairs are emitted as a Poisson process. Each pair draws a mixture
//! component, then a two-photon outcome from the exact outcome distribution
//! of the evolved state; photons are detected independently with the
//! channel's efficiency and both photons of a pair share one emission time.
//!
//! The run is cut into fixed 100 ms slices. Every slice owns independent
//! ChaCha8 streams derived from the run seed, so slices can be generated in
//! any order or in parallel and the output stays byte-identical:
//!
//! * pair emission in slice `k`: stream `k`
//! * dark counts on channel `c` in slice `k`: stream `2^62 | c << 32 | k`

mod format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use format::{
    decode, encode, read_ttag, write_ttag, TtagHeader, TtagReader, TtagWriter, HEADER_LEN, MAGIC,
    RECORD_LEN, VERSION,
};

use crate::error::{Error, Result};
use crate::quantum::{apply_unitary, outcome_distribution, ChannelMap, ClickPattern, ModeUnitary};
use crate::source::SourceEnsemble;

/// Slice length of the generator, picoseconds.
pub const SLICE_PS: u64 = 100_000_000_000;

const PS_PER_S: f64 = 1e12;

/// Slices generated concurrently before merging.
const SLICE_BATCH: usize = 16;

/// Jitter draws are clamped to this many standard deviations.
const JITTER_CLAMP_SIGMAS: f64 = 10.0;

/// One detector click.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeTagRecord {
    /// Picoseconds since run start.
    pub timestamp: u64,
    pub channel: u8,
}

impl TimeTagRecord {
    pub fn new(timestamp: u64, channel: u8) -> Self {
        TimeTagRecord { timestamp, channel }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    pub jitter_sigma_ps: f64,
    /// Non-paralyzable dead time after each registered click.
    pub dead_time_ps: u64,
}

impl Default for DetectorModel {
    /// 60 % efficiency and 25 dark counts/s; the jitter (350 ps) and dead
    /// time (22 ns) are typical avalanche-photodiode figures.
    fn default() -> Self {
        DetectorModel {
            efficiency: 0.6,
            dark_rate: 25.0,
            jitter_sigma_ps: 350.0,
            dead_time_ps: 22_000,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        DetectorModel {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma_ps: 0.0,
            dead_time_ps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.dark_rate >= 0.0) || !(self.jitter_sigma_ps >= 0.0) {
            return Err(Error::config("dark rate and jitter must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub duration_s: f64,
    pub seed: u64,
    /// Pairs per second.
    pub pair_rate: f64,
}

impl SimRun {
    fn duration_ps(&self) -> Result<u64> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::config(format!("duration {} s must be positive", self.duration_s)));
        }
        if !(self.pair_rate >= 0.0) {
            return Err(Error::config(format!("pair rate {} must be nonnegative", self.pair_rate)));
        }
        Ok((self.duration_s * PS_PER_S).round().max(1.0) as u64)
    }
}

struct ComponentSampler {
    cumulative: Vec<f64>,
    channels: Vec<(Option<u8>, Option<u8>)>,
}

/// Draws the detector channels reached by the two photons of one pair.
pub struct PairSampler {
    weights: Vec<f64>,
    components: Vec<ComponentSampler>,
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    let total = cumulative[cumulative.len() - 1];
    cumulative
        .partition_point(|&c| c <= u * total)
        .min(cumulative.len() - 1)
}

impl PairSampler {
    pub fn new(ensemble: &SourceEnsemble, circuit: &ModeUnitary, channel_map: &ChannelMap) -> Result<Self> {
        let mut weights = Vec::new();
        let mut acc = 0.0;
        let mut components = Vec::new();
        for (w, state) in ensemble.components() {
            acc += w;
            weights.push(acc);
            let dist = outcome_distribution(&apply_unitary(state, circuit)?);
            let mut cumulative = Vec::new();
            let mut channels = Vec::new();
            let mut c = 0.0;
            for o in dist.iter().filter(|o| o.probability > 0.0) {
                let (m, n) = o.modes;
                let chans = (channel_map.channel(m), channel_map.channel(n));
                if (chans.0.is_none() || chans.1.is_none()) && o.probability > 1e-15 {
                    return Err(Error::config(format!(
                        "terminal mode {} is reachable but has no detector channel",
                        if chans.0.is_none() { m } else { n }
                    )));
                }
                c += o.probability;
                cumulative.push(c);
                channels.push(chans);
            }
            components.push(ComponentSampler {
                cumulative,
                channels,
            });
        }
        Ok(PairSampler {
            weights,
            components,
        })
    }

    /// Channels of photon 1 and photon 2 for one pair, before losses.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Option<u8>, Option<u8>) {
        let comp = &self.components[pick(&self.weights, rng.random::<f64>())];
        comp.channels[pick(&comp.cumulative, rng.random::<f64>())]
    }

    /// One pair folded into a click pattern, including detection losses.
    pub fn sample_pattern<R: Rng>(&self, rng: &mut R, detectors: &[DetectorModel]) -> ClickPattern {
        let (c1, c2) = self.sample(rng);
        let mut pattern = ClickPattern::empty();
        for c in [c1, c2].into_iter().flatten() {
            if rng.random::<f64>() < detectors[c as usize].efficiency {
                pattern = pattern.with(c);
            }
        }
        pattern
    }
}

fn slice_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // mean > 0 and finite: construction cannot fail
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

struct Generator<'a> {
    sampler: PairSampler,
    detectors: &'a [DetectorModel],
    jitter: Vec<Option<Normal<f64>>>,
    run: SimRun,
    duration_ps: u64,
}

impl Generator<'_> {
    fn slice_bounds(&self, k: u64) -> (u64, u64) {
        let start = k * SLICE_PS;
        (start, (start + SLICE_PS).min(self.duration_ps))
    }

    fn slice(&self, k: u64) -> Vec<TimeTagRecord> {
        let (start, end) = self.slice_bounds(k);
        let len = (end - start) as f64;
        let mut out = Vec::new();

        let mut rng = slice_rng(self.run.seed, k);
        let pairs = poisson_count(&mut rng, self.run.pair_rate * len / PS_PER_S);
        for _ in 0..pairs {
            let emitted = start + (rng.random::<f64>() * len) as u64;
            let (c1, c2) = self.sampler.sample(&mut rng);
            let mut clicked = ClickPattern::empty();
            for c in [c1, c2].into_iter().flatten() {
                if rng.random::<f64>() < self.detectors[c as usize].efficiency {
                    clicked = clicked.with(c);
                }
            }
            for c in clicked.channels() {
                let t = match &self.jitter[c as usize] {
                    None => emitted,
                    Some(normal) => {
                        let sigma = normal.std_dev();
                        let j = normal
                            .sample(&mut rng)
                            .clamp(-JITTER_CLAMP_SIGMAS * sigma, JITTER_CLAMP_SIGMAS * sigma);
                        (emitted as i64 + j.round() as i64).max(0) as u64
                    }
                };
                out.push(TimeTagRecord::new(t, c));
            }
        }

        for (c, det) in self.detectors.iter().enumerate() {
            let mut rng = slice_rng(self.run.seed, (1 << 62) | ((c as u64) << 32) | k);
            let darks = poisson_count(&mut rng, det.dark_rate * len / PS_PER_S);
            for _ in 0..darks {
                let t = start + (rng.random::<f64>() * len) as u64;
                out.push(TimeTagRecord::new(t, c as u8));
            }
        }
        out.sort_unstable();
        out
    }
}

fn merge_sorted(a: Vec<TimeTagRecord>, b: Vec<TimeTagRecord>) -> Vec<TimeTagRecord> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Simulates a full run and returns the time-ordered, dead-time filtered
/// click stream. `detectors[c]` describes channel `c`.
pub fn generate_stream(
    ensemble: &SourceEnsemble,
    circuit: &ModeUnitary,
    channel_map: &ChannelMap,
    run: &SimRun,
    detectors: &[DetectorModel],
) -> Result<Vec<TimeTagRecord>> {
    let duration_ps = run.duration_ps()?;
    if detectors.len() < channel_map.channel_count() {
        return Err(Error::config(format!(
            "{} detector models for {} channels",
            detectors.len(),
            channel_map.channel_count()
        )));
    }
    if detectors.len() > ClickPattern::MAX_CHANNELS {
        return Err(Error::config("too many detector channels"));
    }
    for d in detectors {
        d.validate()?;
    }
    let jitter = detectors
        .iter()
        .map(|d| {
            (d.jitter_sigma_ps > 0.0)
                .then(|| Normal::new(0.0, d.jitter_sigma_ps).map_err(|e| Error::config(e.to_string())))
                .transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    let guard = detectors
        .iter()
        .map(|d| (JITTER_CLAMP_SIGMAS * d.jitter_sigma_ps).ceil() as u64 + 1)
        .max()
        .unwrap_or(1);
    let generator = Generator {
        sampler: PairSampler::new(ensemble, circuit, channel_map)?,
        detectors,
        jitter,
        run: *run,
        duration_ps,
    };

    let n_slices = duration_ps.div_ceil(SLICE_PS);
    let mut sorted = Vec::new();
    // clicks not yet safe to emit: a later slice may still produce earlier timestamps
    let mut pending: Vec<TimeTagRecord> = Vec::new();
    let mut k = 0;
    while k < n_slices {
        let batch_end = (k + SLICE_BATCH as u64).min(n_slices);
        let batch: Vec<Vec<TimeTagRecord>> = (k..batch_end)
            .into_par_iter()
            .map(|s| generator.slice(s))
            .collect();
        for (offset, events) in batch.into_iter().enumerate() {
            let slice = k + offset as u64;
            pending = merge_sorted(std::mem::take(&mut pending), events);
            let safe_below = ((slice + 1) * SLICE_PS).saturating_sub(guard);
            let cut = pending.partition_point(|r| r.timestamp < safe_below);
            sorted.extend(pending.drain(..cut));
        }
        k = batch_end;
    }
    sorted.append(&mut pending);

    Ok(apply_dead_time(sorted, detectors))
}

/// Drops clicks arriving within the dead time of the previous registered
/// click on the same channel. Input must be time ordered.
pub fn apply_dead_time(stream: Vec<TimeTagRecord>, detectors: &[DetectorModel]) -> Vec<TimeTagRecord> {
    let mut last: Vec<Option<u64>> = vec![None; detectors.len()];
    stream
        .into_iter()
        .filter(|r| {
            let c = r.channel as usize;
            let dead = detectors.get(c).map_or(0, |d| d.dead_time_ps);
            match last[c] {
                Some(prev) if r.timestamp - prev < dead => false,
                _ => {
                    last[c] = Some(r.timestamp);
                    true
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::HwpConvention;
    use crate::setups::{Setup, SOURCE_PATH};
    use crate::source::{source_state, SourceCalibration};

    fn bell_run(pair_rate: f64, duration_s: f64, detectors: &[DetectorModel], seed: u64) -> Vec<TimeTagRecord> {
        let setup = Setup::bell(0.0, 0.0, HwpConvention::Paper).unwrap();
        let e = source_state(&SourceCalibration::default(), 35.1, setup.modes(), SOURCE_PATH).unwrap();
        let run = SimRun {
            duration_s,
            seed,
            pair_rate,
        };
        generate_stream(&e, setup.circuit(), setup.channel_map(), &run, detectors).unwrap()
    }

    #[test]
    fn dark_counts_only() {
        let det = DetectorModel {
            dead_time_ps: 0,
            ..DetectorModel::default()
        };
        let stream = bell_run(0.0, 10.0, &[det; 4], 7);
        let n = stream.len() as f64;
        assert!((n - 1000.0).abs() <= 5.0 * 1000f64.sqrt(), "{n}");
        assert!(stream.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn zero_efficiency_gives_only_darks() {
        let det = DetectorModel {
            efficiency: 0.0,
            dark_rate: 0.0,
            ..DetectorModel::default()
        };
        assert!(bell_run(1e5, 0.05, &[det; 4], 3).is_empty());
    }

    #[test]
    fn noiseless_pairs_split_between_stations() {
        let stream = bell_run(2e4, 0.5, &[DetectorModel::ideal(); 4], 11);
        let mut by_time: std::collections::BTreeMap<u64, Vec<u8>> = Default::default();
        for r in &stream {
            by_time.entry(r.timestamp).or_default().push(r.channel);
        }
        let mut split = 0;
        for chans in by_time.values() {
            match chans.len() {
                // both photons at one station, folded by the threshold detector
                1 => assert!(chans[0] < 4),
                2 => {
                    let alice = chans.iter().filter(|&&c| c < 2).count();
                    if alice == 1 {
                        split += 1;
                        // rectilinear singlet: opposite outcomes
                        let a = chans.iter().find(|&&c| c < 2).unwrap();
                        let b = chans.iter().find(|&&c| c >= 2).unwrap();
                        assert_ne!(a % 2, b % 2);
                    }
                }
                n => panic!("unexpected {n} clicks at one timestamp"),
            }
        }
        assert!(split > 0);
    }

    #[test]
    fn dead_time_drops_close_clicks() {
        let det = [DetectorModel {
            dead_time_ps: 100,
            ..DetectorModel::ideal()
        }];
        let s = vec![
            TimeTagRecord::new(0, 0),
            TimeTagRecord::new(50, 0),
            TimeTagRecord::new(100, 0),
            TimeTagRecord::new(150, 0),
        ];
        let kept = apply_dead_time(s, &det);
        assert_eq!(kept, vec![TimeTagRecord::new(0, 0), TimeTagRecord::new(100, 0)]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let det = [DetectorModel::default(); 4];
        let a = bell_run(5e4, 0.35, &det, 99);
        let b = bell_run(5e4, 0.35, &det, 99);
        assert_eq!(a, b);
        let c = bell_run(5e4, 0.35, &det, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn bad_run_parameters() {
        let setup = Setup::bell(0.0, 0.0, HwpConvention::Paper).unwrap();
        let e = source_state(&SourceCalibration::default(), 35.1, setup.modes(), SOURCE_PATH).unwrap();
        let run = SimRun {
            duration_s: 0.0,
            seed: 1,
            pair_rate: 1.0,
        };
        let det = [DetectorModel::default(); 4];
        assert!(generate_stream(&e, setup.circuit(), setup.channel_map(), &run, &det).is_err());
        let run = SimRun {
            duration_s: 1.0,
            ..run
        };
        assert!(generate_stream(&e, setup.circuit(), setup.channel_map(), &run, &det[..2]).is_err());
    }
}
