use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;

use super::{AnalysisConfig, BinReport, CoincidenceReport};
use crate::error::{Error, Result};
use crate::timetag::TimeTagRecord;

/// Raw timestamps above this are rejected so corrected times fit in `i64`.
const MAX_TIMESTAMP: u64 = 1 << 62;

#[derive(Clone, Copy)]
struct Held {
    t: i64,
    bin: i64,
    channel: u8,
}

/// Single-pass streaming coincidence counter.
///
/// Records must arrive in raw timestamp order. Offsets are applied on the
/// fly; when channels have different offsets a small heap restores corrected
/// time order, holding events only for the offset skew.
pub struct CoincidenceCounter {
    config: AnalysisConfig,
    n: usize,
    window: i64,
    bin_len: i64,
    offsets: Vec<i64>,
    min_offset: i64,
    uniform_offsets: bool,
    reorder: BinaryHeap<Reverse<(i64, u64, u8)>>,
    seq: u64,
    last_raw: u64,
    seen: u64,
    window_buf: VecDeque<Held>,
    /// Corrected-time ownership range for segmented counting.
    owned: Option<(i64, i64)>,
    base_bin: Option<i64>,
    /// Per bin: `n` singles followed by `n * n` pair counts.
    counts: Vec<u64>,
    cur_bin: i64,
    cur_bin_start: i64,
    cur_bin_end: i64,
}

impl CoincidenceCounter {
    pub fn new(config: &AnalysisConfig) -> Result<Self> {
        config.validate()?;
        let n = config.channel_count();
        let offsets: Vec<i64> = (0..n).map(|c| config.offset(c)).collect();
        let min_offset = offsets.iter().copied().min().unwrap_or(0);
        let uniform_offsets = offsets.iter().all(|&o| o == min_offset);
        Ok(CoincidenceCounter {
            config: config.clone(),
            n,
            window: config.window_ps.min(i64::MAX as u64) as i64,
            bin_len: config.bin_length_ps(),
            offsets,
            min_offset,
            uniform_offsets,
            reorder: BinaryHeap::new(),
            seq: 0,
            last_raw: 0,
            seen: 0,
            window_buf: VecDeque::new(),
            owned: None,
            base_bin: None,
            counts: Vec::new(),
            cur_bin: 0,
            cur_bin_start: 0,
            cur_bin_end: 0,
        })
    }

    fn with_ownership(config: &AnalysisConfig, lo: i64, hi: i64) -> Result<Self> {
        let mut c = Self::new(config)?;
        c.owned = Some((lo, hi));
        Ok(c)
    }

    #[inline]
    fn stride(&self) -> usize {
        self.n + self.n * self.n
    }

    #[inline]
    fn owns(&self, t: i64) -> bool {
        match self.owned {
            None => true,
            Some((lo, hi)) => t >= lo && t < hi,
        }
    }

    #[inline]
    fn bin_of(&mut self, t: i64) -> i64 {
        if t < self.cur_bin_start || t >= self.cur_bin_end {
            self.cur_bin = t.div_euclid(self.bin_len);
            self.cur_bin_start = self.cur_bin * self.bin_len;
            self.cur_bin_end = self.cur_bin_start.saturating_add(self.bin_len);
        }
        self.cur_bin
    }

    #[inline]
    fn slot(&mut self, bin: i64) -> usize {
        let base = *self.base_bin.get_or_insert(bin);
        // bins are visited in nondecreasing order, so `bin >= base`
        let idx = (bin - base) as usize * self.stride();
        if idx >= self.counts.len() {
            let len = idx + self.stride();
            self.counts.resize(len, 0);
        }
        idx
    }

    /// Feeds one record.
    pub fn push(&mut self, r: TimeTagRecord) -> Result<()> {
        if r.timestamp < self.last_raw {
            return Err(Error::Stream(format!(
                "record {}: timestamp {} precedes {}",
                self.seen, r.timestamp, self.last_raw
            )));
        }
        if r.channel as usize >= self.n {
            return Err(Error::config(format!(
                "record {}: channel {} has no role ({} channels configured)",
                self.seen, r.channel, self.n
            )));
        }
        if r.timestamp > MAX_TIMESTAMP {
            return Err(Error::Stream(format!("record {}: timestamp {} too large", self.seen, r.timestamp)));
        }
        self.last_raw = r.timestamp;
        self.seen += 1;
        let t = r.timestamp as i64 + self.offsets[r.channel as usize];
        if self.uniform_offsets {
            self.process(t, r.channel);
            return Ok(());
        }
        self.reorder.push(Reverse((t, self.seq, r.channel)));
        self.seq += 1;
        // later records have corrected time >= raw + min_offset
        let horizon = r.timestamp as i64 + self.min_offset;
        while let Some(&Reverse((t, _, c))) = self.reorder.peek() {
            if t > horizon {
                break;
            }
            self.reorder.pop();
            self.process(t, c);
        }
        Ok(())
    }

    pub fn push_all<I: IntoIterator<Item = TimeTagRecord>>(&mut self, records: I) -> Result<()> {
        for r in records {
            self.push(r)?;
        }
        Ok(())
    }

    #[inline]
    fn process(&mut self, t: i64, channel: u8) {
        while let Some(front) = self.window_buf.front() {
            if 2 * (t - front.t) > self.window {
                self.window_buf.pop_front();
            } else {
                break;
            }
        }
        let bin = self.bin_of(t);
        let n = self.n;
        if self.owns(t) {
            let s = self.slot(bin);
            self.counts[s + channel as usize] += 1;
        }
        for k in 0..self.window_buf.len() {
            let f = self.window_buf[k];
            if f.channel == channel || !self.owns(f.t) {
                continue;
            }
            let (i, j) = if f.channel < channel {
                (f.channel as usize, channel as usize)
            } else {
                (channel as usize, f.channel as usize)
            };
            let s = self.slot(f.bin);
            self.counts[s + n + i * n + j] += 1;
        }
        self.window_buf.push_back(Held { t, bin, channel });
    }

    fn drain(&mut self) {
        while let Some(Reverse((t, _, c))) = self.reorder.pop() {
            self.process(t, c);
        }
    }

    fn into_counts(mut self) -> (Option<i64>, Vec<u64>, AnalysisConfig) {
        self.drain();
        (self.base_bin, self.counts, self.config)
    }

    /// Flushes held events and builds the report.
    pub fn finish(self) -> CoincidenceReport {
        let (base, counts, config) = self.into_counts();
        build_report(config, base, &counts)
    }
}

fn build_report(config: AnalysisConfig, base: Option<i64>, counts: &[u64]) -> CoincidenceReport {
    let n = config.channel_count();
    let stride = n + n * n;
    let roles = config.channel_roles.clone();
    let mut total = vec![0u64; stride];
    let mut bins = Vec::new();
    if let Some(base) = base {
        for (k, chunk) in counts.chunks(stride).enumerate() {
            for (acc, x) in total.iter_mut().zip(chunk) {
                *acc += x;
            }
            let bin = base + k as i64;
            bins.push(BinReport::from_counts(
                Some(bin),
                bin as f64 * config.bin_length_s,
                &roles,
                &chunk[..n],
                &chunk[n..],
            ));
        }
    }
    let total = BinReport::from_counts(
        None,
        bins.first().map_or(0.0, |b| b.start_s),
        &roles,
        &total[..n],
        &total[n..],
    );
    CoincidenceReport { config, bins, total }
}

/// Counts coincidences in a time-ordered stream.
pub fn count_coincidences(stream: &[TimeTagRecord], config: &AnalysisConfig) -> Result<CoincidenceReport> {
    let mut c = CoincidenceCounter::new(config)?;
    c.push_all(stream.iter().copied())?;
    Ok(c.finish())
}

/// Same result as [`count_coincidences`], computed over `segments` time
/// segments in parallel. Segment edges fall on bin boundaries; each segment
/// also reads a margin of one window plus the offset skew on both sides and
/// counts only coincidences whose earlier event it owns.
pub fn count_coincidences_parallel(
    stream: &[TimeTagRecord],
    config: &AnalysisConfig,
    segments: usize,
) -> Result<CoincidenceReport> {
    config.validate()?;
    if let Some(pos) = stream.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Stream(format!(
            "record {}: timestamp {} precedes {}",
            pos + 1,
            stream[pos + 1].timestamp,
            stream[pos].timestamp
        )));
    }
    let (first, last) = match (stream.first(), stream.last()) {
        (Some(f), Some(l)) if segments > 1 => (f.timestamp, l.timestamp),
        _ => return count_coincidences(stream, config),
    };
    if last > MAX_TIMESTAMP {
        return count_coincidences(stream, config);
    }
    let n = config.channel_count();
    let offsets: Vec<i64> = (0..n).map(|c| config.offset(c)).collect();
    let omin = offsets.iter().copied().min().unwrap_or(0);
    let omax = offsets.iter().copied().max().unwrap_or(0);
    let bin_len = config.bin_length_ps();
    let first_bin = (first as i64 + omin).div_euclid(bin_len);
    let last_bin = (last as i64 + omax).div_euclid(bin_len);
    let n_bins = last_bin - first_bin + 1;
    let per = (n_bins as usize).div_ceil(segments).max(1) as i64;
    let margin = config.window_ps as i64 / 2 + (omax - omin) + 1;

    let mut bounds = Vec::new();
    let mut b = first_bin;
    while b <= last_bin {
        let lo = if b == first_bin { i64::MIN } else { b * bin_len };
        let next = b + per;
        let hi = if next > last_bin { i64::MAX } else { next * bin_len };
        bounds.push((lo, hi));
        b = next;
    }
    if bounds.len() < 2 {
        return count_coincidences(stream, config);
    }

    let parts: Vec<(Option<i64>, Vec<u64>)> = bounds
        .par_iter()
        .map(|&(lo, hi)| -> Result<_> {
            // raw time range whose corrected times can reach [lo - margin, hi + margin)
            let raw_lo = lo.saturating_sub(margin).saturating_sub(omax).max(0) as u64;
            let raw_hi = hi.saturating_add(margin).saturating_sub(omin).max(0) as u64;
            let a = stream.partition_point(|r| r.timestamp < raw_lo);
            let z = stream.partition_point(|r| r.timestamp < raw_hi);
            let mut c = CoincidenceCounter::with_ownership(config, lo, hi)?;
            c.push_all(stream[a..z].iter().copied())?;
            let (base, counts, _) = c.into_counts();
            Ok((base, counts))
        })
        .collect::<Result<_>>()?;

    let stride = n + n * n;
    let mut base: Option<i64> = None;
    let mut merged: Vec<u64> = Vec::new();
    for (pbase, counts) in parts {
        let Some(pbase) = pbase else { continue };
        // margin events may create leading or trailing all-zero bins
        let nonzero: Vec<(i64, &[u64])> = counts
            .chunks(stride)
            .enumerate()
            .map(|(k, ch)| (pbase + k as i64, ch))
            .filter(|(_, ch)| ch.iter().any(|&x| x != 0))
            .collect();
        for (bin, ch) in nonzero {
            let b0 = *base.get_or_insert(bin);
            let idx = (bin - b0) as usize * stride;
            if idx + stride > merged.len() {
                merged.resize(idx + stride, 0);
            }
            for (acc, x) in merged[idx..idx + stride].iter_mut().zip(ch) {
                *acc += x;
            }
        }
    }
    // match the serial base: the earliest corrected event's bin
    let serial_base = stream
        .iter()
        .map(|r| (r.timestamp as i64 + offsets[r.channel as usize]).div_euclid(bin_len))
        .min();
    if let (Some(sb), Some(b0)) = (serial_base, base) {
        if sb < b0 {
            let mut shifted = vec![0u64; (b0 - sb) as usize * stride];
            shifted.extend_from_slice(&merged);
            merged = shifted;
        }
        base = Some(sb);
    }
    // trailing bins in the serial result end at the last corrected event
    if let Some(sb) = base {
        let last_bin = stream
            .iter()
            .map(|r| (r.timestamp as i64 + offsets[r.channel as usize]).div_euclid(bin_len))
            .max()
            .unwrap_or(sb);
        merged.resize((last_bin - sb + 1) as usize * stride, 0);
    }
    Ok(build_report(config.clone(), base, &merged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coincidence::Role;

    fn two_channel(window_ps: u64) -> AnalysisConfig {
        AnalysisConfig {
            window_ps,
            ..AnalysisConfig::with_roles(vec![Role::APlusT, Role::APlusR, Role::AMinus])
        }
    }

    fn rec(t: u64, c: u8) -> TimeTagRecord {
        TimeTagRecord::new(t, c)
    }

    #[test]
    fn inside_and_outside_half_window() {
        let s = [rec(0, 0), rec(1000, 1)];
        let r = count_coincidences(&s, &two_channel(2500)).unwrap();
        assert_eq!(r.total.total_coincidences, 1);
        assert_eq!(r.total.coincidence(0, 1), 1);
        let r = count_coincidences(&s, &two_channel(1999)).unwrap();
        assert_eq!(r.total.total_coincidences, 0);
        // boundary is inclusive
        let r = count_coincidences(&s, &two_channel(2000)).unwrap();
        assert_eq!(r.total.total_coincidences, 1);
    }

    #[test]
    fn same_channel_pairs_ignored_and_all_pairs_counted() {
        let s = [rec(0, 0), rec(10, 0), rec(20, 1), rec(30, 2)];
        let r = count_coincidences(&s, &two_channel(1000)).unwrap();
        assert_eq!(r.total.coincidence(0, 1), 2);
        assert_eq!(r.total.coincidence(0, 2), 2);
        assert_eq!(r.total.coincidence(1, 2), 1);
        assert_eq!(r.total.singles, vec![2, 1, 1]);
    }

    #[test]
    fn offsets_reorder_events() {
        let mut cfg = two_channel(100);
        cfg.offsets_ps = vec![0, -5000, 0];
        let s = [rec(0, 0), rec(5020, 1)];
        let r = count_coincidences(&s, &cfg).unwrap();
        assert_eq!(r.total.coincidence(0, 1), 1);
        cfg.offsets_ps = vec![500, 0, 0];
        let s = [rec(0, 0), rec(500, 1), rec(1000, 2)];
        let r = count_coincidences(&s, &cfg).unwrap();
        assert_eq!(r.total.coincidence(0, 1), 1);
        assert_eq!(r.total.coincidence(0, 2), 0);
    }

    #[test]
    fn coincidence_goes_to_bin_of_earlier_event() {
        let mut cfg = two_channel(3200);
        cfg.bin_length_s = 1e-9;
        let s = [rec(999, 0), rec(1001, 1), rec(2500, 2)];
        let r = count_coincidences(&s, &cfg).unwrap();
        assert_eq!(r.bins.len(), 3);
        assert_eq!(r.bins[0].coincidence(0, 1), 1);
        assert_eq!(r.bins[0].coincidence(0, 2), 1);
        assert_eq!(r.bins[1].coincidence(1, 2), 1);
        assert_eq!(r.bins[1].total_coincidences, 1);
        assert_eq!(r.total.total_coincidences, 3);
    }

    #[test]
    fn negative_offsets_give_negative_bins() {
        let mut cfg = two_channel(10);
        cfg.offsets_ps = vec![-2_000_000_000_000, 0, 0];
        let r = count_coincidences(&[rec(0, 0), rec(1, 1)], &cfg).unwrap();
        assert_eq!(r.bins.first().unwrap().bin, Some(-2));
        assert_eq!(r.bins.len(), 3);
    }

    #[test]
    fn stream_errors() {
        let cfg = two_channel(10);
        assert!(matches!(
            count_coincidences(&[rec(5, 0), rec(4, 1)], &cfg),
            Err(Error::Stream(_))
        ));
        assert!(matches!(count_coincidences(&[rec(5, 7)], &cfg), Err(Error::Config(_))));
        assert!(matches!(
            count_coincidences_parallel(&[rec(5, 0), rec(4, 1)], &cfg, 4),
            Err(Error::Stream(_))
        ));
    }

    #[test]
    fn empty_stream_has_no_bins() {
        let r = count_coincidences(&[], &AnalysisConfig::bell()).unwrap();
        assert!(r.bins.is_empty());
        assert_eq!(r.total.total_coincidences, 0);
        assert_eq!(r.total.e, None);
    }

    #[test]
    fn parallel_matches_serial_across_bin_edges() {
        let mut cfg = two_channel(3000);
        cfg.bin_length_s = 1e-8;
        cfg.offsets_ps = vec![0, 700, -1500];
        let mut s = Vec::new();
        let mut t = 0u64;
        for k in 0..5000u64 {
            t += (k * 7919) % 900;
            s.push(rec(t, (k % 3) as u8));
        }
        let serial = count_coincidences(&s, &cfg).unwrap();
        for segs in [2, 3, 8, 50] {
            assert_eq!(count_coincidences_parallel(&s, &cfg, segs).unwrap(), serial, "{segs}");
        }
    }
}
