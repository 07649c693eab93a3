//! Exact two-photon amplitude algebra.
//!
//! A pair state is stored as a complex matrix `A` over the circuit's optical
//! modes, representing `Σ_{m,n} A[m][n] |m⟩₁|n⟩₂` with slot 1 and slot 2
//! being the two photons. Identical photons (`labeled = false`) carry a
//! symmetric `A` and are read out with the amplitude-sum rule; labeled
//! photons carry a hidden binary exchange label attached to the slot, so
//! optics act identically on both slots but the slots never interfere and
//! outcome probabilities are summed instead.
//!
//! Normalisation follows the creation-operator picture: for identical
//! photons the amplitude of `|1_m 1_n⟩` is `A[m][n] + A[n][m]` and the
//! amplitude of `|2_m⟩` is `√2·A[m][m]`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Tolerance for all exact algebraic identities in this module.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Upper bound on distinct spatial paths in one circuit.
pub const MAX_PATHS: usize = 8;

/// Outcome probability below which an unwatched mode is treated as empty.
const NEGLIGIBLE: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    fn offset(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// One optical mode: a spatial path of the circuit plus a polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub path: usize,
    pub pol: Polarization,
}

/// The fixed set of spatial paths of a circuit. Mode index is
/// `2 * path + pol`, with H before V.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSet {
    paths: Vec<String>,
}

impl ModeSet {
    pub fn new<S: AsRef<str>>(paths: &[S]) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::config("mode set needs at least one spatial path"));
        }
        if paths.len() > MAX_PATHS {
            return Err(Error::config(format!(
                "{} spatial paths exceed the limit of {MAX_PATHS}",
                paths.len()
            )));
        }
        let paths: Vec<String> = paths.iter().map(|p| p.as_ref().to_owned()).collect();
        for (i, p) in paths.iter().enumerate() {
            if paths[..i].contains(p) {
                return Err(Error::config(format!("duplicate spatial path {p:?}")));
            }
        }
        Ok(ModeSet { paths })
    }

    pub fn dim(&self) -> usize {
        2 * self.paths.len()
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn path_index(&self, name: &str) -> Result<usize> {
        self.paths
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::config(format!("unknown spatial path {name:?}")))
    }

    pub fn mode(&self, path: &str, pol: Polarization) -> Result<Mode> {
        Ok(Mode {
            path: self.path_index(path)?,
            pol,
        })
    }

    pub fn index(&self, mode: Mode) -> Result<usize> {
        if mode.path >= self.paths.len() {
            return Err(Error::config(format!(
                "mode path index {} outside mode set of {} paths",
                mode.path,
                self.paths.len()
            )));
        }
        Ok(2 * mode.path + mode.pol.offset())
    }

    pub fn mode_at(&self, index: usize) -> Mode {
        let pol = if index % 2 == 0 {
            Polarization::H
        } else {
            Polarization::V
        };
        Mode {
            path: index / 2,
            pol,
        }
    }

    pub fn label(&self, index: usize) -> String {
        let m = self.mode_at(index);
        format!("{}·{:?}", self.paths[m.path], m.pol)
    }
}

/// A unitary acting on single-photon mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    matrix: CMatrix,
}

impl ModeUnitary {
    /// Wraps `matrix`, rejecting it unless `U†U = I` entrywise within
    /// [`ALGEBRA_TOL`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let deviation = unitarity_deviation(&matrix);
        if deviation > ALGEBRA_TOL {
            return Err(Error::Model(format!(
                "matrix is not unitary (max |U†U - I| = {deviation:e})"
            )));
        }
        Ok(ModeUnitary { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        ModeUnitary {
            matrix: CMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        ModeUnitary {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self` followed by `next`, i.e. the product `next · self`.
    pub fn then(&self, next: &ModeUnitary) -> Result<Self> {
        if self.dim() != next.dim() {
            return Err(Error::config(format!(
                "cannot compose unitaries of dimension {} and {}",
                self.dim(),
                next.dim()
            )));
        }
        Ok(ModeUnitary {
            matrix: &next.matrix * &self.matrix,
        })
    }
}

pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let product = &m.adjoint() * m;
    product.max_abs_diff(&CMatrix::identity(m.dim()))
}

/// A two-photon pure state over a fixed mode set.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhotonState {
    amplitudes: CMatrix,
    labeled: bool,
}

impl TwoPhotonState {
    /// Wraps a raw amplitude matrix after checking the state invariants:
    /// symmetry for identical photons and nonzero norm.
    pub fn from_amplitudes(amplitudes: CMatrix, labeled: bool) -> Result<Self> {
        if !labeled {
            let asym = amplitudes.max_abs_diff(&amplitudes.transpose());
            if asym > ALGEBRA_TOL {
                return Err(Error::Model(format!(
                    "identical-photon amplitudes must be symmetric (asymmetry {asym:e})"
                )));
            }
        }
        let state = TwoPhotonState {
            amplitudes,
            labeled,
        };
        if state.norm() <= 0.0 {
            return Err(Error::DegenerateState);
        }
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.dim()
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    pub fn amplitudes(&self) -> &CMatrix {
        &self.amplitudes
    }

    pub fn amplitude(&self, m: usize, n: usize) -> Complex64 {
        self.amplitudes[(m, n)]
    }

    /// The state norm `N(A)` under the convention of this state's kind.
    pub fn norm(&self) -> f64 {
        let a = &self.amplitudes;
        let n = a.dim();
        if self.labeled {
            a.entries().iter().map(|z| z.norm_sqr()).sum()
        } else {
            let mut total = 0.0;
            for m in 0..n {
                total += 2.0 * a[(m, m)].norm_sqr();
                for k in (m + 1)..n {
                    total += (a[(m, k)] + a[(k, m)]).norm_sqr();
                }
            }
            total
        }
    }

    /// Largest `|A[m][n] - A[n][m]|`.
    pub fn asymmetry(&self) -> f64 {
        self.amplitudes.max_abs_diff(&self.amplitudes.transpose())
    }

    fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateState);
        }
        self.amplitudes = self
            .amplitudes
            .scale(Complex64::new(1.0 / norm.sqrt(), 0.0));
        Ok(self)
    }

    /// Overlap `⟨self|other⟩` of the normalised states.
    pub fn inner(&self, other: &TwoPhotonState) -> Result<Complex64> {
        check_compatible(self, other)?;
        let (a, b) = (&self.amplitudes, &other.amplitudes);
        let n = a.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        if self.labeled {
            for (x, y) in a.entries().iter().zip(b.entries()) {
                acc += x.conj() * y;
            }
        } else {
            for m in 0..n {
                acc += 2.0 * a[(m, m)].conj() * b[(m, m)];
                for k in (m + 1)..n {
                    acc += (a[(m, k)] + a[(k, m)]).conj() * (b[(m, k)] + b[(k, m)]);
                }
            }
        }
        Ok(acc / (self.norm() * other.norm()).sqrt())
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &TwoPhotonState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

fn check_compatible(a: &TwoPhotonState, b: &TwoPhotonState) -> Result<()> {
    if a.labeled != b.labeled {
        return Err(Error::Model(
            "cannot mix labeled and identical-photon states".into(),
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::Model(format!(
            "mode-space dimensions differ ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Creates the normalised pair `a†_{mode1} a†_{mode2}|0⟩` (identical
/// photons) or `|mode1⟩₊|mode2⟩₋` (labeled).
pub fn make_pair_state(
    modes: &ModeSet,
    mode1: Mode,
    mode2: Mode,
    labeled: bool,
) -> Result<TwoPhotonState> {
    let i = modes.index(mode1)?;
    let j = modes.index(mode2)?;
    let mut a = CMatrix::zeros(modes.dim());
    if labeled {
        a[(i, j)] = Complex64::new(1.0, 0.0);
    } else if i == j {
        a[(i, i)] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    } else {
        a[(i, j)] = Complex64::new(0.5, 0.0);
        a[(j, i)] = Complex64::new(0.5, 0.0);
    }
    TwoPhotonState::from_amplitudes(a, labeled)?.normalized()
}

/// Linear combination `Σ cᵢ ψᵢ`, renormalised.
pub fn superpose(terms: &[(Complex64, &TwoPhotonState)]) -> Result<TwoPhotonState> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::Model("superposition needs at least one term".into()))?;
    let mut acc = CMatrix::zeros(first.dim());
    for (c, state) in terms {
        check_compatible(first, state)?;
        acc.add_scaled(&state.amplitudes, *c);
    }
    TwoPhotonState {
        amplitudes: acc,
        labeled: first.labeled,
    }
    .normalized()
}

/// Evolves both photons through the same single-photon unitary: `A' = U A Uᵀ`.
pub fn apply_unitary(state: &TwoPhotonState, u: &ModeUnitary) -> Result<TwoPhotonState> {
    if state.dim() != u.dim() {
        return Err(Error::config(format!(
            "unitary of dimension {} applied to state of dimension {}",
            u.dim(),
            state.dim()
        )));
    }
    let m = u.matrix();
    let evolved = &(m * &state.amplitudes) * &m.transpose();
    Ok(TwoPhotonState {
        amplitudes: evolved,
        labeled: state.labeled,
    })
}

/// Conditions on detection outcomes: amplitudes of every unordered mode pair
/// `{m, n}` rejected by `keep(m, n)` (called with `m <= n`) are zeroed.
/// Returns the renormalised surviving state and the probability of the kept
/// outcomes.
pub fn postselect<F>(state: &TwoPhotonState, keep: F) -> Result<(TwoPhotonState, f64)>
where
    F: Fn(usize, usize) -> bool,
{
    let total = state.norm();
    let n = state.dim();
    let mut a = state.amplitudes.clone();
    let zero = Complex64::new(0.0, 0.0);
    for m in 0..n {
        for k in m..n {
            if !keep(m, k) {
                a[(m, k)] = zero;
                a[(k, m)] = zero;
            }
        }
    }
    let kept = TwoPhotonState {
        amplitudes: a,
        labeled: state.labeled,
    };
    let weight = kept.norm();
    if !(weight > 0.0) {
        return Err(Error::EmptyPostselection);
    }
    Ok((kept.normalized()?, weight / total))
}

/// Probability of one unordered outcome `{m, n}` of a two-photon detection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub modes: (usize, usize),
    pub probability: f64,
}

/// Probabilities of all unordered mode pairs `{m, n}` with `m <= n`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl OutcomeDistribution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &Outcome> {
        self.outcomes.iter()
    }

    pub fn probability(&self, m: usize, n: usize) -> f64 {
        let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
        // row-major upper triangle
        let idx = lo * self.dim - lo * (lo + 1) / 2 + hi;
        self.outcomes[idx].probability
    }

    pub fn total(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// Probability that both photons land in modes satisfying `pred`.
    pub fn probability_where<F: Fn(usize, usize) -> bool>(&self, pred: F) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| pred(o.modes.0, o.modes.1))
            .map(|o| o.probability)
            .sum()
    }
}

/// Detection-outcome distribution: amplitude-sum rule for identical photons,
/// probability-sum rule for labeled photons.
pub fn outcome_distribution(state: &TwoPhotonState) -> OutcomeDistribution {
    let a = &state.amplitudes;
    let n = a.dim();
    let norm = state.norm();
    let mut outcomes = Vec::with_capacity(n * (n + 1) / 2);
    for m in 0..n {
        for k in m..n {
            let weight = match (state.labeled, m == k) {
                (false, true) => 2.0 * a[(m, m)].norm_sqr(),
                (false, false) => (a[(m, k)] + a[(k, m)]).norm_sqr(),
                (true, true) => a[(m, m)].norm_sqr(),
                (true, false) => a[(m, k)].norm_sqr() + a[(k, m)].norm_sqr(),
            };
            outcomes.push(Outcome {
                modes: (m, k),
                probability: weight / norm,
            });
        }
    }
    OutcomeDistribution { dim: n, outcomes }
}

/// Set of detector channels that clicked, as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClickPattern(u32);

impl ClickPattern {
    pub const MAX_CHANNELS: usize = 32;

    pub fn empty() -> Self {
        ClickPattern(0)
    }

    pub fn from_channels(channels: &[u8]) -> Self {
        channels.iter().fold(Self::empty(), |p, &c| p.with(c))
    }

    pub fn with(self, channel: u8) -> Self {
        debug_assert!((channel as usize) < Self::MAX_CHANNELS);
        ClickPattern(self.0 | (1 << channel))
    }

    pub fn contains(self, channel: u8) -> bool {
        self.0 & (1 << channel) != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn channels(self) -> impl Iterator<Item = u8> {
        (0..Self::MAX_CHANNELS as u8).filter(move |&c| self.contains(c))
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let chans: Vec<String> = self.channels().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", chans.join(","))
    }
}

/// Assignment of optical modes to threshold-detector channels. Modes without
/// a channel are not watched by any detector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelMap {
    channels: Vec<Option<u8>>,
}

impl ChannelMap {
    pub fn new(channels: Vec<Option<u8>>) -> Result<Self> {
        if let Some(c) = channels.iter().flatten().find(|&&c| c as usize >= ClickPattern::MAX_CHANNELS) {
            return Err(Error::config(format!("channel {c} exceeds the supported maximum")));
        }
        Ok(ChannelMap { channels })
    }

    /// Maps both polarizations of each named path onto one detector channel.
    pub fn by_path(modes: &ModeSet, assignments: &[(&str, u8)]) -> Result<Self> {
        let mut channels = vec![None; modes.dim()];
        for &(path, channel) in assignments {
            let p = modes.path_index(path)?;
            channels[2 * p] = Some(channel);
            channels[2 * p + 1] = Some(channel);
        }
        Self::new(channels)
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, mode_index: usize) -> Option<u8> {
        self.channels.get(mode_index).copied().flatten()
    }

    pub fn channel_count(&self) -> usize {
        self.channels
            .iter()
            .flatten()
            .map(|&c| c as usize + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Probability of each click pattern.
pub type ClickDistribution = BTreeMap<ClickPattern, f64>;

/// Folds a mode-pair distribution onto threshold-detector click patterns.
/// Two photons on the same channel give a single click there. Outcomes of
/// nonzero probability that reach an unmapped mode are a configuration error.
pub fn marginal_click_pattern(
    dist: &OutcomeDistribution,
    channel_map: &ChannelMap,
) -> Result<ClickDistribution> {
    let ones = vec![1.0; channel_map.channel_count()];
    detected_click_pattern(dist, channel_map, &ones)
}

/// As [`marginal_click_pattern`], with each photon independently detected
/// with probability `efficiencies[channel]`. Patterns with no click are kept
/// so the result still sums to one.
pub fn detected_click_pattern(
    dist: &OutcomeDistribution,
    channel_map: &ChannelMap,
    efficiencies: &[f64],
) -> Result<ClickDistribution> {
    if channel_map.dim() != dist.dim() {
        return Err(Error::config(format!(
            "channel map covers {} modes but distribution has {}",
            channel_map.dim(),
            dist.dim()
        )));
    }
    if efficiencies.len() < channel_map.channel_count() {
        return Err(Error::config(format!(
            "{} efficiencies given for {} channels",
            efficiencies.len(),
            channel_map.channel_count()
        )));
    }
    let mut out = ClickDistribution::new();
    let mut add = |pattern: ClickPattern, p: f64| {
        if p > 0.0 {
            *out.entry(pattern).or_insert(0.0) += p;
        }
    };
    for o in dist.iter() {
        if o.probability == 0.0 {
            continue;
        }
        let (m, n) = o.modes;
        let (cm, cn) = match (channel_map.channel(m), channel_map.channel(n)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                if o.probability > NEGLIGIBLE {
                    let unmapped = if channel_map.channel(m).is_none() { m } else { n };
                    return Err(Error::config(format!(
                        "mode index {unmapped} is reached with probability {:e} but has no detector",
                        o.probability
                    )));
                }
                continue;
            }
        };
        let (em, en) = (efficiencies[cm as usize], efficiencies[cn as usize]);
        let p = o.probability;
        let none = ClickPattern::empty();
        if cm == cn {
            let miss = (1.0 - em) * (1.0 - en);
            add(none.with(cm), p * (1.0 - miss));
            add(none, p * miss);
        } else {
            add(none.with(cm).with(cn), p * em * en);
            add(none.with(cm), p * em * (1.0 - en));
            add(none.with(cn), p * (1.0 - em) * en);
            add(none, p * (1.0 - em) * (1.0 - en));
        }
    }
    Ok(out)
}
