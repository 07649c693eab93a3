//! Collinear type-II pair source.
//!
//! Temperature enters only through a calibration table: the fraction of
//! pairs that are identical bosons (`degeneracy_weight`), the exchange phase
//! of the remaining labeled pairs, and the pair rate are interpolated
//! linearly between anchor points.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictions::VisibilityPair;
use crate::quantum::{make_pair_state, superpose, ModeSet, Polarization, TwoPhotonState};

/// Default pair rate at the optimum temperature, pairs per second.
pub const DEFAULT_PEAK_PAIR_RATE: f64 = 1.0e5;

/// Optimum crystal temperature of the default calibration, °C.
pub const OPTIMUM_TEMPERATURE_C: f64 = 35.1;

/// Quasi-phase-matching bookkeeping. Values are carried as metadata and
/// checked for consistency; no material dispersion is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchingModel {
    /// Poling period Λ in meters.
    pub poling_period_m: f64,
    /// Angular frequencies (pump, signal, idler) in rad/s.
    pub omega: [f64; 3],
    /// Wave numbers (pump, signal, idler) in rad/m, when known.
    #[serde(default)]
    pub k: Option<[f64; 3]>,
}

/// Checks energy conservation `ω_p = ω_s + ω_i` (1e-9 relative) and, when
/// wave numbers are given, `k_p = k_s + k_i + 2π/Λ` (1e-6 relative).
pub fn validate_qpm(model: &PhaseMatchingModel) -> bool {
    let [wp, ws, wi] = model.omega;
    if !(wp > 0.0) || ((ws + wi) - wp).abs() > 1e-9 * wp.abs() {
        return false;
    }
    match model.k {
        None => true,
        Some([kp, ks, ki]) => {
            if !(model.poling_period_m > 0.0) {
                return false;
            }
            let rhs = ks + ki + 2.0 * PI / model.poling_period_m;
            (kp - rhs).abs() <= 1e-6 * kp.abs().max(rhs.abs())
        }
    }
}

/// One calibration anchor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchor {
    pub temperature_c: f64,
    /// Exchange phase φ_x of the labeled component, radians. The diagonal
    /// correlation of a purely labeled source is `−cos φ_x`.
    pub exchange_phase: f64,
    /// Probability that a pair is emitted as two identical bosons.
    pub degeneracy_weight: f64,
    /// Detected-band pair rate, pairs per second.
    pub pair_rate: f64,
    /// Source visibility measured at this temperature; perfect when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<VisibilityPair>,
}

/// Source parameters at one temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePoint {
    pub temperature_c: f64,
    pub exchange_phase: f64,
    pub degeneracy_weight: f64,
    pub pair_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CalibrationAnchor>", into = "Vec<CalibrationAnchor>")]
pub struct SourceCalibration {
    anchors: Vec<CalibrationAnchor>,
}

impl SourceCalibration {
    pub fn new(anchors: Vec<CalibrationAnchor>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::config("calibration needs at least one anchor"));
        }
        for w in anchors.windows(2) {
            if !(w[1].temperature_c > w[0].temperature_c) {
                return Err(Error::config(format!(
                    "calibration temperatures must be strictly increasing ({} then {})",
                    w[0].temperature_c, w[1].temperature_c
                )));
            }
        }
        for a in &anchors {
            if !(0.0..=1.0).contains(&a.degeneracy_weight) {
                return Err(Error::config(format!(
                    "degeneracy weight {} at {} °C outside [0, 1]",
                    a.degeneracy_weight, a.temperature_c
                )));
            }
            if !(a.pair_rate >= 0.0) || !a.exchange_phase.is_finite() {
                return Err(Error::config(format!(
                    "invalid anchor at {} °C",
                    a.temperature_c
                )));
            }
            if let Some(v) = a.visibility {
                let v = VisibilityPair::new(v.rect, v.diag)?;
                if v.diag > v.rect {
                    return Err(Error::config(format!(
                        "anchor at {} °C: diagonal visibility above rectilinear",
                        a.temperature_c
                    )));
                }
            }
        }
        Ok(SourceCalibration { anchors })
    }

    /// Default anchors with the given peak pair rate.
    ///
    /// The exchange phase advances by π between successive extrema of the
    /// diagonal correlation as the crystal is cooled; anchors at the
    /// positive extrema (28.6, 25.0, 21.8 °C) have `cos φ_x = −1`.
    pub fn default_with_rate(peak_rate: f64) -> Self {
        let anchor = |t: f64, phase: f64, p: f64, rel: f64| CalibrationAnchor {
            temperature_c: t,
            exchange_phase: phase,
            degeneracy_weight: p,
            pair_rate: rel * peak_rate,
            visibility: None,
        };
        SourceCalibration {
            anchors: vec![
                anchor(21.8, 5.0 * PI, 0.0, 0.03),
                anchor(23.4, 4.0 * PI, 0.0, 0.04),
                anchor(25.0, 3.0 * PI, 0.0, 0.05),
                anchor(26.8, 2.0 * PI, 0.0, 0.07),
                anchor(28.6, PI, 0.05, 0.1),
                anchor(OPTIMUM_TEMPERATURE_C, 0.0, 1.0, 1.0),
            ],
        }
    }

    pub fn anchors(&self) -> &[CalibrationAnchor] {
        &self.anchors
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.anchors[0].temperature_c,
            self.anchors[self.anchors.len() - 1].temperature_c,
        )
    }

    /// Piecewise-linear interpolation of the anchors at `temperature_c`.
    pub fn at(&self, temperature_c: f64) -> Result<SourcePoint> {
        let (min, max) = self.range();
        if !(temperature_c >= min && temperature_c <= max) {
            return Err(Error::OutOfRange {
                value: temperature_c,
                min,
                max,
            });
        }
        let upper = self
            .anchors
            .partition_point(|a| a.temperature_c < temperature_c);
        let hi = self.anchors[upper.min(self.anchors.len() - 1)];
        if upper == 0 || hi.temperature_c == temperature_c {
            return Ok(SourcePoint {
                temperature_c,
                exchange_phase: hi.exchange_phase,
                degeneracy_weight: hi.degeneracy_weight,
                pair_rate: hi.pair_rate,
            });
        }
        let lo = self.anchors[upper - 1];
        let f = (temperature_c - lo.temperature_c) / (hi.temperature_c - lo.temperature_c);
        let lerp = |a: f64, b: f64| a + f * (b - a);
        Ok(SourcePoint {
            temperature_c,
            exchange_phase: lerp(lo.exchange_phase, hi.exchange_phase),
            degeneracy_weight: lerp(lo.degeneracy_weight, hi.degeneracy_weight),
            pair_rate: lerp(lo.pair_rate, hi.pair_rate),
        })
    }

    /// Interpolated anchor visibility at `temperature_c`. Anchors without a
    /// visibility count as perfect; `None` when neither neighbour has one.
    pub fn visibility_at(&self, temperature_c: f64) -> Result<Option<VisibilityPair>> {
        self.at(temperature_c)?;
        let upper = self
            .anchors
            .partition_point(|a| a.temperature_c < temperature_c)
            .min(self.anchors.len() - 1);
        let hi = &self.anchors[upper];
        if upper == 0 || hi.temperature_c == temperature_c {
            return Ok(hi.visibility);
        }
        let lo = &self.anchors[upper - 1];
        if lo.visibility.is_none() && hi.visibility.is_none() {
            return Ok(None);
        }
        let f = (temperature_c - lo.temperature_c) / (hi.temperature_c - lo.temperature_c);
        let (a, b) = (
            lo.visibility.unwrap_or(VisibilityPair::PERFECT),
            hi.visibility.unwrap_or(VisibilityPair::PERFECT),
        );
        Ok(Some(VisibilityPair {
            rect: a.rect + f * (b.rect - a.rect),
            diag: a.diag + f * (b.diag - a.diag),
        }))
    }
}

impl Default for SourceCalibration {
    fn default() -> Self {
        Self::default_with_rate(DEFAULT_PEAK_PAIR_RATE)
    }
}

impl TryFrom<Vec<CalibrationAnchor>> for SourceCalibration {
    type Error = Error;

    fn try_from(anchors: Vec<CalibrationAnchor>) -> Result<Self> {
        Self::new(anchors)
    }
}

impl From<SourceCalibration> for Vec<CalibrationAnchor> {
    fn from(c: SourceCalibration) -> Self {
        c.anchors
    }
}

/// Statistical mixture of pure pair states emitted by the source.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceEnsemble {
    components: Vec<(f64, TwoPhotonState)>,
    pub pair_rate: f64,
}

impl SourceEnsemble {
    pub fn new(components: Vec<(f64, TwoPhotonState)>, pair_rate: f64) -> Result<Self> {
        let components: Vec<_> = components.into_iter().filter(|(w, _)| *w > 0.0).collect();
        if components.is_empty() {
            return Err(Error::Model("ensemble has no component of positive weight".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Model(format!("ensemble weights sum to {total}, not 1")));
        }
        let dim = components[0].1.dim();
        if components.iter().any(|(_, s)| s.dim() != dim) {
            return Err(Error::Model("ensemble components use different mode sets".into()));
        }
        if !(pair_rate >= 0.0) {
            return Err(Error::Model(format!("negative pair rate {pair_rate}")));
        }
        Ok(SourceEnsemble {
            components,
            pair_rate,
        })
    }

    pub fn components(&self) -> &[(f64, TwoPhotonState)] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The labeled pair `(|H⟩₊|V⟩₋ + e^{iφ}|V⟩₊|H⟩₋)/√2` on `path`.
pub fn labeled_exchange_state(modes: &ModeSet, path: &str, exchange_phase: f64) -> Result<TwoPhotonState> {
    let h = modes.mode(path, Polarization::H)?;
    let v = modes.mode(path, Polarization::V)?;
    let hv = make_pair_state(modes, h, v, true)?;
    let vh = make_pair_state(modes, v, h, true)?;
    superpose(&[
        (cx(1.0, 0.0), &hv),
        (Complex64::from_polar(1.0, exchange_phase), &vh),
    ])
}

/// Pair state mixture on `path` for explicit source parameters.
///
/// With a visibility pair `(v_rect, v_diag)`, the coherent mixture keeps
/// weight `v_diag`, an H/V-dephased labeled pair takes `v_rect − v_diag`
/// and polarization white noise takes `1 − v_rect`.
pub fn ensemble_for(
    modes: &ModeSet,
    path: &str,
    point: &SourcePoint,
    visibility: Option<VisibilityPair>,
) -> Result<SourceEnsemble> {
    let h = modes.mode(path, Polarization::H)?;
    let v = modes.mode(path, Polarization::V)?;
    let p = point.degeneracy_weight;
    let coherent = vec![
        (p, make_pair_state(modes, h, v, false)?),
        (1.0 - p, labeled_exchange_state(modes, path, point.exchange_phase)?),
    ];
    let components = match visibility {
        None => coherent,
        Some(vis) => {
            if vis.diag > vis.rect {
                return Err(Error::Domain(format!(
                    "diagonal visibility {} above rectilinear {} is not representable",
                    vis.diag, vis.rect
                )));
            }
            let mut out: Vec<_> = coherent
                .into_iter()
                .map(|(w, s)| (w * vis.diag, s))
                .collect();
            let dephased = (vis.rect - vis.diag) / 2.0;
            out.push((dephased, make_pair_state(modes, h, v, true)?));
            out.push((dephased, make_pair_state(modes, v, h, true)?));
            let noise = (1.0 - vis.rect) / 4.0;
            for (m1, m2) in [(h, h), (h, v), (v, h), (v, v)] {
                out.push((noise, make_pair_state(modes, m1, m2, true)?));
            }
            out
        }
    };
    SourceEnsemble::new(components, point.pair_rate)
}

/// Source output at `temperature_c`: identical-boson pairs with weight
/// `p_deg(T)` plus labeled pairs with exchange phase `φ_x(T)`, emitted into
/// `path`.
pub fn source_state(
    calibration: &SourceCalibration,
    temperature_c: f64,
    modes: &ModeSet,
    path: &str,
) -> Result<SourceEnsemble> {
    let point = calibration.at(temperature_c)?;
    ensemble_for(modes, path, &point, None)
}

/// Diagonal-basis correlation `E(π/8, π/8)` at each temperature, evaluated
/// through the full Bell-setup pipeline.
pub fn diagonal_correlation_curve(
    calibration: &SourceCalibration,
    temperatures: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let eighth = PI / 8.0;
    temperatures
        .iter()
        .map(|&t| {
            let setup = crate::setups::Setup::bell(eighth, eighth, Default::default())?;
            let ensemble = source_state(calibration, t, setup.modes(), crate::setups::SOURCE_PATH)?;
            let probs = setup.exact_rates(&ensemble, &[1.0; 4])?;
            Ok((t, probs.correlation()?))
        })
        .collect()
}

/// Closed form of the diagonal correlation: `−[p + (1 − p) cos φ_x]`.
pub fn diagonal_correlation_closed_form(point: &SourcePoint) -> f64 {
    -(point.degeneracy_weight + (1.0 - point.degeneracy_weight) * point.exchange_phase.cos())
}
