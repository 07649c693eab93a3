use serde::{Deserialize, Serialize};

use super::{BellRates, CoalescenceRates, CoincidenceReport};
use crate::error::{Error, Result};
use crate::predictions::{chsh_from_correlations, ChshSettings};

/// Settings below this separation are considered equal when looking up
/// CHSH points.
const SETTING_TOL: f64 = 1e-9;

const MIN_FIT_POINTS: usize = 5;

/// One point of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Scanned quantity in its natural unit: degrees for angles, °C for
    /// temperatures.
    pub x: f64,
    /// Alice's HWP (Bell) or the plate angle (coalescence), radians.
    pub alpha: Option<f64>,
    /// Bob's HWP, radians.
    pub beta: Option<f64>,
    pub temperature_c: f64,
    pub duration_s: f64,
    pub report: Option<CoincidenceReport>,
    /// Why this point has no report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScanPoint {
    fn bell(&self) -> Option<BellRates> {
        self.report.as_ref()?.total.rates.bell
    }

    fn coalescence(&self) -> Option<CoalescenceRates> {
        self.report.as_ref()?.total.rates.coalescence
    }

    /// Correlation of the point; `None` when undefined or missing.
    pub fn e(&self) -> Option<f64> {
        self.report.as_ref()?.total.e
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanSeries {
    pub points: Vec<ScanPoint>,
}

impl ScanSeries {
    pub fn new(points: Vec<ScanPoint>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| !(w[1].x > w[0].x)) {
            return Err(Error::config(format!(
                "scan settings must be strictly increasing ({} then {})",
                w[0].x, w[1].x
            )));
        }
        Ok(ScanSeries { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Functional form of a visibility fit; sets the angular frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitForm {
    DifferenceAngle,
    SumAngle,
    Doubles,
}

impl FitForm {
    fn frequency(self) -> f64 {
        match self {
            FitForm::DifferenceAngle | FitForm::SumAngle => 4.0,
            // cos²4θ = (1 + cos 8θ)/2
            FitForm::Doubles => 8.0,
        }
    }
}

/// Rate column fitted by [`fit_visibility`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateChannel {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
    DoublesA,
    DoublesB,
    R20Tr,
    R11T,
    R11R,
}

impl RateChannel {
    fn count(self, p: &ScanPoint) -> Option<f64> {
        use RateChannel::*;
        match self {
            PlusPlus | PlusMinus | MinusPlus | MinusMinus | DoublesA | DoublesB => {
                let b = p.bell()?;
                Some(match self {
                    PlusPlus => b.r_pp,
                    PlusMinus => b.r_pm,
                    MinusPlus => b.r_mp,
                    MinusMinus => b.r_mm,
                    DoublesA => b.r_aa,
                    _ => b.r_bb,
                })
            }
            R20Tr | R11T | R11R => {
                let c = p.coalescence()?;
                Some(match self {
                    R20Tr => c.r20_tr,
                    R11T => c.r11_t,
                    _ => c.r11_r,
                })
            }
        }
    }
}

/// Result of fitting `r(θ) = (r0/2)·[1 + V·cos(kθ + phase)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: f64,
    /// Rate normalisation, counts per second.
    pub r0: f64,
    pub phase: f64,
    pub rms_residual: f64,
    pub points: usize,
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn weighted_fit(data: &[(f64, f64, f64)], k: f64, weights: &[f64]) -> Option<[f64; 3]> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&(theta, y, _), &w) in data.iter().zip(weights) {
        let row = [1.0, (k * theta).cos(), (k * theta).sin()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
            aty[i] += w * row[i] * y;
        }
    }
    solve3(ata, aty)
}

fn model(c: &[f64; 3], k: f64, theta: f64) -> f64 {
    c[0] + c[1] * (k * theta).cos() + c[2] * (k * theta).sin()
}

/// Reweighting passes of the Poisson fit.
const REWEIGHT_PASSES: usize = 4;

/// Fits a sinusoid to one rate column against the scanned angle.
///
/// The angle is `beta` when present (fixed and twin scans), else `alpha`
/// (coalescence scans). Rates are counts divided by point duration. The
/// fit is least squares weighted by the Poisson variance of the model
/// counts (iteratively reweighted from an unweighted start), so points near
/// a dark fringe constrain the visibility as their small counts warrant.
/// The sign of the modulation is absorbed in `phase`, so `V ≥ 0`.
pub fn fit_visibility(series: &ScanSeries, form: FitForm, channel: RateChannel) -> Result<VisibilityFit> {
    let k = form.frequency();
    // (theta, rate, duration)
    let data: Vec<(f64, f64, f64)> = series
        .points
        .iter()
        .filter(|p| p.duration_s > 0.0)
        .filter_map(|p| {
            let theta = p.beta.or(p.alpha)?;
            Some((theta, channel.count(p)? / p.duration_s, p.duration_s))
        })
        .collect();
    if data.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "visibility fit needs {MIN_FIT_POINTS} points with data, got {}",
            data.len()
        )));
    }
    let singular = || Error::InsufficientData("scan angles do not determine the fit".into());
    let mut c = weighted_fit(&data, k, &vec![1.0; data.len()]).ok_or_else(singular)?;
    for _ in 0..REWEIGHT_PASSES {
        // rate variance = expected counts / duration², floored at one count
        let weights: Vec<f64> = data
            .iter()
            .map(|&(theta, _, d)| d * d / (model(&c, k, theta) * d).max(1.0))
            .collect();
        c = weighted_fit(&data, k, &weights).ok_or_else(singular)?;
    }
    let [c0, c1, c2] = c;
    let residual: f64 = data.iter().map(|&(theta, y, _)| (y - model(&c, k, theta)).powi(2)).sum();
    let amplitude = c1.hypot(c2);
    let visibility = if c0 > 0.0 { (amplitude / c0).clamp(0.0, 1.0) } else { 0.0 };
    Ok(VisibilityFit {
        visibility,
        r0: 2.0 * c0,
        phase: (-c2).atan2(c1),
        rms_residual: (residual / data.len() as f64).sqrt(),
        points: data.len(),
    })
}

/// CHSH value from measured correlations at the four setting pairs.
pub fn chsh_of(series: &ScanSeries, settings: ChshSettings) -> Result<f64> {
    let mut es = [0.0; 4];
    for (slot, (a, b)) in es.iter_mut().zip(settings.pairs()) {
        let point = series
            .points
            .iter()
            .find(|p| {
                matches!((p.alpha, p.beta), (Some(pa), Some(pb))
                    if (pa - a).abs() < SETTING_TOL && (pb - b).abs() < SETTING_TOL)
            })
            .ok_or_else(|| {
                Error::InsufficientData(format!(
                    "no scan point at (α, β) = ({:.4}°, {:.4}°)",
                    a.to_degrees(),
                    b.to_degrees()
                ))
            })?;
        *slot = point.e().ok_or(Error::UndefinedCorrelation)?;
    }
    let lookup = |a: f64, b: f64| {
        let i = settings
            .pairs()
            .iter()
            .position(|&(x, y)| x == a && y == b)
            .unwrap_or(0);
        es[i]
    };
    Ok(chsh_from_correlations(lookup, settings))
}
