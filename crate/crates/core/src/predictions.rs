//! Closed-form coincidence rates, correlations and CHSH values.
//!
//! Visibility enters as a damping of the modulated term. With `(v_rect,
//! v_diag)` the correlation kernel is
//! `K(α, β) = v_rect·cos4α·cos4β ± v_diag·sin4α·sin4β`, which reduces to
//! `cos 4(α ∓ β)` for perfect visibility; a fixed scan at `α = 0` is damped
//! by `v_rect` and one at `α = π/8` by `v_diag`.

use std::f64::consts::{FRAC_PI_8, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coincidence rates for (A⁺B⁺, A⁺B⁻, A⁻B⁺, A⁻B⁻).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateQuad {
    pub r_pp: f64,
    pub r_pm: f64,
    pub r_mp: f64,
    pub r_mm: f64,
}

impl RateQuad {
    pub fn new(r_pp: f64, r_pm: f64, r_mp: f64, r_mm: f64) -> Result<Self> {
        let q = RateQuad {
            r_pp,
            r_pm,
            r_mp,
            r_mm,
        };
        if q.as_array().iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Domain(format!("rates must be nonnegative: {q:?}")));
        }
        Ok(q)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.r_pp, self.r_pm, self.r_mp, self.r_mm]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPair {
    pub rect: f64,
    pub diag: f64,
}

impl VisibilityPair {
    pub const PERFECT: VisibilityPair = VisibilityPair { rect: 1.0, diag: 1.0 };

    pub fn new(rect: f64, diag: f64) -> Result<Self> {
        for v in [rect, diag] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("visibility {v} outside [0, 1]")));
            }
        }
        Ok(VisibilityPair { rect, diag })
    }
}

fn check_r0(r0: f64) -> Result<()> {
    if !(r0 >= 0.0) {
        return Err(Error::Domain(format!("rate normalisation {r0} must be nonnegative")));
    }
    Ok(())
}

fn quad_from_kernel(r0: f64, kernel: f64) -> RateQuad {
    let same = 0.25 * r0 * (1.0 - kernel);
    let opposite = 0.25 * r0 * (1.0 + kernel);
    RateQuad {
        r_pp: same,
        r_pm: opposite,
        r_mp: opposite,
        r_mm: same,
    }
}

/// Singlet coincidences: `r⁺⁺ = r⁻⁻ = (r0/2)·sin²2(α−β)`,
/// `r⁺⁻ = r⁻⁺ = (r0/2)·cos²2(α−β)` at perfect visibility.
pub fn singlet_rates(alpha: f64, beta: f64, r0: f64, vis: VisibilityPair) -> Result<RateQuad> {
    check_r0(r0)?;
    let (sa, ca) = (4.0 * alpha).sin_cos();
    let (sb, cb) = (4.0 * beta).sin_cos();
    Ok(quad_from_kernel(r0, vis.rect * ca * cb + vis.diag * sa * sb))
}

/// Coincidences depending on the sum `α+β`:
/// `r⁺⁺ = r⁻⁻ = (r0/2)·sin²2(α+β)` at perfect visibility.
pub fn sum_angle_rates(alpha: f64, beta: f64, r0: f64, vis: VisibilityPair) -> Result<RateQuad> {
    check_r0(r0)?;
    let (sa, ca) = (4.0 * alpha).sin_cos();
    let (sb, cb) = (4.0 * beta).sin_cos();
    Ok(quad_from_kernel(r0, vis.rect * ca * cb - vis.diag * sa * sb))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distinguishability {
    Indistinguishable,
    Distinguishable,
}

/// Double-count rate at one station during a twin scan at angle `theta`.
pub fn doubles_rate(theta: f64, r0: f64, mode: Distinguishability) -> Result<f64> {
    check_r0(r0)?;
    let c2 = (4.0 * theta).cos().powi(2);
    Ok(match mode {
        Distinguishability::Indistinguishable => 0.5 * r0 * c2,
        Distinguishability::Distinguishable => 0.25 * r0 * (1.0 + c2),
    })
}

/// `E = (r⁺⁺ − r⁺⁻ − r⁻⁺ + r⁻⁻) / (r⁺⁺ + r⁺⁻ + r⁻⁺ + r⁻⁻)`.
pub fn correlation(rates: &RateQuad) -> Result<f64> {
    let total = rates.total();
    if !(total > 0.0) {
        return Err(Error::UndefinedCorrelation);
    }
    let e = (rates.r_pp - rates.r_pm - rates.r_mp + rates.r_mm) / total;
    Ok(e.clamp(-1.0, 1.0))
}

/// CHSH value implied by a pair of visibilities: `2√2·(v_rect + v_diag)/2`.
pub fn chsh_from_visibility(vis: VisibilityPair) -> f64 {
    SQRT_2 * (vis.rect + vis.diag)
}

/// HWP settings `(a, a′, b, b′)` for a CHSH measurement, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for ChshSettings {
    fn default() -> Self {
        ChshSettings {
            a: 0.0,
            a_prime: FRAC_PI_8,
            b: FRAC_PI_8 / 2.0,
            b_prime: 3.0 * FRAC_PI_8 / 2.0,
        }
    }
}

impl ChshSettings {
    /// Bob's settings negated; optimal for sum-angle correlations.
    pub fn mirrored(self) -> Self {
        ChshSettings {
            b: -self.b,
            b_prime: -self.b_prime,
            ..self
        }
    }

    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]
    }
}

/// `S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|`.
pub fn chsh_from_correlations<F: Fn(f64, f64) -> f64>(e: F, settings: ChshSettings) -> f64 {
    let [ab, abp, apb, apbp] = settings.pairs().map(|(x, y)| e(x, y));
    (ab - abp + apb + apbp).abs()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, PI};

    use super::*;

    const R0: f64 = 1000.0;

    #[test]
    fn singlet_at_equal_angles() {
        let q = singlet_rates(0.3, 0.3, R0, VisibilityPair::PERFECT).unwrap();
        assert!(q.r_pp.abs() < 1e-9);
        assert!((q.r_pm - R0 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn singlet_at_eighth_offset_is_flat() {
        let q = singlet_rates(0.1, 0.1 - PI / 8.0, R0, VisibilityPair::PERFECT).unwrap();
        for r in q.as_array() {
            assert!((r - R0 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn singlet_matches_textbook_form() {
        for i in 0..90 {
            let beta = (i as f64).to_radians();
            let alpha = 0.37;
            let q = singlet_rates(alpha, beta, R0, VisibilityPair::PERFECT).unwrap();
            let d = 2.0 * (alpha - beta);
            assert!((q.r_pp - 0.5 * R0 * d.sin().powi(2)).abs() < 1e-9);
            assert!((q.r_pm - 0.5 * R0 * d.cos().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn rectilinear_fixed_scan_uses_rect_visibility() {
        let vis = VisibilityPair::new(0.996, 0.985).unwrap();
        let max = singlet_rates(0.0, 0.0, R0, vis).unwrap().r_pm;
        let min = singlet_rates(0.0, FRAC_PI_4, R0, vis).unwrap().r_pm;
        assert!(((max - min) / (max + min) - 0.996).abs() < 1e-12);
    }

    #[test]
    fn sum_angle_diagonal() {
        let q = sum_angle_rates(PI / 8.0, PI / 8.0, R0, VisibilityPair::PERFECT).unwrap();
        assert!((q.r_pp - R0 / 2.0).abs() < 1e-9);
        assert!(q.r_pm.abs() < 1e-9);
        let q0 = sum_angle_rates(0.0, 0.0, R0, VisibilityPair::PERFECT).unwrap();
        assert!(q0.r_pp.abs() < 1e-9);
        let vis = VisibilityPair::new(0.982, 0.877).unwrap();
        let max = sum_angle_rates(PI / 8.0, PI / 8.0, R0, vis).unwrap().r_pp;
        let min = sum_angle_rates(PI / 8.0, -PI / 8.0, R0, vis).unwrap().r_pp;
        assert!(((max - min) / (max + min) - 0.877).abs() < 1e-12);
    }

    #[test]
    fn doubles_law() {
        let ind = Distinguishability::Indistinguishable;
        let dis = Distinguishability::Distinguishable;
        assert!(doubles_rate(PI / 8.0, R0, ind).unwrap().abs() < 1e-9);
        assert!((doubles_rate(PI / 8.0, R0, dis).unwrap() - R0 / 4.0).abs() < 1e-9);
        assert!((doubles_rate(0.0, R0, ind).unwrap() - R0 / 2.0).abs() < 1e-9);
        assert!((doubles_rate(0.0, R0, dis).unwrap() - R0 / 2.0).abs() < 1e-9);
        for i in 0..360 {
            let t = (i as f64 * 0.25).to_radians();
            let a = doubles_rate(t, R0, ind).unwrap();
            let b = doubles_rate(t, R0, dis).unwrap();
            assert!(a <= 2.0 * b + 1e-9);
        }
        assert!(doubles_rate(0.0, -1.0, ind).is_err());
    }

    #[test]
    fn correlation_extremes_and_errors() {
        let anti = RateQuad::new(0.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(correlation(&anti).unwrap(), -1.0);
        let same = RateQuad::new(0.5, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(correlation(&same).unwrap(), 1.0);
        let zero = RateQuad::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(correlation(&zero), Err(Error::UndefinedCorrelation)));
        assert!(RateQuad::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(singlet_rates(0.0, 0.0, -1.0, VisibilityPair::PERFECT).is_err());
    }

    #[test]
    fn diagonal_correlation_equals_minus_visibility() {
        let vis = VisibilityPair::new(0.996, 0.985).unwrap();
        let q = singlet_rates(PI / 8.0, PI / 8.0, R0, vis).unwrap();
        assert!((correlation(&q).unwrap() + 0.985).abs() < 1e-12);
    }

    #[test]
    fn chsh_values() {
        let s = chsh_from_visibility(VisibilityPair::new(0.996, 0.985).unwrap());
        assert!((s - 2.80).abs() <= 0.005, "{s}");
        let s = chsh_from_visibility(VisibilityPair::new(0.982, 0.877).unwrap());
        assert!((s - 2.63).abs() <= 0.005, "{s}");
        assert!((chsh_from_visibility(VisibilityPair::PERFECT) - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn chsh_of_ideal_correlations() {
        let singlet = |a: f64, b: f64| -(4.0 * (a - b)).cos();
        let s = chsh_from_correlations(singlet, ChshSettings::default());
        assert!((s - 2.0 * SQRT_2).abs() < 1e-9);
        let sum = |a: f64, b: f64| {
            let q = sum_angle_rates(a, b, 1.0, VisibilityPair::PERFECT).unwrap();
            correlation(&q).unwrap()
        };
        let s = chsh_from_correlations(sum, ChshSettings::default().mirrored());
        assert!((s - 2.0 * SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn separable_models_respect_bound() {
        // E(a,b) = f(a)·g(b) with |f|,|g| <= 1 over a scan of local response functions
        let mut worst: f64 = 0.0;
        for k in 0..40 {
            let phase_a = k as f64 * 0.157;
            for j in 0..40 {
                let phase_b = j as f64 * 0.157;
                let e = |a: f64, b: f64| (4.0 * a + phase_a).cos() * (4.0 * b + phase_b).cos();
                worst = worst.max(chsh_from_correlations(e, ChshSettings::default()));
                worst = worst.max(chsh_from_correlations(e, ChshSettings::default().mirrored()));
            }
        }
        assert!(worst <= 2.0 + 1e-12, "{worst}");
    }
}
