//! The two analyzer layouts: the Bell setup (NPBS dispatching pairs to two
//! HWP+PBS stations) and the single-station coalescence setup (plate, PBS,
//! and an NPBS on the transmitted port).

use serde::{Deserialize, Serialize};

use crate::coincidence::{Role, RoleRates};
use crate::error::{Error, Result};
use crate::optics::{build_circuit, ElementSpec, HwpConvention};
use crate::quantum::{
    apply_unitary, detected_click_pattern, outcome_distribution, ChannelMap, ClickDistribution,
    ModeSet, ModeUnitary,
};
use crate::source::SourceEnsemble;

/// Path on which the source emits its pairs.
pub const SOURCE_PATH: &str = "C";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetupKind {
    Bell,
    Coalescence,
}

/// Wave plate in front of the coalescence-setup PBS.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plate {
    #[default]
    Hwp,
    Qwp,
}

#[derive(Clone, Debug)]
pub struct Setup {
    kind: SetupKind,
    modes: ModeSet,
    circuit: ModeUnitary,
    channel_map: ChannelMap,
    roles: Vec<Role>,
}

impl Setup {
    /// Bell setup with Alice's HWP at `alpha` and Bob's at `beta` (radians).
    /// Channels: 0 = A⁺, 1 = A⁻, 2 = B⁺, 3 = B⁻.
    pub fn bell(alpha: f64, beta: f64, convention: HwpConvention) -> Result<Self> {
        let modes = ModeSet::new(&[SOURCE_PATH, "a", "b", "A+", "A-", "B+", "B-"])?;
        let specs = [
            ElementSpec::npbs(SOURCE_PATH, "a", "b"),
            ElementSpec::hwp("a", alpha.to_degrees()),
            ElementSpec::pbs("a", "A+", "A-"),
            ElementSpec::hwp("b", beta.to_degrees()),
            ElementSpec::pbs("b", "B+", "B-"),
        ];
        let circuit = build_circuit(&modes, &specs, convention)?;
        let channel_map = ChannelMap::by_path(&modes, &[("A+", 0), ("A-", 1), ("B+", 2), ("B-", 3)])?;
        Ok(Setup {
            kind: SetupKind::Bell,
            modes,
            circuit,
            channel_map,
            roles: Role::BELL.to_vec(),
        })
    }

    /// Coalescence setup with the plate at `theta` (radians).
    /// Channels: 0 = A⁺_t, 1 = A⁺_r, 2 = A⁻.
    pub fn coalescence(theta: f64, plate: Plate, convention: HwpConvention) -> Result<Self> {
        let modes = ModeSet::new(&[SOURCE_PATH, "T", "A-", "A+t", "A+r"])?;
        let plate_spec = match plate {
            Plate::Hwp => ElementSpec::hwp(SOURCE_PATH, theta.to_degrees()),
            Plate::Qwp => ElementSpec::qwp(SOURCE_PATH, theta.to_degrees()),
        };
        let specs = [
            plate_spec,
            ElementSpec::pbs(SOURCE_PATH, "T", "A-"),
            ElementSpec::npbs("T", "A+t", "A+r"),
        ];
        let circuit = build_circuit(&modes, &specs, convention)?;
        let channel_map = ChannelMap::by_path(&modes, &[("A+t", 0), ("A+r", 1), ("A-", 2)])?;
        Ok(Setup {
            kind: SetupKind::Coalescence,
            modes,
            circuit,
            channel_map,
            roles: Role::COALESCENCE.to_vec(),
        })
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn circuit(&self) -> &ModeUnitary {
        &self.circuit
    }

    pub fn channel_map(&self) -> &ChannelMap {
        &self.channel_map
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn channel_count(&self) -> usize {
        self.roles.len()
    }

    /// Click-pattern probabilities per emitted pair, mixture-averaged, with
    /// per-channel detection efficiencies.
    pub fn click_distribution(
        &self,
        ensemble: &SourceEnsemble,
        efficiencies: &[f64],
    ) -> Result<ClickDistribution> {
        if ensemble.dim() != self.modes.dim() {
            return Err(Error::config("source ensemble does not match setup mode set"));
        }
        let mut total = ClickDistribution::new();
        for (weight, state) in ensemble.components() {
            let evolved = apply_unitary(state, &self.circuit)?;
            let dist = outcome_distribution(&evolved);
            for (pattern, p) in detected_click_pattern(&dist, &self.channel_map, efficiencies)? {
                *total.entry(pattern).or_insert(0.0) += weight * p;
            }
        }
        Ok(total)
    }

    /// Exact per-pair click and coincidence probabilities.
    pub fn exact_rates(&self, ensemble: &SourceEnsemble, efficiencies: &[f64]) -> Result<PairProbabilities> {
        let dist = self.click_distribution(ensemble, efficiencies)?;
        Ok(PairProbabilities::from_patterns(&dist, &self.roles))
    }
}

/// Probabilities per emitted pair of each single click and each two-channel
/// coincidence. Multiply by a pair rate to obtain expected rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairProbabilities {
    pub singles: Vec<f64>,
    /// Upper-triangular coincidence probabilities, `pairs[i * n + j]`, `i < j`.
    pub pairs: Vec<f64>,
    pub roles: Vec<Role>,
}

impl PairProbabilities {
    pub fn from_patterns(dist: &ClickDistribution, roles: &[Role]) -> Self {
        let n = roles.len();
        let mut singles = vec![0.0; n];
        let mut pairs = vec![0.0; n * n];
        for (pattern, &p) in dist {
            let chans: Vec<u8> = pattern.channels().filter(|&c| (c as usize) < n).collect();
            for (k, &i) in chans.iter().enumerate() {
                singles[i as usize] += p;
                for &j in &chans[k + 1..] {
                    pairs[i as usize * n + j as usize] += p;
                }
            }
        }
        PairProbabilities {
            singles,
            pairs,
            roles: roles.to_vec(),
        }
    }

    pub fn coincidence(&self, a: u8, b: u8) -> f64 {
        let n = self.roles.len();
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.pairs[i as usize * n + j as usize]
    }

    pub fn role_rates(&self) -> RoleRates {
        RoleRates::from_pairs(&self.roles, |a, b| self.coincidence(a, b))
    }

    /// Correlation of the A–B coincidence probabilities.
    pub fn correlation(&self) -> Result<f64> {
        self.role_rates()
            .correlation()
            .ok_or(Error::UndefinedCorrelation)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PairProbabilities {
            singles: self.singles.iter().map(|x| x * factor).collect(),
            pairs: self.pairs.iter().map(|x| x * factor).collect(),
            roles: self.roles.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::quantum::ALGEBRA_TOL;
    use crate::source::{source_state, SourceCalibration};

    #[test]
    fn bell_optimum_rectilinear_anticorrelation() {
        let setup = Setup::bell(0.0, 0.0, HwpConvention::Paper).unwrap();
        let e = source_state(&SourceCalibration::default(), 35.1, setup.modes(), SOURCE_PATH).unwrap();
        let p = setup.exact_rates(&e, &[1.0; 4]).unwrap();
        let r = p.role_rates().bell.unwrap();
        assert!((r.r_pm - 0.25).abs() < ALGEBRA_TOL);
        assert!((r.r_mp - 0.25).abs() < ALGEBRA_TOL);
        assert!(r.r_pp.abs() < ALGEBRA_TOL && r.r_mm.abs() < ALGEBRA_TOL);
        // both photons at one station: HV pair through PBS, always a double
        assert!((r.r_aa - 0.25).abs() < ALGEBRA_TOL);
        assert!((p.correlation().unwrap() + 1.0).abs() < ALGEBRA_TOL);
    }

    #[test]
    fn click_distribution_sums_to_one_with_losses() {
        let setup = Setup::bell(0.3, 1.1, HwpConvention::Paper).unwrap();
        let e = source_state(&SourceCalibration::default(), 30.0, setup.modes(), SOURCE_PATH).unwrap();
        let d = setup.click_distribution(&e, &[0.6, 0.5, 0.7, 0.4]).unwrap();
        let total: f64 = d.values().sum();
        assert!((total - 1.0).abs() < ALGEBRA_TOL);
    }

    #[test]
    fn coalescence_diagonal_bunching() {
        let setup = Setup::coalescence(PI / 8.0, Plate::Hwp, HwpConvention::Paper).unwrap();
        let e = source_state(&SourceCalibration::default(), 35.1, setup.modes(), SOURCE_PATH).unwrap();
        let r = setup.exact_rates(&e, &[1.0; 3]).unwrap().role_rates().coalescence.unwrap();
        // half of all pairs bunch in the transmitted port; the NPBS splits half of those
        assert!((r.r20_tr - 0.25).abs() < ALGEBRA_TOL);
        assert!(r.r11_t.abs() < ALGEBRA_TOL && r.r11_r.abs() < ALGEBRA_TOL);
    }
}
