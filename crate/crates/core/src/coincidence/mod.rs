//! Coincidence analysis of time-tag streams.
//!
//! Two clicks on different channels coincide when their offset-corrected
//! timestamps differ by at most half the window. Every such pair is counted
//! (all-pairs rule, no exclusive matching) and attributed to the bin of the
//! earlier corrected timestamp, so a coincidence straddling a bin edge is
//! counted once.

mod engine;
mod fit;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use engine::{count_coincidences, count_coincidences_parallel, CoincidenceCounter};
pub use fit::{chsh_of, fit_visibility, FitForm, RateChannel, ScanPoint, ScanSeries, VisibilityFit};

use crate::error::{Error, Result};

/// Detector role within an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "A+")]
    APlus,
    #[serde(rename = "A-")]
    AMinus,
    #[serde(rename = "B+")]
    BPlus,
    #[serde(rename = "B-")]
    BMinus,
    #[serde(rename = "A+t")]
    APlusT,
    #[serde(rename = "A+r")]
    APlusR,
}

impl Role {
    /// Canonical Bell-setup channel order.
    pub const BELL: [Role; 4] = [Role::APlus, Role::AMinus, Role::BPlus, Role::BMinus];
    /// Canonical coalescence-setup channel order.
    pub const COALESCENCE: [Role; 3] = [Role::APlusT, Role::APlusR, Role::AMinus];

    pub fn name(self) -> &'static str {
        match self {
            Role::APlus => "A+",
            Role::AMinus => "A-",
            Role::BPlus => "B+",
            Role::BMinus => "B-",
            Role::APlusT => "A+t",
            Role::APlusR => "A+r",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bell-setup coincidence rates; first sign is Alice's outcome.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BellRates {
    pub r_pp: f64,
    pub r_pm: f64,
    pub r_mp: f64,
    pub r_mm: f64,
    /// Doubles at Alice (A⁺ with A⁻).
    pub r_aa: f64,
    /// Doubles at Bob (B⁺ with B⁻).
    pub r_bb: f64,
}

impl BellRates {
    pub fn correlation(&self) -> Option<f64> {
        let total = self.r_pp + self.r_pm + self.r_mp + self.r_mm;
        (total > 0.0).then(|| ((self.r_pp + self.r_mm - self.r_pm - self.r_mp) / total).clamp(-1.0, 1.0))
    }

    pub fn ab_total(&self) -> f64 {
        self.r_pp + self.r_pm + self.r_mp + self.r_mm
    }
}

/// Coalescence-setup coincidence rates.
///
/// `r20_tr` only registers the half of the doubly-occupied transmitted
/// port events that the NPBS splits onto two detectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceRates {
    pub r20_tr: f64,
    pub r11_t: f64,
    pub r11_r: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleRates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bell: Option<BellRates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalescence: Option<CoalescenceRates>,
}

impl RoleRates {
    /// Builds role rates from a per-channel-pair lookup.
    pub fn from_pairs<F: Fn(u8, u8) -> f64>(roles: &[Role], pair: F) -> Self {
        let ch = |r: Role| roles.iter().position(|&x| x == r).map(|i| i as u8);
        let get = |a: Role, b: Role| -> Option<f64> { Some(pair(ch(a)?, ch(b)?)) };
        let bell = (|| {
            Some(BellRates {
                r_pp: get(Role::APlus, Role::BPlus)?,
                r_pm: get(Role::APlus, Role::BMinus)?,
                r_mp: get(Role::AMinus, Role::BPlus)?,
                r_mm: get(Role::AMinus, Role::BMinus)?,
                r_aa: get(Role::APlus, Role::AMinus)?,
                r_bb: get(Role::BPlus, Role::BMinus)?,
            })
        })();
        let coalescence = (|| {
            Some(CoalescenceRates {
                r20_tr: get(Role::APlusT, Role::APlusR)?,
                r11_t: get(Role::APlusT, Role::AMinus)?,
                r11_r: get(Role::APlusR, Role::AMinus)?,
            })
        })();
        RoleRates { bell, coalescence }
    }

    pub fn correlation(&self) -> Option<f64> {
        self.bell.as_ref().and_then(BellRates::correlation)
    }
}

fn default_window() -> u64 {
    2000
}

fn default_bin_length() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Full coincidence window width.
    #[serde(default = "default_window")]
    pub window_ps: u64,
    /// Per-channel timing offsets added to raw timestamps; empty means zero.
    #[serde(default)]
    pub offsets_ps: Vec<i64>,
    #[serde(default = "default_bin_length")]
    pub bin_length_s: f64,
    pub channel_roles: Vec<Role>,
}

impl AnalysisConfig {
    pub fn bell() -> Self {
        Self::with_roles(Role::BELL.to_vec())
    }

    pub fn coalescence() -> Self {
        Self::with_roles(Role::COALESCENCE.to_vec())
    }

    pub fn with_roles(channel_roles: Vec<Role>) -> Self {
        AnalysisConfig {
            window_ps: default_window(),
            offsets_ps: Vec::new(),
            bin_length_s: default_bin_length(),
            channel_roles,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channel_roles.len()
    }

    pub fn offset(&self, channel: usize) -> i64 {
        self.offsets_ps.get(channel).copied().unwrap_or(0)
    }

    pub fn bin_length_ps(&self) -> i64 {
        (self.bin_length_s * 1e12).round() as i64
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_ps == 0 {
            return Err(Error::config("coincidence window must be positive"));
        }
        if !(self.bin_length_s > 0.0) || self.bin_length_ps() < 1 || self.bin_length_s > 1e6 {
            return Err(Error::config(format!("bin length {} s out of range", self.bin_length_s)));
        }
        if !self.offsets_ps.is_empty() && self.offsets_ps.len() != self.channel_roles.len() {
            return Err(Error::config(format!(
                "{} offsets for {} channels",
                self.offsets_ps.len(),
                self.channel_roles.len()
            )));
        }
        if self.offsets_ps.iter().any(|o| o.unsigned_abs() > 1 << 50) {
            return Err(Error::config("channel offset too large"));
        }
        let mut sorted = self.channel_roles.clone();
        sorted.sort();
        let mut bell = Role::BELL.to_vec();
        bell.sort();
        let mut coal = Role::COALESCENCE.to_vec();
        coal.sort();
        if sorted != bell && sorted != coal {
            return Err(Error::config(format!(
                "channel roles {:?} are not a bijection onto the Bell or coalescence role set",
                self.channel_roles.iter().map(|r| r.name()).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }
}

/// Counts for one bin, or for the whole run when `bin` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub bin: Option<i64>,
    /// Start of the bin in corrected time, seconds.
    pub start_s: f64,
    pub singles: Vec<u64>,
    /// Symmetric channel-pair coincidence counts, zero diagonal.
    pub coincidences: Vec<Vec<u64>>,
    pub rates: RoleRates,
    pub e: Option<f64>,
    pub total_coincidences: u64,
}

impl BinReport {
    pub(crate) fn from_counts(bin: Option<i64>, start_s: f64, roles: &[Role], singles: &[u64], pairs: &[u64]) -> Self {
        let n = roles.len();
        let mut coincidences = vec![vec![0u64; n]; n];
        let mut total = 0;
        for i in 0..n {
            for j in i + 1..n {
                let c = pairs[i * n + j];
                coincidences[i][j] = c;
                coincidences[j][i] = c;
                total += c;
            }
        }
        let rates = RoleRates::from_pairs(roles, |a, b| coincidences[a as usize][b as usize] as f64);
        BinReport {
            bin,
            start_s,
            singles: singles.to_vec(),
            e: rates.correlation(),
            rates,
            coincidences,
            total_coincidences: total,
        }
    }

    pub fn coincidence(&self, a: u8, b: u8) -> u64 {
        self.coincidences[a as usize][b as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub config: AnalysisConfig,
    pub bins: Vec<BinReport>,
    pub total: BinReport,
}

impl CoincidenceReport {
    pub fn channel_count(&self) -> usize {
        self.config.channel_count()
    }
}

/// Correlation of the aggregated run; `None` when no A–B coincidences.
pub fn correlation_of(report: &CoincidenceReport) -> Option<f64> {
    report.total.e
}
