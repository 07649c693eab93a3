//! Experiment drivers: fixed scans, twin scans, temperature sweeps,
//! coalescence scans and CHSH runs, configured by one JSON document.
//!
//! Each scan point is simulated with its own seed derived from the run seed
//! and the point index, so points can run in parallel and results do not
//! depend on scheduling.

mod output;

use std::f64::consts::FRAC_PI_8;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{bins_csv, scan_csv, BINS_CSV_COLUMNS, SCAN_CSV_COLUMNS};

use crate::coincidence::{
    count_coincidences, fit_visibility, AnalysisConfig, CoincidenceReport, FitForm, RateChannel,
    RoleRates, ScanPoint, ScanSeries, VisibilityFit,
};
use crate::error::{Error, Result};
use crate::optics::HwpConvention;
use crate::predictions::{chsh_from_correlations, ChshSettings, VisibilityPair};
use crate::setups::{Plate, Setup, SOURCE_PATH};
use crate::source::{ensemble_for, SourceCalibration, OPTIMUM_TEMPERATURE_C};
use crate::timetag::{generate_stream, read_ttag, write_ttag, DetectorModel, SimRun, TimeTagRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FixedScan,
    TwinScan,
    TemperatureSweep,
    CoalescenceScan,
    Chsh,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_temperature() -> f64 {
    OPTIMUM_TEMPERATURE_C
}

fn default_duration() -> f64 {
    1.0
}

fn default_window() -> u64 {
    2000
}

fn default_bin_length() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    #[serde(default = "default_window")]
    pub window_ps: u64,
    #[serde(default)]
    pub offsets_ps: Vec<i64>,
    #[serde(default = "default_bin_length")]
    pub bin_length_s: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            window_ps: default_window(),
            offsets_ps: Vec::new(),
            bin_length_s: default_bin_length(),
        }
    }
}

impl AnalysisSettings {
    pub fn for_setup(&self, setup: &Setup) -> AnalysisConfig {
        AnalysisConfig {
            window_ps: self.window_ps,
            offsets_ps: self.offsets_ps.clone(),
            bin_length_s: self.bin_length_s,
            channel_roles: setup.roles().to_vec(),
        }
    }
}

/// CHSH settings in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshSettingsDeg {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl From<ChshSettingsDeg> for ChshSettings {
    fn from(d: ChshSettingsDeg) -> Self {
        ChshSettings {
            a: d.a.to_radians(),
            a_prime: d.a_prime.to_radians(),
            b: d.b.to_radians(),
            b_prime: d.b_prime.to_radians(),
        }
    }
}

impl From<ChshSettings> for ChshSettingsDeg {
    fn from(s: ChshSettings) -> Self {
        ChshSettingsDeg {
            a: s.a.to_degrees(),
            a_prime: s.a_prime.to_degrees(),
            b: s.b.to_degrees(),
            b_prime: s.b_prime.to_degrees(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Directory receiving one TTAG file per scan point.
    #[serde(default)]
    pub ttag_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    /// Source calibration anchors; the built-in calibration when absent.
    #[serde(default)]
    pub calibration: Option<SourceCalibration>,
    #[serde(default = "default_temperature")]
    pub temperature_c: f64,
    /// Scanned angles: β for fixed scans, θ for twin and coalescence scans.
    #[serde(default)]
    pub angles_deg: Vec<f64>,
    #[serde(default)]
    pub temperatures_c: Vec<f64>,
    /// Alice's angle during a fixed scan.
    #[serde(default)]
    pub fixed_alpha_deg: f64,
    #[serde(default)]
    pub plate: Plate,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    /// When set, each point runs long enough to emit this many pairs on
    /// average, overriding `duration_s`.
    #[serde(default)]
    pub pairs_per_point: Option<f64>,
    #[serde(default)]
    pub detector: DetectorModel,
    /// Per-channel detector models overriding `detector`.
    #[serde(default)]
    pub detectors: Option<Vec<DetectorModel>>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    /// Visibility damping `(rect, diag)` applied to the source.
    #[serde(default)]
    pub visibility: Option<VisibilityPair>,
    #[serde(default)]
    pub hwp_convention: HwpConvention,
    /// CHSH settings; chosen from the source regime when absent.
    #[serde(default)]
    pub chsh_settings_deg: Option<ChshSettingsDeg>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    /// Minimal configuration of the given kind with default settings.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            calibration: None,
            temperature_c: OPTIMUM_TEMPERATURE_C,
            angles_deg: Vec::new(),
            temperatures_c: Vec::new(),
            fixed_alpha_deg: 0.0,
            plate: Plate::Hwp,
            duration_s: 1.0,
            pairs_per_point: None,
            detector: DetectorModel::default(),
            detectors: None,
            analysis: AnalysisSettings::default(),
            visibility: None,
            hwp_convention: HwpConvention::Paper,
            chsh_settings_deg: None,
            seed: 0,
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn calibration(&self) -> SourceCalibration {
        self.calibration.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::config(format!("duration_s {} must be positive", self.duration_s)));
        }
        if let Some(p) = self.pairs_per_point {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::config(format!("pairs_per_point {p} must be positive")));
            }
        }
        let grid = match self.experiment {
            ExperimentKind::FixedScan | ExperimentKind::TwinScan | ExperimentKind::CoalescenceScan => {
                Some(("angles_deg", &self.angles_deg))
            }
            ExperimentKind::TemperatureSweep => Some(("temperatures_c", &self.temperatures_c)),
            ExperimentKind::Chsh => None,
        };
        if let Some((name, g)) = grid {
            if g.is_empty() {
                return Err(Error::config(format!("{name} must not be empty")));
            }
            if g.iter().any(|x| !x.is_finite()) || g.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config(format!("{name} must be strictly increasing")));
            }
        }
        if let Some(v) = self.visibility {
            let v = VisibilityPair::new(v.rect, v.diag)?;
            if v.diag > v.rect {
                return Err(Error::config(format!(
                    "visibility.diag {} above visibility.rect {} is not supported",
                    v.diag, v.rect
                )));
            }
        }
        self.detector.validate()?;
        for d in self.detectors.iter().flatten() {
            d.validate()?;
        }
        let probe = self.setup_for(0.0, 0.0)?;
        self.detector_models(&probe)?;
        self.analysis.for_setup(&probe).validate()?;
        Ok(())
    }

    /// Source damping at `temperature_c`: the configured `visibility` when
    /// set, else the calibration's anchor visibility.
    fn source_visibility(&self, temperature_c: f64) -> Result<Option<VisibilityPair>> {
        match self.visibility {
            Some(v) => Ok(Some(v)),
            None => self.calibration().visibility_at(temperature_c),
        }
    }

    fn setup_for(&self, alpha: f64, beta: f64) -> Result<Setup> {
        match self.experiment {
            ExperimentKind::CoalescenceScan => Setup::coalescence(alpha, self.plate, self.hwp_convention),
            _ => Setup::bell(alpha, beta, self.hwp_convention),
        }
    }

    fn detector_models(&self, setup: &Setup) -> Result<Vec<DetectorModel>> {
        let n = setup.channel_count();
        match &self.detectors {
            None => Ok(vec![self.detector; n]),
            Some(d) if d.len() == n => Ok(d.clone()),
            Some(d) => Err(Error::config(format!("{} detector models for {n} channels", d.len()))),
        }
    }

    /// Settings of every point: (x, α, β, T).
    fn grid(&self) -> Result<Vec<PointSettings>> {
        let t = self.temperature_c;
        Ok(match self.experiment {
            ExperimentKind::FixedScan => {
                let a = self.fixed_alpha_deg.to_radians();
                self.angles_deg
                    .iter()
                    .map(|&b| PointSettings::new(b, Some(a), Some(b.to_radians()), t))
                    .collect()
            }
            ExperimentKind::TwinScan => self
                .angles_deg
                .iter()
                .map(|&th| PointSettings::new(th, Some(th.to_radians()), Some(th.to_radians()), t))
                .collect(),
            ExperimentKind::CoalescenceScan => self
                .angles_deg
                .iter()
                .map(|&th| PointSettings::new(th, Some(th.to_radians()), None, t))
                .collect(),
            ExperimentKind::TemperatureSweep => self
                .temperatures_c
                .iter()
                .map(|&tc| PointSettings::new(tc, Some(FRAC_PI_8), Some(FRAC_PI_8), tc))
                .collect(),
            ExperimentKind::Chsh => {
                let s = self.chsh_settings()?;
                s.pairs()
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b))| PointSettings::new(i as f64, Some(a), Some(b), t))
                    .collect()
            }
        })
    }

    /// Explicit settings, else the textbook optimum mirrored when that gives
    /// the larger predicted violation for this source.
    pub fn chsh_settings(&self) -> Result<ChshSettings> {
        if let Some(s) = self.chsh_settings_deg {
            return Ok(s.into());
        }
        let plain = ChshSettings::default();
        let mirrored = plain.mirrored();
        if self.predicted_chsh(mirrored)? > self.predicted_chsh(plain)? {
            Ok(mirrored)
        } else {
            Ok(plain)
        }
    }

    /// CHSH value of the exact (lossless, noiseless-detector) model.
    pub fn predicted_chsh(&self, settings: ChshSettings) -> Result<f64> {
        let point = self.calibration().at(self.temperature_c)?;
        let mut es = [0.0; 4];
        for (slot, (a, b)) in es.iter_mut().zip(settings.pairs()) {
            let setup = Setup::bell(a, b, self.hwp_convention)?;
            let ens = ensemble_for(setup.modes(), SOURCE_PATH, &point, self.source_visibility(self.temperature_c)?)?;
            *slot = setup.exact_rates(&ens, &[1.0; 4])?.correlation()?;
        }
        let pairs = settings.pairs();
        Ok(chsh_from_correlations(
            |a, b| es[pairs.iter().position(|&p| p == (a, b)).unwrap_or(0)],
            settings,
        ))
    }
}

#[derive(Clone, Copy, Debug)]
struct PointSettings {
    x: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    temperature_c: f64,
}

impl PointSettings {
    fn new(x: f64, alpha: Option<f64>, beta: Option<f64>, temperature_c: f64) -> Self {
        PointSettings {
            x,
            alpha,
            beta,
            temperature_c,
        }
    }
}

/// Expected rates per second for one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub singles: Vec<f64>,
    pub rates: RoleRates,
    pub e: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub channel: RateChannel,
    pub form: FitForm,
    pub fit: VisibilityFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub settings_deg: ChshSettingsDeg,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub series: ScanSeries,
    /// Overlay: exact model scaled by pair rate, including detection
    /// efficiency, window acceptance for the detector jitter and
    /// accidental coincidences.
    pub predicted: Vec<Option<Prediction>>,
    pub fits: Vec<NamedFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chsh: Option<ChshResult>,
}

/// Seed for point `index` of a run seeded with `seed`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(index as u64))
}

/// One simulated point with its click stream.
pub struct SimulatedPoint {
    pub setup: Setup,
    pub duration_s: f64,
    pub stream: Vec<TimeTagRecord>,
    pub prediction: Prediction,
}

fn window_acceptance(window_ps: u64, a: &DetectorModel, b: &DetectorModel) -> f64 {
    let sigma = a.jitter_sigma_ps.hypot(b.jitter_sigma_ps);
    if sigma == 0.0 {
        return 1.0;
    }
    libm::erf(window_ps as f64 / 2.0 / (sigma * std::f64::consts::SQRT_2))
}

fn predict(
    cfg: &ExperimentConfig,
    setup: &Setup,
    ensemble: &crate::source::SourceEnsemble,
    detectors: &[DetectorModel],
) -> Result<Prediction> {
    let effs: Vec<f64> = detectors.iter().map(|d| d.efficiency).collect();
    let probs = setup.exact_rates(ensemble, &effs)?.scaled(ensemble.pair_rate);
    let n = setup.channel_count();
    let singles: Vec<f64> = (0..n).map(|c| probs.singles[c] + detectors[c].dark_rate).collect();
    let window_s = cfg.analysis.window_ps as f64 * 1e-12;
    let pair = |a: u8, b: u8| {
        let (da, db) = (&detectors[a as usize], &detectors[b as usize]);
        let true_rate = probs.coincidence(a, b) * window_acceptance(cfg.analysis.window_ps, da, db);
        // uncorrelated clicks on the two channels
        let sa = singles[a as usize] - probs.coincidence(a, b);
        let sb = singles[b as usize] - probs.coincidence(a, b);
        true_rate + sa.max(0.0) * sb.max(0.0) * window_s
    };
    let rates = RoleRates::from_pairs(setup.roles(), pair);
    Ok(Prediction {
        singles,
        e: rates.correlation(),
        rates,
    })
}

fn simulate_settings(cfg: &ExperimentConfig, index: usize, s: PointSettings) -> Result<SimulatedPoint> {
    let setup = cfg.setup_for(s.alpha.unwrap_or(0.0), s.beta.unwrap_or(0.0))?;
    let point = cfg.calibration().at(s.temperature_c)?;
    let ensemble = ensemble_for(setup.modes(), SOURCE_PATH, &point, cfg.source_visibility(s.temperature_c)?)?;
    let duration_s = match cfg.pairs_per_point {
        Some(n) if point.pair_rate > 0.0 => n / point.pair_rate,
        Some(_) => {
            return Err(Error::config(format!(
                "pairs_per_point set but pair rate at {} °C is zero",
                s.temperature_c
            )))
        }
        None => cfg.duration_s,
    };
    let detectors = cfg.detector_models(&setup)?;
    let run = SimRun {
        duration_s,
        seed: point_seed(cfg.seed, index),
        pair_rate: point.pair_rate,
    };
    let stream = generate_stream(&ensemble, setup.circuit(), setup.channel_map(), &run, &detectors)?;
    let prediction = predict(cfg, &setup, &ensemble, &detectors)?;
    Ok(SimulatedPoint {
        setup,
        duration_s,
        stream,
        prediction,
    })
}

/// Simulates point `index` of the configured scan without analysing it.
pub fn simulate_point(cfg: &ExperimentConfig, index: usize) -> Result<SimulatedPoint> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let s = *grid
        .get(index)
        .ok_or_else(|| Error::config(format!("point {index} outside grid of {} points", grid.len())))?;
    simulate_settings(cfg, index, s)
}

fn with_point(index: usize, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("point {index}: {m}")),
        Error::Domain(m) => Error::Domain(format!("point {index}: {m}")),
        other => other,
    }
}

struct PointOutcome {
    point: ScanPoint,
    prediction: Option<Prediction>,
}

fn run_point(cfg: &ExperimentConfig, index: usize, s: PointSettings) -> Result<PointOutcome> {
    let sim = simulate_settings(cfg, index, s)?;
    let analysis = cfg.analysis.for_setup(&sim.setup);
    let report = count_coincidences(&sim.stream, &analysis)?;
    if let Some(dir) = &cfg.output.ttag_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("point_{index:04}.ttag"));
        write_ttag(&sim.stream, sim.setup.channel_count() as u16, path)?;
    }
    Ok(PointOutcome {
        point: ScanPoint {
            x: s.x,
            alpha: s.alpha,
            beta: s.beta,
            temperature_c: s.temperature_c,
            duration_s: sim.duration_s,
            report: Some(report),
            error: None,
        },
        prediction: Some(sim.prediction),
    })
}

fn fits_for(cfg: &ExperimentConfig, series: &ScanSeries) -> Vec<NamedFit> {
    let bell_form = || -> FitForm {
        match cfg.calibration().at(cfg.temperature_c) {
            Ok(p) if p.degeneracy_weight < 0.5 => FitForm::SumAngle,
            _ => FitForm::DifferenceAngle,
        }
    };
    let wanted: Vec<(RateChannel, FitForm)> = match cfg.experiment {
        ExperimentKind::FixedScan => [
            RateChannel::PlusPlus,
            RateChannel::PlusMinus,
            RateChannel::MinusPlus,
            RateChannel::MinusMinus,
        ]
        .iter()
        .map(|&c| (c, bell_form()))
        .collect(),
        ExperimentKind::TwinScan => vec![
            (RateChannel::DoublesA, FitForm::Doubles),
            (RateChannel::DoublesB, FitForm::Doubles),
        ],
        ExperimentKind::CoalescenceScan => vec![
            (RateChannel::R20Tr, FitForm::Doubles),
            (RateChannel::R11T, FitForm::Doubles),
            (RateChannel::R11R, FitForm::Doubles),
        ],
        ExperimentKind::TemperatureSweep | ExperimentKind::Chsh => vec![],
    };
    wanted
        .into_iter()
        .filter_map(|(channel, form)| {
            fit_visibility(series, form, channel)
                .ok()
                .map(|fit| NamedFit { channel, form, fit })
        })
        .collect()
}

/// Runs the configured experiment.
///
/// Errors at any point abort fixed, twin, coalescence and CHSH runs; a
/// temperature sweep records the error on the point and continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let tolerant = cfg.experiment == ExperimentKind::TemperatureSweep;
    let outcomes: Vec<PointOutcome> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &s)| match run_point(cfg, i, s) {
            Ok(o) => Ok(o),
            Err(e) if tolerant => Ok(PointOutcome {
                point: ScanPoint {
                    x: s.x,
                    alpha: s.alpha,
                    beta: s.beta,
                    temperature_c: s.temperature_c,
                    duration_s: 0.0,
                    report: None,
                    error: Some(e.to_string()),
                },
                prediction: None,
            }),
            Err(e) => Err(with_point(i, e)),
        })
        .collect::<Result<_>>()?;
    let (points, predicted): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.point, o.prediction)).unzip();
    let series = ScanSeries::new(points)?;
    let fits = fits_for(cfg, &series);
    let chsh = if cfg.experiment == ExperimentKind::Chsh {
        let settings = cfg.chsh_settings()?;
        Some(ChshResult {
            settings_deg: settings.into(),
            measured: crate::coincidence::chsh_of(&series, settings)?,
            predicted: cfg.predicted_chsh(settings)?,
        })
    } else {
        None
    };
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.experiment,
        seed: cfg.seed,
        series,
        predicted,
        fits,
        chsh,
    })
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::config(format!(
            "configuration is for {:?}, not {kind:?}",
            cfg.experiment
        )));
    }
    Ok(())
}

pub fn run_fixed_scan(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::FixedScan)?;
    run_experiment(cfg)
}

pub fn run_twin_scan(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::TwinScan)?;
    run_experiment(cfg)
}

pub fn run_temperature_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::TemperatureSweep)?;
    run_experiment(cfg)
}

pub fn run_coalescence_scan(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::CoalescenceScan)?;
    run_experiment(cfg)
}

pub fn run_chsh(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(cfg, ExperimentKind::Chsh)?;
    run_experiment(cfg)
}

/// Re-analyses a stored TTAG file.
pub fn analyze_file(path: impl AsRef<Path>, config: &AnalysisConfig) -> Result<CoincidenceReport> {
    let (header, records) = read_ttag(path)?;
    if usize::from(header.channel_count) > config.channel_count() {
        return Err(Error::config(format!(
            "file has {} channels but {} roles are configured",
            header.channel_count,
            config.channel_count()
        )));
    }
    count_coincidences(&records, config)
}

/// Writes the configured CSV and JSON outputs of a result.
pub fn write_outputs(result: &ExperimentResult, paths: &OutputPaths) -> Result<()> {
    if let Some(p) = &paths.csv {
        std::fs::write(p, scan_csv(result))?;
    }
    if let Some(p) = &paths.json {
        let text = serde_json::to_string_pretty(result).map_err(|e| Error::Io(e.into()))?;
        std::fs::write(p, text + "\n")?;
    }
    Ok(())
}
