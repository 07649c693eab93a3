//! `hvpair`: simulate, analyse and scan two-photon polarization experiments.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hvpair::coincidence::{count_coincidences, AnalysisConfig, CoincidenceReport, Role};
use hvpair::experiment::{
    analyze_file, bins_csv, run_experiment, scan_csv, simulate_point, write_outputs, ExperimentConfig,
    ExperimentKind, ExperimentResult, OutputPaths,
};
use hvpair::timetag::{decode, write_ttag};
use hvpair::{Error, Result};

#[derive(Parser)]
#[command(name = "hvpair", version, about = "Two-photon polarization experiment simulator and time-tag analyser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scan point and write its click stream as a TTAG file.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Index of the scan point to simulate.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Kind used when no config is given.
        #[arg(long, value_enum, default_value_t = ScanKind::Fixed)]
        kind: ScanKind,
    },
    /// Count coincidences in a TTAG file (`-` reads standard input).
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Channel-role layout; taken from the config when given.
        #[arg(long, value_enum)]
        roles: Option<RoleSet>,
        /// Per-channel delay corrections, comma separated, picoseconds.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        offsets_ps: Option<Vec<i64>>,
        #[arg(long)]
        bin_length_s: Option<f64>,
    },
    /// Run a scan and write its series, predictions and fits.
    Scan {
        #[arg(value_enum)]
        kind: ScanKind,
        #[command(flatten)]
        common: Common,
    },
    /// Summarise a scan result JSON file.
    Report {
        result: PathBuf,
        /// Print the scan table as CSV instead of text.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coincidence window, picoseconds.
    #[arg(long)]
    window_ps: Option<u64>,
    /// Acquisition time per point, seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Output file (simulate) or directory (analyze, scan). Standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScanKind {
    Fixed,
    Twin,
    Temperature,
    Coalescence,
    Chsh,
}

impl From<ScanKind> for ExperimentKind {
    fn from(k: ScanKind) -> Self {
        match k {
            ScanKind::Fixed => ExperimentKind::FixedScan,
            ScanKind::Twin => ExperimentKind::TwinScan,
            ScanKind::Temperature => ExperimentKind::TemperatureSweep,
            ScanKind::Coalescence => ExperimentKind::CoalescenceScan,
            ScanKind::Chsh => ExperimentKind::Chsh,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleSet {
    Bell,
    Coalescence,
}

/// Built-in configuration: 0..90° in 5° steps, or the calibration anchors
/// for a temperature sweep.
fn default_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    match kind {
        ExperimentKind::TemperatureSweep => {
            cfg.temperatures_c = cfg.calibration().anchors().iter().map(|a| a.temperature_c).collect();
        }
        ExperimentKind::Chsh => {}
        _ => cfg.angles_deg = (0..=18).map(|k| k as f64 * 5.0).collect(),
    }
    cfg
}

fn load_config(common: &Common, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => default_config(kind.unwrap_or(ExperimentKind::FixedScan)),
    };
    if let Some(kind) = kind {
        if cfg.experiment != kind {
            return Err(Error::Config(format!(
                "config describes a {:?} experiment, not {kind:?}",
                cfg.experiment
            )));
        }
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.window_ps {
        cfg.analysis.window_ps = w;
    }
    if let Some(d) = common.duration_s {
        cfg.duration_s = d;
        cfg.pairs_per_point = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.into()))
}

fn stdout(text: &str) -> Result<()> {
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn simulate(common: &Common, point: usize, kind: ScanKind) -> Result<()> {
    let kind = common.config.is_none().then_some(kind.into());
    let cfg = load_config(common, kind)?;
    let sim = simulate_point(&cfg, point)?;
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("simulate needs --out FILE".into()))?;
    write_ttag(&sim.stream, sim.setup.channel_count() as u16, out)?;
    eprintln!(
        "wrote {} records ({:.3} s) to {}",
        sim.stream.len(),
        sim.duration_s,
        out.display()
    );
    Ok(())
}

fn analysis_config(
    common: &Common,
    roles: Option<RoleSet>,
    offsets: Option<Vec<i64>>,
    bin_length_s: Option<f64>,
) -> Result<AnalysisConfig> {
    let (settings, coalescence) = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            (cfg.analysis, cfg.experiment == ExperimentKind::CoalescenceScan)
        }
        None => (Default::default(), false),
    };
    let coalescence = match roles {
        Some(r) => matches!(r, RoleSet::Coalescence),
        None => coalescence,
    };
    let mut cfg = AnalysisConfig::with_roles(if coalescence { Role::COALESCENCE.to_vec() } else { Role::BELL.to_vec() });
    cfg.window_ps = common.window_ps.unwrap_or(settings.window_ps);
    cfg.offsets_ps = offsets.unwrap_or(settings.offsets_ps);
    cfg.bin_length_s = bin_length_s.unwrap_or(settings.bin_length_s);
    cfg.validate()?;
    Ok(cfg)
}

fn analyze(input: &Path, common: &Common, cfg: &AnalysisConfig) -> Result<()> {
    let report: CoincidenceReport = if input == Path::new("-") {
        let mut bytes = Vec::new();
        std::io::stdin().lock().read_to_end(&mut bytes)?;
        let (header, records) = decode(&bytes)?;
        if usize::from(header.channel_count) > cfg.channel_count() {
            return Err(Error::Config(format!(
                "stream has {} channels but {} roles are configured",
                header.channel_count,
                cfg.channel_count()
            )));
        }
        count_coincidences(&records, cfg)?
    } else {
        analyze_file(input, cfg)?
    };
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.json"), json(&report)?)?;
            std::fs::write(dir.join("bins.csv"), bins_csv(&report))?;
        }
        None => stdout(&json(&report)?)?,
    }
    Ok(())
}

fn scan(kind: ScanKind, common: &Common) -> Result<()> {
    let mut cfg = load_config(common, Some(kind.into()))?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        cfg.output.csv = Some(dir.join("scan.csv"));
        cfg.output.json = Some(dir.join("result.json"));
    }
    let result = run_experiment(&cfg)?;
    if cfg.output == OutputPaths::default() {
        stdout(&json(&result)?)?;
    } else {
        write_outputs(&result, &cfg.output)?;
    }
    eprint!("{}", summary(&result));
    Ok(())
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map(|v| format!("{v:.digits$}")).unwrap_or_else(|| "-".into())
}

fn summary(r: &ExperimentResult) -> String {
    let kind = serde_json::to_value(r.experiment)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let mut s = format!("{kind}: {} points, seed {}\n", r.series.points.len(), r.seed);
    s += &format!("{:>10} {:>14} {:>9} {:>9}\n", "x", "coinc/s", "E", "pred E");
    for (i, p) in r.series.points.iter().enumerate() {
        let rate = p
            .report
            .as_ref()
            .map(|rep| rep.total.total_coincidences as f64 / p.duration_s);
        let pred = r.predicted.get(i).and_then(|x| x.as_ref()).and_then(|x| x.e);
        s += &format!(
            "{:>10} {:>14} {:>9} {:>9}",
            format!("{:.2}", p.x),
            fmt_opt(rate, 1),
            fmt_opt(p.e(), 4),
            fmt_opt(pred, 4)
        );
        if let Some(e) = &p.error {
            s += &format!("  error: {e}");
        }
        s += "\n";
    }
    for f in &r.fits {
        let channel = serde_json::to_value(f.channel)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        s += &format!(
            "fit {channel}: V = {:.4}, r0 = {:.1}/s, phase = {:.4} rad, rms = {:.3}\n",
            f.fit.visibility, f.fit.r0, f.fit.phase, f.fit.rms_residual
        );
    }
    if let Some(c) = &r.chsh {
        s += &format!("CHSH S = {:.4} (predicted {:.4})\n", c.measured, c.predicted);
    }
    s
}

fn report(path: &Path, csv: bool) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let result: ExperimentResult =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("result JSON: {e}")))?;
    stdout(&if csv { scan_csv(&result) } else { summary(&result) })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, point, kind } => simulate(&common, point, kind),
        Command::Analyze {
            input,
            common,
            roles,
            offsets_ps,
            bin_length_s,
        } => {
            let cfg = analysis_config(&common, roles, offsets_ps, bin_length_s)?;
            analyze(&input, &common, &cfg)
        }
        Command::Scan { kind, common } => scan(kind, &common),
        Command::Report { result, csv } => report(&result, csv),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hvpair: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
