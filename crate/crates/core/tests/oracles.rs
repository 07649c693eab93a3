use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use hvpair::coincidence::{
    count_coincidences, fit_visibility, AnalysisConfig, FitForm, RateChannel, ScanPoint, ScanSeries,
};
use hvpair::experiment::{analyze_file, run_experiment, ExperimentConfig, ExperimentKind};
use hvpair::optics::{build_circuit, ElementSpec, HwpConvention};
use hvpair::quantum::{apply_unitary, make_pair_state, outcome_distribution, ModeSet, ModeUnitary};
use hvpair::setups::{Plate, Setup, SOURCE_PATH};
use hvpair::source::{ensemble_for, SourceCalibration, SourcePoint};
use hvpair::timetag::{generate_stream, write_ttag, DetectorModel, PairSampler, SimRun, TimeTagRecord};
use hvpair::Complex64;

fn random_circuit(rng: &mut ChaCha8Rng, modes: &ModeSet) -> ModeUnitary {
    let p = ["C", "a", "b"];
    let specs: Vec<ElementSpec> = (0..8)
        .map(|_| {
            let i = rng.random_range(0..3);
            let angle = rng.random_range(-180.0..180.0);
            match rng.random_range(0..4) {
                0 => ElementSpec::hwp(p[i], angle),
                1 => ElementSpec::qwp(p[i], angle),
                2 => ElementSpec::npbs(p[i], p[(i + 1) % 3], p[(i + 2) % 3]),
                _ => ElementSpec::pbs(p[i], p[(i + 1) % 3], p[(i + 2) % 3]),
            }
        })
        .collect();
    build_circuit(modes, &specs, HwpConvention::Paper).unwrap()
}

/// Fock-space probability of detecting `{m, n}` from the input `{i, j}`:
/// |perm U[{m,n},{i,j}]|² / (∏ in! · ∏ out!).
fn permanent_probability(u: &ModeUnitary, (i, j): (usize, usize), (m, n): (usize, usize)) -> f64 {
    let a = u.matrix();
    let perm: Complex64 = a[(m, i)] * a[(n, j)] + a[(m, j)] * a[(n, i)];
    let fact = |same: bool| if same { 2.0 } else { 1.0 };
    perm.norm_sqr() / (fact(i == j) * fact(m == n))
}

fn distinguishable_probability(u: &ModeUnitary, (i, j): (usize, usize), (m, n): (usize, usize)) -> f64 {
    let a = u.matrix();
    let direct = (a[(m, i)] * a[(n, j)]).norm_sqr();
    if m == n {
        direct
    } else {
        direct + (a[(n, i)] * a[(m, j)]).norm_sqr()
    }
}

#[test]
fn evolution_matches_permanent_oracle() {
    let modes = ModeSet::new(&["C", "a", "b"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let u = random_circuit(&mut rng, &modes);
        let i = rng.random_range(0..modes.dim());
        let j = rng.random_range(0..modes.dim());
        for labeled in [false, true] {
            let s = make_pair_state(&modes, modes.mode_at(i), modes.mode_at(j), labeled).unwrap();
            let d = outcome_distribution(&apply_unitary(&s, &u).unwrap());
            for m in 0..modes.dim() {
                for n in m..modes.dim() {
                    let want = if labeled {
                        distinguishable_probability(&u, (i, j), (m, n))
                    } else {
                        permanent_probability(&u, (i, j), (m, n))
                    };
                    let got = d.probability(m, n);
                    assert!((got - want).abs() < 1e-12, "in ({i},{j}) out ({m},{n}) labeled {labeled}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn sampled_click_patterns_follow_exact_distribution() {
    let cal = SourceCalibration::default_with_rate(1e5);
    let det = DetectorModel { efficiency: 0.6, ..DetectorModel::default() };
    let n = 100_000u32;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (t, alpha, beta) in [(35.1, 0.0, 0.3), (25.0, 0.4, 1.1), (28.6, PI / 8.0, PI / 8.0)] {
        let setup = Setup::bell(alpha, beta, HwpConvention::Paper).unwrap();
        let e = ensemble_for(setup.modes(), SOURCE_PATH, &cal.at(t).unwrap(), None).unwrap();
        let exact = setup.click_distribution(&e, &[det.efficiency; 4]).unwrap();
        let sampler = PairSampler::new(&e, setup.circuit(), setup.channel_map()).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..n {
            *counts.entry(sampler.sample_pattern(&mut rng, &[det; 4])).or_insert(0u32) += 1;
        }
        for (pattern, &p) in &exact {
            let got = counts.get(pattern).copied().unwrap_or(0) as f64;
            let mean = n as f64 * p;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!((got - mean).abs() <= 5.0 * sigma, "{pattern:?} at T={t}: {got} vs {mean}");
        }
        assert!(counts.keys().all(|k| exact.get(k).is_some_and(|&p| p > 0.0)));
    }
}

fn synthetic_point(theta: f64, counts: u64) -> ScanPoint {
    // `counts` ++ coincidences, 1 µs apart
    let stream: Vec<_> = (0..counts)
        .flat_map(|k| [TimeTagRecord::new(k * 1_000_000, 0), TimeTagRecord::new(k * 1_000_000 + 10, 2)])
        .collect();
    let report = count_coincidences(&stream, &AnalysisConfig::bell()).unwrap();
    ScanPoint {
        x: theta.to_degrees(),
        alpha: Some(0.0),
        beta: Some(theta),
        temperature_c: 35.1,
        duration_s: 1.0,
        report: Some(report),
        error: None,
    }
}

#[test]
fn poisson_fit_recovers_visibility() {
    let (v, r0, phase) = (0.9, 100.0, 0.3);
    let thetas: Vec<f64> = (0..19).map(|k| (k as f64 * 5.0).to_radians()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fits: Vec<_> = (0..200)
        .map(|_| {
            let pts = thetas
                .iter()
                .map(|&th| {
                    let mean: f64 = r0 / 2.0 * (1.0 + v * (4.0 * th + phase).cos());
                    let c = Poisson::new(mean.max(1e-9)).unwrap().sample(&mut rng) as u64;
                    synthetic_point(th, c)
                })
                .collect();
            let s = ScanSeries::new(pts).unwrap();
            fit_visibility(&s, FitForm::DifferenceAngle, RateChannel::PlusPlus).unwrap()
        })
        .collect();
    let n = fits.len() as f64;
    let mean_v = fits.iter().map(|f| f.visibility).sum::<f64>() / n;
    let sd_v = (fits.iter().map(|f| (f.visibility - mean_v).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mean_r0 = fits.iter().map(|f| f.r0).sum::<f64>() / n;
    assert!(sd_v > 0.0 && sd_v < 0.05, "spread {sd_v}");
    assert!((mean_v - v).abs() < 3.0 * sd_v / n.sqrt() + 2e-3, "mean V {mean_v} ± {sd_v}");
    assert!((mean_r0 - r0).abs() < 1.0, "mean r0 {mean_r0}");
    // a single noiseless scan is exact
    let exact = ScanSeries::new(
        thetas
            .iter()
            .map(|&th| synthetic_point(th, (r0 / 2.0 * (1.0 + v * (4.0 * th + phase).cos())).round() as u64))
            .collect(),
    )
    .unwrap();
    let f = fit_visibility(&exact, FitForm::DifferenceAngle, RateChannel::PlusPlus).unwrap();
    assert!((f.visibility - v).abs() < 0.01);
}

fn scan(kind: ExperimentKind, temperature: f64, angles: Vec<f64>, pairs: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.temperature_c = temperature;
    cfg.angles_deg = angles;
    cfg.pairs_per_point = Some(pairs);
    cfg.detector = DetectorModel::ideal();
    cfg.seed = 99;
    cfg
}

fn grid(step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * step).collect()
}

#[test]
fn fixed_scan_at_optimum_follows_cos_squared() {
    let r = run_experiment(&scan(ExperimentKind::FixedScan, 35.1, grid(10.0, 10), 5e4)).unwrap();
    for p in &r.series.points {
        let b = p.report.as_ref().unwrap().total.rates.bell.unwrap();
        let share = b.r_pm / (b.r_pp + b.r_pm + b.r_mp + b.r_mm);
        let want = (2.0 * p.beta.unwrap()).cos().powi(2) / 2.0;
        assert!((share - want).abs() < 0.01, "β {}: {share} vs {want}", p.x);
    }
    for f in &r.fits {
        assert!(f.fit.visibility > 0.995, "{:?}", f);
        assert_eq!(f.form, FitForm::DifferenceAngle);
    }
}

#[test]
fn fixed_scan_off_optimum_follows_sum_angle() {
    let mut cfg = scan(ExperimentKind::FixedScan, 25.0, grid(10.0, 10), 5e4);
    cfg.fixed_alpha_deg = 22.5;
    let r = run_experiment(&cfg).unwrap();
    let alpha = 22.5f64.to_radians();
    for p in &r.series.points {
        let b = p.report.as_ref().unwrap().total.rates.bell.unwrap();
        let share = b.r_pp / (b.r_pp + b.r_pm + b.r_mp + b.r_mm);
        let want = (2.0 * (alpha + p.beta.unwrap())).sin().powi(2) / 2.0;
        assert!((share - want).abs() < 0.02, "β {}: {share} vs {want}", p.x);
    }
    assert!(r.fits.iter().all(|f| f.form == FitForm::SumAngle));
}

#[test]
fn twin_scan_doubles_and_ab_rates() {
    let at = |t: f64| run_experiment(&scan(ExperimentKind::TwinScan, t, grid(5.0, 10), 5e4)).unwrap();
    let opt = at(35.1);
    let first = opt.series.points[0].report.as_ref().unwrap().total.rates.bell.unwrap();
    // only accidentals land on ++ at θ = 0
    assert!(first.r_pp < 1e-3 * first.r_aa);
    let ab: Vec<f64> = opt
        .series
        .points
        .iter()
        .map(|p| p.report.as_ref().unwrap().total.rates.bell.unwrap().ab_total())
        .collect();
    let mean = ab.iter().sum::<f64>() / ab.len() as f64;
    assert!(ab.iter().all(|&x| (x - mean).abs() < 0.05 * mean), "{ab:?}");
    let fit = |r: &hvpair::experiment::ExperimentResult, ch| r.fits.iter().find(|f| f.channel == ch).unwrap().fit;
    assert!(fit(&opt, RateChannel::DoublesA).visibility > 0.99);
    // at 25.0 the doubles are nearly flat while ++ follows sin²4θ
    let off = at(25.0);
    assert!(fit(&off, RateChannel::DoublesA).visibility < 0.2);
    let pp: Vec<f64> = off
        .series
        .points
        .iter()
        .map(|p| p.report.as_ref().unwrap().total.rates.bell.unwrap().r_pp)
        .collect();
    let (lo, hi) = pp.iter().fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(hi > 20.0 * lo.max(1.0), "{pp:?}");
}

#[test]
fn coalescence_regimes() {
    let point = |t: f64, theta: f64, plate: Plate| {
        let mut cfg = scan(ExperimentKind::CoalescenceScan, t, vec![theta], 5e4);
        cfg.plate = plate;
        let r = run_experiment(&cfg).unwrap();
        r.series.points[0].report.as_ref().unwrap().total.rates.coalescence.unwrap()
    };
    let bosonic = point(35.1, 22.5, Plate::Hwp);
    assert!(bosonic.r20_tr > 0.0 && bosonic.r11_t + bosonic.r11_r < 0.01 * bosonic.r20_tr);
    let fermionic = point(25.0, 22.5, Plate::Hwp);
    assert!(fermionic.r20_tr < 0.01 * (fermionic.r11_t + fermionic.r11_r));
    for t in [35.1, 25.0] {
        let c = point(t, 0.0, Plate::Hwp);
        assert!(c.r20_tr < 0.01 * (c.r11_t + c.r11_r), "T {t}");
    }
    let q = point(25.0, 22.5, Plate::Qwp);
    assert!(q.r20_tr < 0.01 * (q.r11_t + q.r11_r));
}

#[test]
fn temperature_sweep_rate_tracks_calibration() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::TemperatureSweep);
    cfg.temperatures_c = vec![28.6, 35.1];
    cfg.duration_s = 0.5;
    cfg.detector = DetectorModel::ideal();
    let r = run_experiment(&cfg).unwrap();
    for (p, pred) in r.series.points.iter().zip(&r.predicted) {
        let got = p.report.as_ref().unwrap().total.total_coincidences as f64;
        let b = pred.as_ref().unwrap().rates.bell.unwrap();
        let want = (b.r_pp + b.r_pm + b.r_mp + b.r_mm + b.r_aa + b.r_bb) * p.duration_s;
        assert!((got - want).abs() < 5.0 * want.sqrt(), "T {}: {got} vs {want}", p.x);
    }
    let e = r.series.points[1].e().unwrap();
    assert!((e + 1.0).abs() < 0.02, "E at optimum {e}");
}

#[test]
fn temperature_sweep_with_measured_visibility() {
    let mut anchors = SourceCalibration::default().anchors().to_vec();
    let at25 = anchors.iter().position(|a| a.temperature_c == 25.0).unwrap();
    anchors[at25].visibility = Some(hvpair::predictions::VisibilityPair::new(0.982, 0.877).unwrap());
    let mut cfg = ExperimentConfig::new(ExperimentKind::TemperatureSweep);
    cfg.calibration = Some(SourceCalibration::new(anchors).unwrap());
    cfg.temperatures_c = vec![25.0, 35.1];
    cfg.pairs_per_point = Some(1e5);
    cfg.detector = DetectorModel::ideal();
    let r = run_experiment(&cfg).unwrap();
    let e25 = r.series.points[0].e().unwrap();
    let e35 = r.series.points[1].e().unwrap();
    assert!((e25 - 0.88).abs() < 0.03, "E(25.0) = {e25}");
    assert!((e35 + 1.0).abs() < 0.02, "E(35.1) = {e35}");
}

#[test]
fn chsh_regimes() {
    let run = |t: f64, vis: Option<(f64, f64)>| {
        let mut cfg = scan(ExperimentKind::Chsh, t, vec![], 1e5);
        cfg.visibility = vis.map(|(r, d)| hvpair::predictions::VisibilityPair::new(r, d).unwrap());
        run_experiment(&cfg).unwrap().chsh.unwrap()
    };
    let ideal = run(35.1, None);
    assert!((ideal.measured - 2.0 * 2f64.sqrt()).abs() < 0.03, "{}", ideal.measured);
    let classical = run(35.1, Some((1.0, 0.0)));
    assert!(classical.measured <= 2.0, "{}", classical.measured);
}

#[test]
fn reanalysis_with_channel_offset() {
    let setup = Setup::bell(0.0, 0.0, HwpConvention::Paper).unwrap();
    let point = SourcePoint { temperature_c: 35.1, exchange_phase: 0.0, degeneracy_weight: 1.0, pair_rate: 2e4 };
    let e = ensemble_for(setup.modes(), SOURCE_PATH, &point, None).unwrap();
    let run = SimRun { duration_s: 0.5, seed: 5, pair_rate: point.pair_rate };
    let stream = generate_stream(&e, setup.circuit(), setup.channel_map(), &run, &[DetectorModel::ideal(); 4]).unwrap();
    let mut delayed: Vec<_> = stream
        .iter()
        .map(|r| TimeTagRecord::new(r.timestamp + if r.channel == 3 { 500 } else { 0 }, r.channel))
        .collect();
    delayed.sort();
    let dir = tempfile::tempdir().unwrap();
    let (orig, late) = (dir.path().join("orig.ttag"), dir.path().join("late.ttag"));
    write_ttag(&stream, 4, &orig).unwrap();
    write_ttag(&delayed, 4, &late).unwrap();

    let mut cfg = AnalysisConfig::bell();
    cfg.window_ps = 200;
    let base = analyze_file(&orig, &cfg).unwrap();
    assert!(base.total.coincidences[0][3] > 1000);
    let shifted = analyze_file(&late, &cfg).unwrap();
    assert!(shifted.total.coincidences[0][3] < base.total.coincidences[0][3] / 100);
    cfg.offsets_ps = vec![0, 0, 0, -500];
    let fixed = analyze_file(&late, &cfg).unwrap();
    assert_eq!(fixed.total.coincidences, base.total.coincidences);

    // widening the window never loses coincidences
    let mut last = 0;
    for w in [100, 400, 1600, 6400] {
        let mut c = AnalysisConfig::bell();
        c.window_ps = w;
        let t = analyze_file(&late, &c).unwrap().total.total_coincidences;
        assert!(t >= last);
        last = t;
    }
}
