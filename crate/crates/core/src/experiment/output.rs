//! CSV renderings of scan results and per-bin reports.
//!
//! Column order is fixed. Rates in the scan table are per second (counts
//! divided by point duration); the per-bin table holds raw counts. Cells
//! that do not apply to the setup, or undefined correlations, are empty.

use super::ExperimentResult;
use crate::coincidence::{BellRates, BinReport, CoalescenceRates, CoincidenceReport, RoleRates};

pub const SCAN_CSV_COLUMNS: [&str; 34] = [
    "point",
    "x",
    "alpha_deg",
    "beta_deg",
    "temperature_c",
    "duration_s",
    "singles_0",
    "singles_1",
    "singles_2",
    "singles_3",
    "r_pp",
    "r_pm",
    "r_mp",
    "r_mm",
    "r_aa",
    "r_bb",
    "r20_tr",
    "r11_t",
    "r11_r",
    "coincidence_rate",
    "e",
    "pred_r_pp",
    "pred_r_pm",
    "pred_r_mp",
    "pred_r_mm",
    "pred_r_aa",
    "pred_r_bb",
    "pred_r20_tr",
    "pred_r11_t",
    "pred_r11_r",
    "pred_e",
    "fit_channel",
    "fit_visibility",
    "error",
];

pub const BINS_CSV_COLUMNS: [&str; 17] = [
    "bin",
    "start_s",
    "singles_0",
    "singles_1",
    "singles_2",
    "singles_3",
    "r_pp",
    "r_pm",
    "r_mp",
    "r_mm",
    "r_aa",
    "r_bb",
    "r20_tr",
    "r11_t",
    "r11_r",
    "e",
    "total_coincidences",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn role_cells(rates: Option<&RoleRates>, scale: f64) -> Vec<String> {
    let bell = rates.and_then(|r| r.bell);
    let coal = rates.and_then(|r| r.coalescence);
    let b = |f: fn(&BellRates) -> f64| opt(bell.as_ref().map(|x| f(x) * scale));
    let c = |f: fn(&CoalescenceRates) -> f64| opt(coal.as_ref().map(|x| f(x) * scale));
    vec![
        b(|x| x.r_pp),
        b(|x| x.r_pm),
        b(|x| x.r_mp),
        b(|x| x.r_mm),
        b(|x| x.r_aa),
        b(|x| x.r_bb),
        c(|x| x.r20_tr),
        c(|x| x.r11_t),
        c(|x| x.r11_r),
    ]
}

fn singles_cells<T: Copy>(singles: Option<&[T]>, f: impl Fn(T) -> String) -> Vec<String> {
    (0..4)
        .map(|c| singles.and_then(|s| s.get(c)).map(|&v| f(v)).unwrap_or_default())
        .collect()
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    // writing into a Vec cannot fail
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// One row per scan point. The two fit columns are filled on the first row
/// only, with the first fit of the result.
pub fn scan_csv(result: &ExperimentResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(SCAN_CSV_COLUMNS);
    for (i, p) in result.series.points.iter().enumerate() {
        let total = p.report.as_ref().map(|r| &r.total);
        let per_s = if p.duration_s > 0.0 { 1.0 / p.duration_s } else { 0.0 };
        let pred = result.predicted.get(i).and_then(Option::as_ref);
        let mut row = vec![
            i.to_string(),
            num(p.x),
            opt(p.alpha.map(f64::to_degrees)),
            opt(p.beta.map(f64::to_degrees)),
            num(p.temperature_c),
            num(p.duration_s),
        ];
        row.extend(singles_cells(total.map(|t| t.singles.as_slice()), |c: u64| {
            num(c as f64 * per_s)
        }));
        row.extend(role_cells(total.map(|t| &t.rates), per_s));
        row.push(opt(total.map(|t| t.total_coincidences as f64 * per_s)));
        row.push(opt(total.and_then(|t| t.e)));
        row.extend(role_cells(pred.map(|p| &p.rates), 1.0));
        row.push(opt(pred.and_then(|p| p.e)));
        match result.fits.first().filter(|_| i == 0) {
            Some(f) => {
                row.push(serde_json::to_value(f.channel).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
                row.push(num(f.fit.visibility));
            }
            None => row.extend([String::new(), String::new()]),
        }
        row.push(p.error.clone().unwrap_or_default());
        let _ = w.write_record(&row);
    }
    finish(w)
}

fn bin_row(label: String, b: &BinReport) -> Vec<String> {
    let mut row = vec![label, num(b.start_s)];
    row.extend(singles_cells(Some(b.singles.as_slice()), |c: u64| c.to_string()));
    row.extend(role_cells(Some(&b.rates), 1.0));
    row.push(opt(b.e));
    row.push(b.total_coincidences.to_string());
    row
}

/// One row per bin followed by a `total` row.
pub fn bins_csv(report: &CoincidenceReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(BINS_CSV_COLUMNS);
    for b in &report.bins {
        let _ = w.write_record(bin_row(b.bin.unwrap_or_default().to_string(), b));
    }
    let _ = w.write_record(bin_row("total".into(), &report.total));
    finish(w)
}
