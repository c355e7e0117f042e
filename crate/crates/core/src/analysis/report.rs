use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::svg::grouped_bar_chart;
use super::{AnalysisError, ReportBundle};

/// Files written by [`emit_report`], in manifest order.
pub const REPORT_FILES: [&str; 5] = [
    "report.json",
    "metrics.csv",
    "histograms.csv",
    "metrics.svg",
    "histograms.svg",
];

/// Rounds to 6 decimal places; negative zero becomes zero.
pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round6(x))) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and every float rounded to 6 decimals.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn cell(x: f64) -> String {
    format!("{:.6}", round6(x))
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn metrics_csv(bundle: &ReportBundle) -> Result<String, csv::Error> {
    let mut rows = vec![vec![
        "metric".to_string(),
        "original".to_string(),
        "perturbed".to_string(),
        "change_pct".to_string(),
    ]];
    for m in &bundle.change.metrics {
        rows.push(vec![
            m.metric.clone(),
            cell(m.original),
            cell(m.perturbed),
            m.change_pct.map(cell).unwrap_or_default(),
        ]);
    }
    csv_string(rows)
}

fn histograms_csv(bundle: &ReportBundle) -> Result<String, csv::Error> {
    let h = &bundle.histograms;
    let n = h.original.bins.len();
    let mut rows = vec![vec![
        "bin".to_string(),
        "lower".to_string(),
        "upper".to_string(),
        "original".to_string(),
        "perturbed".to_string(),
    ]];
    for i in 0..n {
        rows.push(vec![
            i.to_string(),
            cell(i as f64 / n as f64),
            cell((i + 1) as f64 / n as f64),
            cell(h.original.bins[i]),
            cell(h.perturbed.bins.get(i).copied().unwrap_or(0.0)),
        ]);
    }
    csv_string(rows)
}

fn metrics_svg(bundle: &ReportBundle) -> String {
    let cats: Vec<String> = bundle.change.metrics.iter().map(|m| m.metric.clone()).collect();
    let series = vec![
        ("original", bundle.change.metrics.iter().map(|m| m.original).collect()),
        ("perturbed", bundle.change.metrics.iter().map(|m| m.perturbed).collect()),
    ];
    grouped_bar_chart("Metric means: original vs perturbed", &cats, &series, 1.0)
}

fn histograms_svg(bundle: &ReportBundle) -> String {
    let h = &bundle.histograms;
    let n = h.original.bins.len();
    let cats: Vec<String> = (0..n).map(|i| format!("{:.1}", i as f64 / n as f64)).collect();
    let series = vec![
        ("original", h.original.bins.clone()),
        ("perturbed", h.perturbed.bins.clone()),
    ];
    grouped_bar_chart("Summary sentence source positions", &cats, &series, 0.0)
}

/// Writes the report files into `out_dir` (created if missing) and returns
/// their paths in [`REPORT_FILES`] order.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    let io = |path: &Path, e: &dyn std::fmt::Display| AnalysisError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, &e))?;
    let contents = [
        to_canonical_json(bundle).map_err(|e| io(out_dir, &e))?,
        metrics_csv(bundle).map_err(|e| io(out_dir, &e))?,
        histograms_csv(bundle).map_err(|e| io(out_dir, &e))?,
        metrics_svg(bundle),
        histograms_svg(bundle),
    ];
    let mut written = Vec::with_capacity(REPORT_FILES.len());
    for (name, body) in REPORT_FILES.iter().zip(contents) {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, &e))?;
        written.push(path);
    }
    Ok(written)
}
