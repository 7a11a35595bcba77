//! Result tables and their CSV, JSON and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::mean_se;

/// One cell of an experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub eta: f64,
    pub n: usize,
    pub run: usize,
    pub value: f64,
}

impl ResultRow {
    pub fn new(method: impl Into<String>, eta: f64, n: usize, run: usize, value: f64) -> Self {
        Self {
            method: method.into(),
            eta,
            n,
            run,
            value,
        }
    }
}

/// Mean and standard error over runs of one (method, n, eta) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub eta: f64,
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
}

/// Groups rows by (method, n, eta) in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, usize, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, usize, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.n, r.eta.to_bits());
        groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        groups.get_mut(&(r.method.clone(), r.n, r.eta.to_bits())).unwrap().push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let vals = &groups[&key];
            let (mean, std_error) = mean_se(vals);
            SummaryRow {
                method: key.0,
                n: key.1,
                eta: f64::from_bits(key.2),
                mean,
                std_error,
                runs: vals.len(),
            }
        })
        .collect()
}

/// Paths written by [`emit_results`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>_summary.json` and `<stem>.svg` under `dir`.
pub fn emit_results(rows: &[ResultRow], dir: &Path, stem: &str, log_y: bool) -> Result<EmittedFiles> {
    if rows.is_empty() {
        return Err(Error::validation("cannot emit an empty result table"));
    }
    if let Some(r) = rows.iter().find(|r| !r.value.is_finite() || !r.eta.is_finite()) {
        return Err(Error::validation(format!("non-finite result for method {}", r.method)));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv, to_csv(rows)?).map_err(|e| Error::io(&csv, e))?;
    let summary = summarize(rows);
    let json = dir.join(format!("{stem}_summary.json"));
    std::fs::write(&json, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&json, e))?;
    let svg = dir.join(format!("{stem}.svg"));
    std::fs::write(&svg, to_svg(&summary, stem, log_y)).map_err(|e| Error::io(&svg, e))?;
    Ok(EmittedFiles { csv, json, svg })
}

/// CSV with header `method,eta,n,run,value`.
pub fn to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::validation(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line chart of summary means: eta on x, value on y, one series per (method, n).
pub fn to_svg(summary: &[SummaryRow], title: &str, log_y: bool) -> String {
    let (w, h, pad) = (720.0, 480.0, 60.0);
    let ty = |v: f64| if log_y { v.max(f64::MIN_POSITIVE).log10() } else { v };
    let xs = summary.iter().map(|s| s.eta);
    let ys = summary.iter().map(|s| ty(s.mean));
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (ty(y) - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for s in summary {
        let label = format!("{} n={}", s.method, s.n);
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push((s.eta, s.mean)),
            None => series.push((label, vec![(s.eta, s.mean)])),
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">eta ({x0:.3} to {x1:.3})</text>"#,
        w / 2.0,
        h - 20.0
    );
    let y_label = if log_y { "log10 value" } else { "value" };
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{y_label} ({y0:.3} to {y1:.3})</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(j, (x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            w - pad + 4.0 - 120.0,
            pad + 14.0 * i as f64,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        (lo - 0.5, lo + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row_csv() {
        let csv = to_csv(&[ResultRow::new("mip_M2", 0.1, 36, 0, 2.5)]).unwrap();
        assert_eq!(csv, "method,eta,n,run,value\nmip_M2,0.1,36,0,2.5\n");
    }

    #[test]
    fn empty_table_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_results(&[], dir.path(), "x", false).is_err());
    }

    #[test]
    fn emits_identical_bytes_twice() {
        let rows: Vec<ResultRow> = (0..3)
            .flat_map(|run| {
                [0.1, 0.2].map(|eta| ResultRow::new("dp", eta, 10, run, eta * run as f64 + 1.0))
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let a = emit_results(&rows, &dir.path().join("a"), "t", true).unwrap();
        let b = emit_results(&rows, &dir.path().join("b"), "t", true).unwrap();
        for (x, y) in [(a.csv, b.csv), (a.json, b.json), (a.svg, b.svg)] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn summary_means_and_errors() {
        let rows = vec![
            ResultRow::new("m", 0.1, 5, 0, 1.0),
            ResultRow::new("m", 0.1, 5, 1, 3.0),
            ResultRow::new("m", 0.2, 5, 0, 4.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mean, 2.0);
        assert!((s[0].std_error - 1.0).abs() < 1e-12);
        assert_eq!(s[1].runs, 1);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        let rows = [ResultRow::new("m", 0.1, 1, 0, 1.0)];
        assert!(matches!(emit_results(&rows, &file.join("sub"), "t", false), Err(Error::Io { .. })));
    }
}
