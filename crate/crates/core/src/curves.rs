//! SVG rendering of per-epoch curves from `epochs.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::EPOCH_CSV_HEADER;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// Parsed `epochs.csv`. Missing cells are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl EpochTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Malformed {
            what: "epochs csv",
            path: path.to_path_buf(),
            msg,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if header != EPOCH_CSV_HEADER {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns.len() {
                return Err(bad(format!("row {} has {} fields, expected {}", n + 1, cells.len(), columns.len())));
            }
            let row = cells
                .iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|_| bad(format!("row {}: `{c}` is not a number", n + 1)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(EpochTable { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Epoch of the first row whose `q` differs from the previous row.
    pub fn switch_epoch(&self) -> Option<f64> {
        let q = self.column("q")?;
        let e = self.column("epoch")?;
        (1..q.len()).find(|&i| q[i] != q[i - 1]).and_then(|i| e[i])
    }
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    values: Vec<Option<f64>>,
}

fn render(title: &str, epochs: &[f64], series: &[Series], switch: Option<f64>, unit_range: bool) -> String {
    let xmax = epochs.iter().cloned().fold(1.0, f64::max);
    let xmin = epochs.iter().cloned().fold(xmax, f64::min);
    let vals = series.iter().flat_map(|s| s.values.iter().flatten().cloned());
    let (mut ymin, mut ymax) = if unit_range {
        (0.0, 1.0)
    } else {
        vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    if !ymin.is_finite() || !ymax.is_finite() {
        (ymin, ymax) = (0.0, 1.0);
    }
    if ymax - ymin < 1e-12 {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin).max(1e-12) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - ymin) / (ymax - ymin) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{ymax:.3}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{ymin:.3}</text>"#,
        MARGIN - 4.0,
        MARGIN + 4.0,
        MARGIN - 4.0,
        H - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">epoch</text>"#,
        W / 2.0,
        H - 12.0
    );
    if let Some(e) = switch {
        let x = sx(e);
        let _ = writeln!(
            s,
            r#"<line class="switch" x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
            MARGIN,
            H - MARGIN
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" font-size="11">q switch</text>"#, x + 3.0, MARGIN + 12.0);
    }
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = epochs
            .iter()
            .zip(&ser.values)
            .filter_map(|(&e, v)| v.map(|v| format!("{:.2},{:.2}", sx(e), sy(v))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            ser.color,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{}">{}</text>"#,
            W - MARGIN - 120.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            ser.color,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `(file name, svg)` pairs for every metric plus the combined IoU chart.
pub fn render_curves(table: &EpochTable) -> Vec<(String, String)> {
    let epochs: Vec<f64> = table
        .column("epoch")
        .expect("header checked")
        .into_iter()
        .map(|e| e.unwrap_or(0.0))
        .collect();
    let switch = table.switch_epoch();
    let mut out = Vec::new();
    for name in ["loss", "train_iou", "test_mae", "test_e", "test_f", "test_s", "test_iou"] {
        let values = table.column(name).expect("header checked");
        let svg = render(
            name,
            &epochs,
            &[Series {
                label: name,
                color: "#1f77b4",
                values,
            }],
            None,
            name != "loss",
        );
        out.push((format!("curve_{name}.svg"), svg));
    }
    let combined = render(
        "IoU vs epoch",
        &epochs,
        &[
            Series {
                label: "train (clean GT)",
                color: "#d62728",
                values: table.column("train_iou").expect("header checked"),
            },
            Series {
                label: "test",
                color: "#1f77b4",
                values: table.column("test_iou").expect("header checked"),
            },
        ],
        switch,
        true,
    );
    out.push(("curve_iou_q.svg".to_string(), combined));
    out
}

/// Reads `run_dir/epochs.csv` and writes the SVG curves next to it.
pub fn emit_curves(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let csv = run_dir.join("epochs.csv");
    let text = fs::read_to_string(&csv).map_err(|e| Error::io(&csv, e))?;
    let table = EpochTable::parse(&text, &csv)?;
    render_curves(&table)
        .into_iter()
        .map(|(name, svg)| {
            let p = run_dir.join(name);
            fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(rows: usize, switch: usize) -> String {
        let mut s = format!("{EPOCH_CSV_HEADER}\n");
        for e in 0..rows {
            let q = if e < switch { 2 } else { 1 };
            let _ = writeln!(s, "{e},0.0001,{q},0.5,0.7,0.1,0.8,0.7,0.75,0.6");
        }
        s
    }

    #[test]
    fn one_point_per_row_and_one_marker() {
        let t = EpochTable::parse(&csv(100, 40), Path::new("x")).unwrap();
        let curves = render_curves(&t);
        let (_, iou) = curves.iter().find(|(n, _)| n == "curve_iou_q.svg").unwrap();
        let line = iou.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(pts.split(' ').count(), 100);
        assert_eq!(iou.matches("class=\"switch\"").count(), 1);
        assert_eq!(t.switch_epoch(), Some(40.0));
    }

    #[test]
    fn deterministic_and_rejects_bad_rows() {
        let t = EpochTable::parse(&csv(10, 5), Path::new("x")).unwrap();
        assert_eq!(render_curves(&t), render_curves(&t));
        assert!(EpochTable::parse("a,b\n1,2\n", Path::new("x")).is_err());
        let broken = format!("{EPOCH_CSV_HEADER}\n1,2\n");
        assert!(EpochTable::parse(&broken, Path::new("x")).is_err());
    }
}
