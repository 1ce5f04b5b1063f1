//! Evaluation reports: CSV rows per angle and condition, a JSON summary and
//! polar SVG plots of directivity sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::directivity::DirectivityPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    /// BSS-SDR against the anechoic target, per interference angle.
    Enhancement,
    /// Energy suppression of a lone source, per angle.
    Suppression,
    /// Gain of a lone source, per angle (one condition per steering offset).
    Directivity,
    /// Per-scene scores over a generated dataset.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub angle_deg: f64,
    /// Condition label, e.g. `snr=0dB` or `offset=+4`.
    pub condition: String,
    pub mean_db: f64,
    pub std_db: f64,
    pub count: usize,
    /// At least one value hit a ±100 dB cap.
    pub saturated: bool,
    /// At least one value needed a regularised solve.
    pub regularized: bool,
    /// Individual values (per seed or per scene).
    pub values: Vec<f64>,
}

impl ReportRow {
    pub fn from_values(angle_deg: f64, condition: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        ReportRow {
            angle_deg,
            condition: condition.into(),
            mean_db: mean,
            std_db: var.sqrt(),
            count: values.len(),
            saturated: values.iter().any(|v| v.abs() >= 100.0),
            regularized: false,
            values,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct CsvRow<'a> {
    angle_deg: f64,
    condition: &'a str,
    mean_db: f64,
    std_db: f64,
    count: usize,
    saturated: bool,
    regularized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ReportKind,
    pub separator: String,
    pub metadata: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    /// Mean over angles of the per-angle means.
    pub mean_db: f64,
    pub min_db: f64,
    pub max_db: f64,
}

impl EvalReport {
    pub fn new(kind: ReportKind, separator: impl Into<String>) -> Self {
        EvalReport {
            kind,
            separator: separator.into(),
            metadata: BTreeMap::new(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Mean value at `angle_deg` under `condition`.
    pub fn value(&self, angle_deg: f64, condition: &str) -> Option<f64> {
        self.row(angle_deg, condition).map(|r| r.mean_db)
    }

    pub fn row(&self, angle_deg: f64, condition: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.condition == condition && (r.angle_deg - angle_deg).abs() < 1e-9)
    }

    /// Distinct conditions in order of first appearance.
    pub fn conditions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.condition) {
                out.push(r.condition.clone());
            }
        }
        out
    }

    pub fn summary(&self) -> Vec<ConditionSummary> {
        self.conditions()
            .into_iter()
            .map(|c| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.condition == c)
                    .map(|r| r.mean_db)
                    .collect();
                ConditionSummary {
                    mean_db: vals.iter().sum::<f64>() / vals.len() as f64,
                    min_db: vals.iter().copied().fold(f64::INFINITY, f64::min),
                    max_db: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    condition: c,
                }
            })
            .collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRow {
                angle_deg: r.angle_deg,
                condition: &r.condition,
                mean_db: r.mean_db,
                std_db: r.std_db,
                count: r.count,
                saturated: r.saturated,
                regularized: r.regularized,
            })
            .map_err(|e| Error::Numerical(format!("csv encoding failed: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Numerical(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Summary document: the report plus per-condition aggregates.
    pub fn to_json_string(&self) -> String {
        let doc = serde_json::json!({
            "report": self,
            "summary": self.summary(),
        });
        serde_json::to_string_pretty(&doc).expect("report serialises")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

/// Polar plot of a directivity sweep. Azimuth 0° points up and angles grow
/// clockwise; the radius is linear in dB from `floor_db` at the centre to
/// 0 dB at the outer ring.
pub fn polar_svg(sweep: &[DirectivityPoint], title: &str, floor_db: f64) -> String {
    let size = 420.0;
    let c = size / 2.0;
    let r_max = 170.0;
    let floor = floor_db.min(-1.0);
    let radius = |g: f64| r_max * ((g.clamp(floor, 0.0) - floor) / -floor);
    let point = |az: f64, r: f64| {
        let a = az.to_radians();
        (c + r * a.sin(), c - r * a.cos())
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h}" viewBox="0 0 {size} {h}">"#,
        h = size + 30.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{c}" y="{y}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        escape(title),
        y = size + 20.0
    );
    let step = if -floor > 40.0 { 20.0 } else { 10.0 };
    let mut level = 0.0;
    while level > floor - 1e-9 {
        let r = radius(level);
        let _ = writeln!(
            s,
            r##"<circle cx="{c}" cy="{c}" r="{r:.2}" fill="none" stroke="#bbb" stroke-width="1"/>"##
        );
        let _ = writeln!(
            s,
            r##"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="10" fill="#666">{level} dB</text>"##,
            x = c + 3.0,
            y = c - r - 2.0
        );
        level -= step;
    }
    for k in 0..8 {
        let az = k as f64 * 45.0;
        let (x, y) = point(az, r_max);
        let (lx, ly) = point(az, r_max + 16.0);
        let _ = writeln!(
            s,
            r##"<line x1="{c}" y1="{c}" x2="{x:.2}" y2="{y:.2}" stroke="#ddd" stroke-width="1"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11" text-anchor="middle" dominant-baseline="middle">{az}°</text>"#
        );
    }
    let mut sorted: Vec<DirectivityPoint> = sweep.to_vec();
    sorted.sort_by(|a, b| {
        a.angle_deg
            .rem_euclid(360.0)
            .total_cmp(&b.angle_deg.rem_euclid(360.0))
    });
    let pts: Vec<String> = sorted
        .iter()
        .map(|p| {
            let (x, y) = point(p.angle_deg, radius(p.gain_db));
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.15" stroke="#1f77b4" stroke-width="2"/>"##,
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvalReport {
        let mut r =
            EvalReport::new(ReportKind::Suppression, "identity").with_meta("room", "free-field");
        r.rows
            .push(ReportRow::from_values(0.0, "lone", vec![1.0, 3.0]));
        r.rows
            .push(ReportRow::from_values(90.0, "lone", vec![100.0]));
        r
    }

    #[test]
    fn rows_aggregate() {
        let r = sample();
        let row = r.row(0.0, "lone").unwrap();
        assert_eq!((row.mean_db, row.std_db, row.count), (2.0, 1.0, 2));
        assert!(r.row(90.0, "lone").unwrap().saturated);
        let s = r.summary();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].min_db, s[0].max_db, s[0].mean_db), (2.0, 100.0, 51.0));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let text = sample().to_csv_string().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "angle_deg,condition,mean_db,std_db,count,saturated,regularized"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.0,lone,2.0,1.0,2,false,false"));
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let doc: serde_json::Value = serde_json::from_str(&r.to_json_string()).unwrap();
        let back: EvalReport = serde_json::from_value(doc["report"].clone()).unwrap();
        assert_eq!(back, r);
        assert_eq!(doc["summary"][0]["condition"], "lone");
    }

    #[test]
    fn svg_contains_one_vertex_per_angle() {
        let sweep: Vec<DirectivityPoint> = (0..72)
            .map(|i| DirectivityPoint {
                angle_deg: i as f64 * 5.0,
                gain_db: -(i as f64) / 3.0,
            })
            .collect();
        let svg = polar_svg(&sweep, "offset = 0 <samples>", -30.0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("&lt;samples&gt;"));
        let poly = svg.lines().find(|l| l.starts_with("<polygon")).unwrap();
        assert_eq!(poly.matches(',').count(), 72);
    }
}
