//! Deterministic output artifacts: atomic file writes, versioned CSV tables
//! and hand-emitted SVG line plots (no plotting dependency, so bytes are
//! stable and checksummable).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Every CSV starts with this version tag; bump on schema changes.
pub const CSV_SCHEMA_VERSION: &str = "v1";

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("artifact")
    ));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub struct CsvTable {
    text: String,
    pub path: PathBuf,
}

impl CsvTable {
    pub fn new(path: PathBuf, schema: &str, header: &str) -> Self {
        let mut text = String::new();
        writeln!(text, "# schema={schema} version={CSV_SCHEMA_VERSION}").unwrap();
        writeln!(text, "{header}").unwrap();
        CsvTable { text, path }
    }

    pub fn row(&mut self, row: &str) {
        self.text.push_str(row);
        self.text.push('\n');
    }

    pub fn finish(self) -> anyhow::Result<PathBuf> {
        write_atomic(&self.path, self.text.as_bytes())?;
        Ok(self.path)
    }
}

/// Fixed-format float for byte-stable artifacts.
pub fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12e}")
    }
}

/// A line series for [`svg_plot`].
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub color: &'a str,
    pub dashed: bool,
}

/// Minimal deterministic SVG line plot with linear axes; callers pass
/// already-transformed coordinates (e.g. log values) plus axis labels.
pub fn svg_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    annotation: Option<&str>,
) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 55.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if !(x0.is_finite() && x1.is_finite()) {
        x0 = 0.0;
        x1 = 1.0;
    }
    if !(y0.is_finite() && y1.is_finite()) {
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="monospace" font-size="15" text-anchor="middle">{title}</text>"#,
        w / 2.0
    )
    .unwrap();
    // axes
    writeln!(
        svg,
        r#"<line x1="{ml}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        h - mb,
        w - mr,
        h - mb
    )
    .unwrap();
    writeln!(svg, r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{:.1}" stroke="black"/>"#, h - mb)
        .unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{:.3}</text>"#,
            px(fx),
            h - mb + 18.0,
            fx
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{:.3}</text>"#,
            ml - 6.0,
            py(fy) + 4.0,
            fy
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle">{x_label}</text>"#,
        (ml + w - mr) / 2.0,
        h - 14.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    )
    .unwrap();

    for (si, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{:.2},{:.2} ", px(x), py(y)).unwrap();
        }
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
            d.trim_end(),
            s.color
        )
        .unwrap();
        for &(x, y) in &s.points {
            writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.4" fill="{}"/>"#,
                px(x),
                py(y),
                s.color
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" fill="{}">{}</text>"#,
            w - mr - 180.0,
            mt + 16.0 * (si as f64 + 1.0),
            s.color,
            s.label
        )
        .unwrap();
    }
    if let Some(a) = annotation {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12">{a}</text>"#,
            ml + 10.0,
            mt + 4.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Least squares `y = a x + b` plus the coefficient of determination.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let b = (sy - a * sx) / n;
    let mean = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean) * (p.1 - mean)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - a * p.0 - b) * (p.1 - a * p.0 - b)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (a, b, r2) = linear_fit(&pts);
        assert!((a - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svg_is_deterministic() {
        let s = Series {
            label: "x",
            points: vec![(0.0, 0.0), (1.0, 2.0)],
            color: "steelblue",
            dashed: false,
        };
        let a = svg_plot("t", "x", "y", &[s], Some("note"));
        let s = Series {
            label: "x",
            points: vec![(0.0, 0.0), (1.0, 2.0)],
            color: "steelblue",
            dashed: false,
        };
        let b = svg_plot("t", "x", "y", &[s], Some("note"));
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
    }
}
