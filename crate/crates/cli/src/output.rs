//! Tables, manifest lines and plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(Some).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self, manifest: &str) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map(|v| format!("{v:?}")).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out.push_str(manifest);
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Assertion {
    pub fn exact(name: &str, ok: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }

    /// Trend tests never fail hard; `--strict` turns inconclusive into failure.
    pub fn trend(name: &str, ok: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Inconclusive },
            detail,
        }
    }

    pub fn fails(&self, strict: bool) -> bool {
        match self.verdict {
            Verdict::Pass => false,
            Verdict::Fail => true,
            Verdict::Inconclusive => strict,
        }
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Log-scale line plot of the `y` columns against `x`. Nonpositive values are skipped.
pub fn svg_plot(table: &Table, x: &str, ys: &[&str]) -> Option<String> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let xs = table.column(x)?;
    let series: Vec<(&str, Vec<(f64, f64)>)> = ys
        .iter()
        .filter_map(|&name| {
            let col = table.column(name)?;
            let pts = xs
                .iter()
                .zip(col)
                .filter_map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) if b.abs() > 0.0 => Some((*a, b.abs().log10())),
                    _ => None,
                })
                .collect::<Vec<_>>();
            (!pts.is_empty()).then_some((name, pts))
        })
        .collect();
    if series.is_empty() {
        return None;
    }
    let all = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(a, b) in all {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |a: f64| PAD + (a - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |b: f64| H - PAD - (b - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="8" y="{}">log10 {y1:.1}</text>"#, PAD);
    let _ = writeln!(s, r#"<text x="8" y="{}">log10 {y0:.1}</text>"#, H - PAD);
    for (k, (name, pts)) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let d: Vec<String> = pts
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{colour}" fill="none" stroke-width="1.5"/>"#,
            d.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{name}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_manifest() {
        let mut t = Table::new("x", &["level", "gap"]);
        t.push(vec![Some(1.0), None]);
        t.push_values(&[2.0, 0.1]);
        let text = t.to_csv("# manifest: config_sha256=ab");
        assert_eq!(text, "level,gap\n1.0,\n2.0,0.1\n# manifest: config_sha256=ab\n");
    }

    #[test]
    fn plot_skips_zero() {
        let mut t = Table::new("x", &["level", "gap"]);
        t.push_values(&[1.0, 0.0]);
        assert!(svg_plot(&t, "level", &["gap"]).is_none());
        t.push_values(&[2.0, 0.5]);
        assert!(svg_plot(&t, "level", &["gap"]).unwrap().contains("polyline"));
    }
}
