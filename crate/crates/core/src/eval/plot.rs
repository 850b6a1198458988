use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One named curve. Several runs of the same curve are drawn as their mean
/// with a shaded band of one standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub runs: Vec<Vec<f64>>,
}

impl PlotSeries {
    pub fn single(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            runs: vec![values],
        }
    }

    /// Pointwise mean and population std over runs, truncated to the shortest run.
    pub fn mean_std(&self) -> (Vec<f64>, Vec<f64>) {
        let len = self.runs.iter().map(Vec::len).min().unwrap_or(0);
        let k = self.runs.len() as f64;
        (0..len)
            .map(|i| {
                let m = self.runs.iter().map(|r| r[i]).sum::<f64>() / k;
                let v = self.runs.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / k;
                (m, v.sqrt())
            })
            .unzip()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a line chart. Output depends only on the inputs.
pub fn render_svg(title: &str, series: &[PlotSeries]) -> Result<String> {
    let stats: Vec<(Vec<f64>, Vec<f64>)> = series.iter().map(PlotSeries::mean_std).collect();
    if stats.iter().all(|(m, _)| m.is_empty()) {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    let values = stats
        .iter()
        .flat_map(|(m, s)| m.iter().zip(s).flat_map(|(m, s)| [m - s, m + s]));
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite("plot values".into()));
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let n = stats.iter().map(|(m, _)| m.len()).max().unwrap_or(1).max(2);
    let sx = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1) as f64;
    let sy = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        esc(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for (v, y) in [(lo, y0), (hi, y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y:.3}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            x0 - 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{x1}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
        y0 + 16.0,
        n - 1
    );

    for (k, (s, (mean, std))) in series.iter().zip(&stats).enumerate() {
        if mean.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        if s.runs.len() > 1 {
            let mut d = String::new();
            for (i, (m, sd)) in mean.iter().zip(std).enumerate() {
                let _ = write!(d, "{}{:.3} {:.3} ", if i == 0 { "M" } else { "L" }, sx(i), sy(m + sd));
            }
            for (i, (m, sd)) in mean.iter().zip(std).enumerate().rev() {
                let _ = write!(d, "L{:.3} {:.3} ", sx(i), sy(m - sd));
            }
            let _ = writeln!(
                out,
                r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                d
            );
        }
        let mut d = String::new();
        for (i, m) in mean.iter().enumerate() {
            let _ = write!(d, "{}{:.3} {:.3}", if i == 0 { "M" } else { " L" }, sx(i), sy(*m));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            x1 - 150.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            esc(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Reads `column` from each CSV; every file becomes one run of a single series.
pub fn series_from_csvs(paths: &[impl AsRef<Path>], column: &str) -> Result<PlotSeries> {
    let mut runs = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
            .clone();
        let idx = headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::Parse(format!("{}: no column `{column}`", path.display())))?;
        let mut run = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let field = rec.get(idx).unwrap_or("");
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    line + 2
                ))
            })?;
            run.push(v);
        }
        runs.push(run);
    }
    if runs.is_empty() {
        return Err(Error::InvalidInput("no input files".into()));
    }
    Ok(PlotSeries {
        name: column.to_string(),
        runs,
    })
}
