use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{RiskReport, SweepResult, TailCurve};
use crate::error::{Error, Result};
use crate::matrix::fmt_real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::Parse(format!("unknown output format {other:?}"))),
        }
    }
}

/// A scatter series for the log-log plot, with an optional fitted power law
/// `y = constant * x^slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<(f64, f64)>,
}

/// Results that can be written by [`emit`].
pub trait Emit: Serialize {
    fn csv_header() -> &'static [&'static str];
    fn csv_rows(&self) -> Vec<Vec<String>>;
    /// The plot series, if this result has one.
    fn series(&self) -> Option<Series> {
        None
    }
}

pub const RISK_CSV_COLUMNS: &[&str] = &[
    "n1",
    "n2",
    "s",
    "trials",
    "mean",
    "std_err",
    "q05",
    "q95",
    "min",
    "max",
    "elapsed_secs",
];

pub const SWEEP_CSV_COLUMNS: &[&str] = &[
    "label",
    "n1",
    "n2",
    "s",
    "rate",
    "trials",
    "mean",
    "std_err",
    "q05",
    "q95",
    "min",
    "max",
    "slope",
    "intercept",
    "r_squared",
];

pub const TAIL_CSV_COLUMNS: &[&str] = &["n1", "n2", "k", "k1", "trials", "delta", "exceedance"];

fn risk_cells(r: &RiskReport) -> Vec<String> {
    vec![
        r.n1.to_string(),
        r.n2.to_string(),
        r.s.to_string(),
        r.trials.to_string(),
        fmt_real(r.mean),
        fmt_real(r.std_err),
        fmt_real(r.q05),
        fmt_real(r.q95),
        fmt_real(r.min),
        fmt_real(r.max),
    ]
}

impl Emit for RiskReport {
    fn csv_header() -> &'static [&'static str] {
        RISK_CSV_COLUMNS
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut row = risk_cells(self);
        row.push(fmt_real(self.elapsed_secs));
        vec![row]
    }
}

impl Emit for SweepResult {
    fn csv_header() -> &'static [&'static str] {
        SWEEP_CSV_COLUMNS
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|row| {
                let cells = risk_cells(&row.risk);
                let mut out = vec![self.label.clone()];
                out.extend_from_slice(&cells[..3]);
                out.push(fmt_real(row.rate));
                out.extend_from_slice(&cells[3..]);
                out.push(fmt_real(self.fit.slope));
                out.push(fmt_real(self.fit.intercept));
                out.push(fmt_real(self.fit.r_squared));
                out
            })
            .collect()
    }

    fn series(&self) -> Option<Series> {
        Some(Series {
            label: self.label.clone(),
            points: self.rows.iter().map(|r| (r.rate, r.risk.mean)).collect(),
            fit: Some((self.fit.fitted_constant, self.fit.slope)),
        })
    }
}

impl Emit for TailCurve {
    fn csv_header() -> &'static [&'static str] {
        TAIL_CSV_COLUMNS
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.deltas
            .iter()
            .zip(&self.exceedance)
            .map(|(d, p)| {
                vec![
                    self.n1.to_string(),
                    self.n2.to_string(),
                    fmt_real(self.k),
                    fmt_real(self.k1),
                    self.trials.to_string(),
                    fmt_real(*d),
                    fmt_real(*p),
                ]
            })
            .collect()
    }

    fn series(&self) -> Option<Series> {
        let points: Vec<(f64, f64)> = self
            .deltas
            .iter()
            .zip(&self.exceedance)
            .filter(|(_, p)| **p > 0.0)
            .map(|(d, p)| (*d, *p))
            .collect();
        Some(Series {
            label: format!("tail {}x{} K1={}", self.n1, self.n2, self.k1),
            points,
            fit: None,
        })
    }
}

/// Renders `results` in `format`.
pub fn render<T: Emit>(results: &[T], format: OutputFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::domain("nothing to emit"));
    }
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(results)? + "\n"),
        OutputFormat::Csv => {
            let mut out = T::csv_header().join(",");
            out.push('\n');
            for row in results.iter().flat_map(|r| r.csv_rows()) {
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        OutputFormat::Svg => {
            let series = results
                .iter()
                .map(|r| r.series())
                .collect::<Option<Vec<Series>>>()
                .ok_or_else(|| Error::domain("these results have no plot form"))?;
            svg(&series)
        }
    }
}

/// Writes `results` to `path`.
pub fn emit<T: Emit>(results: &[T], format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render(results, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Log-log scatter, one `<path>` per series: the fitted line when present,
/// otherwise a polyline through the points.
fn svg(series: &[Series]) -> Result<String> {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    if pts().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::domain("log-log plots need positive coordinates"));
    }
    if pts().next().is_none() {
        return Err(Error::domain("no points to plot"));
    }
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = pts()
            .map(|p| f(p).log10())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| MARGIN + (x.log10() - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y.log10() - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}" stroke="black"/>"#
    );
    for dec in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(10f64.powi(dec));
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{dec}</text>"#,
            bottom + 16.0
        );
    }
    for dec in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(10f64.powi(dec));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{y:.2}" font-size="11" text-anchor="end">1e{dec}</text>"#,
            left - 6.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(out, r#"<g><title>{}</title>"#, escape(&s.label));
        for (x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(*x),
                sy(*y)
            );
        }
        let line: Vec<(f64, f64)> = match s.fit {
            Some((c, slope)) => {
                let xs = s.points.iter().map(|p| p.0);
                let lo = xs.clone().fold(f64::INFINITY, f64::min);
                let hi = xs.fold(0.0, f64::max);
                vec![(lo, c * lo.powf(slope)), (hi, c * hi.powf(slope))]
            }
            None => s.points.clone(),
        };
        let d: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(j, (x, y))| {
                format!(
                    "{}{:.2} {:.2}",
                    if j == 0 { "M" } else { "L" },
                    sx(*x),
                    sy(*y)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{}</text>"#,
            right - 150.0,
            top + 16.0 * (i + 1) as f64,
            escape(&s.label)
        );
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{RateFit, RateFormula, SweepRow};

    fn report(n1: usize, mean: f64) -> RiskReport {
        RiskReport {
            n1,
            n2: 32,
            s: 2,
            trials: 10,
            mean,
            std_err: mean / 7.0,
            q05: mean / 3.0,
            q95: mean * 1.7,
            min: 0.1 / 3.0,
            max: mean * 2.0,
            elapsed_secs: 0.25,
        }
    }

    fn sweep(label: &str) -> SweepResult {
        SweepResult {
            label: label.into(),
            formula: RateFormula::Hard,
            fit: RateFit {
                slope: 1.01,
                intercept: -0.3,
                r_squared: 0.99,
                fitted_constant: (-0.3f64).exp(),
            },
            rows: [2, 4, 8, 16]
                .iter()
                .map(|&n1| SweepRow {
                    rate: n1 as f64 * 6.1,
                    risk: report(n1, n1 as f64 * 4.3),
                })
                .collect(),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let reports = vec![report(2, 1.0 / 3.0), report(4, std::f64::consts::PI)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("risk.json");
        emit(&reports, OutputFormat::Json, &path).unwrap();
        let back: Vec<RiskReport> =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, reports);
    }

    #[test]
    fn csv_header_and_cells() {
        let text = render(&[report(2, 1.0 / 3.0)], OutputFormat::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RISK_CSV_COLUMNS.join(","));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), RISK_CSV_COLUMNS.len());
        assert_eq!(cells[4].parse::<f64>().unwrap(), 1.0 / 3.0);

        let text = render(&[sweep("a")], OutputFormat::Csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_COLUMNS.join(","));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn one_path_per_series() {
        for n in 1..4 {
            let results: Vec<SweepResult> = (0..n).map(|i| sweep(&format!("s{i}"))).collect();
            let text = render(&results, OutputFormat::Svg).unwrap();
            assert_eq!(text.matches("<path").count(), n);
            assert!(text.starts_with("<svg"));
        }
    }

    #[test]
    fn errors() {
        let empty: [RiskReport; 0] = [];
        assert!(render(&empty, OutputFormat::Json).is_err());
        assert!(render(&[report(2, 1.0)], OutputFormat::Svg).is_err());
        let err = emit(
            &[report(2, 1.0)],
            OutputFormat::Csv,
            "/nonexistent/dir/x.csv",
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
        assert!(OutputFormat::from_name("png").is_err());
    }
}
