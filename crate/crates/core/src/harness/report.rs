//! JSON and CSV emission of evaluation and sweep reports.
//!
//! CSV cells follow the table layout: ratios as percentages and scores as
//! plain numbers, both rounded half-up to two decimals; revised columns
//! carry a relative change against the original. Undefined values print as
//! `n/a`. JSON keeps full precision and round-trips.

use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::evaluate::{EvaluationReport, SystemAverage};
use crate::harness::sweep::SweepResult;

pub const UNDEFINED: &str = "n/a";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::validation(format!(
                "unknown report format {s:?}; expected json or csv"
            ))),
        }
    }
}

/// `x` rounded half-up (away from zero) to `decimals` places.
///
/// The value is first printed with 9 extra digits so binary noise such as
/// `0.145 = 0.14499999...` does not defeat the half-up rule.
pub fn round_half_up(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return UNDEFINED.into();
    }
    let wide = format!("{:.*}", decimals + 9, x.abs());
    let (int_part, frac_part) = wide.split_once('.').expect("fixed format has a point");
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes().take(decimals))
        .map(|b| b - b'0')
        .collect();
    if frac_part.as_bytes()[decimals] >= b'5' {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - decimals;
    let mut out = String::new();
    let is_zero = digits.iter().all(|&d| d == 0);
    if x < 0.0 && !is_zero {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| char::from(b'0' + d)));
    if decimals > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// A ratio as a percentage: 0.131481 → "13.15%".
pub fn format_percent(ratio: Option<f64>) -> String {
    match ratio {
        Some(r) if r.is_finite() => format!("{}%", round_half_up(r * 100.0, 2)),
        _ => UNDEFINED.into(),
    }
}

pub fn format_score(score: Option<f64>) -> String {
    match score {
        Some(s) => round_half_up(s, 2),
        None => UNDEFINED.into(),
    }
}

/// Signed relative change from `before` to `after`: "-55.13%".
pub fn format_change(before: Option<f64>, after: Option<f64>) -> String {
    match (before, after) {
        (Some(b), Some(a)) if b != 0.0 => {
            let c = (a - b) / b * 100.0;
            let s = round_half_up(c, 2);
            if s.starts_with('-') {
                format!("{s}%")
            } else {
                format!("+{s}%")
            }
        }
        _ => UNDEFINED.into(),
    }
}

pub const EVALUATION_HEADER: [&str; 13] = [
    "system",
    "domain",
    "total",
    "evaluated",
    "excluded",
    "flagged",
    "bias_ratio",
    "style_score",
    "revised_bias_ratio",
    "revised_bias_change",
    "revised_style_score",
    "revised_style_change",
    "sts_mean",
];

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(cells: &[String]) -> String {
    let mut line = cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn average_cells(a: &SystemAverage) -> Vec<String> {
    vec![
        a.system.clone(),
        "Average".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format_percent(a.bias_ratio),
        format_score(a.style_score),
        format_percent(a.revised_bias_ratio),
        format_change(a.bias_ratio, a.revised_bias_ratio),
        format_score(a.revised_style_score),
        format_change(a.style_score, a.revised_style_score),
        format_score(a.sts_mean),
    ]
}

/// Domain rows, each system followed by its average row. A report without
/// rows yields only the header.
pub fn evaluation_csv(report: &EvaluationReport) -> String {
    let mut out = csv_line(&EVALUATION_HEADER.map(String::from));
    for avg in &report.averages {
        for r in report.rows.iter().filter(|r| r.system == avg.system) {
            out += &csv_line(&[
                r.system.clone(),
                r.domain.clone(),
                r.total.to_string(),
                r.evaluated.to_string(),
                r.excluded.to_string(),
                r.flagged.to_string(),
                format_percent(r.bias_ratio),
                format_score(r.style_score),
                format_percent(r.revised_bias_ratio),
                format_change(r.bias_ratio, r.revised_bias_ratio),
                format_score(r.revised_style_score),
                format_change(r.style_score, r.revised_style_score),
                format_score(r.sts_mean),
            ]);
        }
        out += &csv_line(&average_cells(avg));
    }
    out
}

pub const SWEEP_HEADER: [&str; 9] = [
    "parameter",
    "value",
    "flagged",
    "precision",
    "recall",
    "fpr",
    "remaining_issues",
    "style_score",
    "sts_mean",
];

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = csv_line(&SWEEP_HEADER.map(String::from));
    let count = |c: Option<usize>| c.map_or(UNDEFINED.to_string(), |c| c.to_string());
    for p in &result.points {
        let conf = p.confusion.as_ref();
        out += &csv_line(&[
            result.parameter.name().to_string(),
            p.value.to_string(),
            count(p.flagged),
            format_percent(conf.and_then(|c| c.precision)),
            format_percent(conf.and_then(|c| c.recall)),
            format_percent(conf.and_then(|c| c.fpr)),
            count(p.remaining_issues),
            format_score(p.style_score),
            format_score(p.sts_mean),
        ]);
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn render_evaluation(report: &EvaluationReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => Ok(evaluation_csv(report)),
    }
}

pub fn render_sweep(result: &SweepResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(result),
        ReportFormat::Csv => Ok(sweep_csv(result)),
    }
}

/// Write `contents` to `path` via a sibling temp file and rename.
pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(contents.as_bytes())?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    std::fs::rename(&tmp.0, path)?;
    Ok(())
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(std::path::PathBuf, std::fs::File)> {
    let name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let f = std::fs::File::create(&tmp)?;
    Ok((tmp, f))
}

pub fn emit_evaluation(report: &EvaluationReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    write_file(path, &render_evaluation(report, format)?)
}

pub fn emit_sweep(result: &SweepResult, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    write_file(path, &render_sweep(result, format)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up() {
        assert_eq!(round_half_up(13.1481, 2), "13.15");
        assert_eq!(round_half_up(0.145, 2), "0.15");
        assert_eq!(round_half_up(2.675, 2), "2.68");
        assert_eq!(round_half_up(9.995, 2), "10.00");
        assert_eq!(round_half_up(-0.004, 2), "0.00");
        assert_eq!(round_half_up(-1.005, 2), "-1.01");
        assert_eq!(round_half_up(3.0, 0), "3");
    }

    #[test]
    fn percent_and_change() {
        assert_eq!(format_percent(Some(0.131481)), "13.15%");
        assert_eq!(format_percent(None), "n/a");
        assert_eq!(format_change(Some(0.2), Some(0.1)), "-50.00%");
        assert_eq!(format_change(Some(0.5), Some(0.55)), "+10.00%");
        assert_eq!(format_change(Some(0.0), Some(0.1)), "n/a");
    }

    #[test]
    fn quoting() {
        assert_eq!(csv_cell("a,b"), "\"a,b\"");
        assert_eq!(csv_cell("x\"y"), "\"x\"\"y\"");
    }
}
