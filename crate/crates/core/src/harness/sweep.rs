//! One-parameter sweeps over the detection threshold `h`, the sampling
//! temperature and the guidance strength.
//!
//! Every grid point reuses the same master seed so points differ only in
//! the swept value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::backend::BackendSet;
use crate::detector::{check_consistency, is_flagged, score_flags, ConfusionScores, Segment};
use crate::error::{Error, Result};
use crate::harness::evaluate::{evaluate_translated, Exclusion, TranslatedRecord};
use crate::harness::profile::StyleProfile;
use crate::repair::RepairConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    H,
    Tau,
    Lambda,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::H => "h",
            SweepParam::Tau => "tau",
            SweepParam::Lambda => "lambda",
        }
    }

    /// `config` with this parameter set to `value`.
    pub fn apply(self, config: &RepairConfig, value: f64) -> RepairConfig {
        let mut c = *config;
        match self {
            SweepParam::H => c.detection.threshold = value,
            SweepParam::Tau => c.diffusion.temperature = value,
            SweepParam::Lambda => c.diffusion.guidance_strength = value,
        }
        c
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(SweepParam::H),
            "tau" | "τ" => Ok(SweepParam::Tau),
            "lambda" | "λ" => Ok(SweepParam::Lambda),
            _ => Err(Error::validation(format!(
                "unknown sweep parameter {s:?}; expected h, tau or lambda"
            ))),
        }
    }
}

/// Metrics at one grid value. Threshold sweeps fill the detection fields,
/// temperature and strength sweeps fill the repair fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub flagged: Option<usize>,
    pub confusion: Option<ConfusionScores>,
    pub remaining_issues: Option<usize>,
    pub style_score: Option<f64>,
    pub sts_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParam,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub evaluated: usize,
    pub exclusions: Vec<Exclusion>,
}

/// Grids must be non-empty, finite and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation("sweep grid is empty"));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite grid value {v}")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("sweep grid must be strictly increasing"));
    }
    Ok(())
}

/// Flag counts and confusion scores of fixed confidences at each threshold.
/// `gold`, when given, must be parallel to `confidences`.
pub fn threshold_sweep(confidences: &[f64], gold: Option<&[bool]>, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    validate_grid(grid)?;
    grid.iter()
        .map(|&h| {
            let flags: Vec<bool> = confidences.iter().map(|&c| is_flagged(c, h)).collect();
            let confusion = gold.map(|g| score_flags(&flags, g)).transpose()?;
            Ok(SweepPoint {
                value: h,
                flagged: Some(flags.iter().filter(|&&f| f).count()),
                confusion,
                remaining_issues: None,
                style_score: None,
                sts_mean: None,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_parameter(
    param: SweepParam,
    grid: &[f64],
    config: &RepairConfig,
    records: &[TranslatedRecord],
    profile: &StyleProfile,
    backends: &BackendSet,
    gold: Option<&HashMap<String, bool>>,
    seed: u64,
) -> Result<SweepResult> {
    validate_grid(grid)?;
    for &v in grid {
        param.apply(config, v).validate()?;
    }
    match param {
        SweepParam::H => sweep_threshold(grid, config, records, profile, backends, gold),
        _ => sweep_repair(param, grid, config, records, profile, backends, seed),
    }
}

fn sweep_threshold(
    grid: &[f64],
    config: &RepairConfig,
    records: &[TranslatedRecord],
    profile: &StyleProfile,
    backends: &BackendSet,
    gold: Option<&HashMap<String, bool>>,
) -> Result<SweepResult> {
    // The confidence does not depend on h, so detect once.
    let detected: Vec<(usize, Result<f64>)> = records
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let v = check_consistency(
                Segment::new(&t.record.text, &t.record.lang),
                Segment::new(&t.translation, &t.target_lang),
                profile,
                &config.detection,
                backends,
            );
            (i, v.map(|v| v.translation_confidence_for_source_label))
        })
        .collect();
    let mut confidences = Vec::new();
    let mut ids = Vec::new();
    let mut exclusions = Vec::new();
    for (i, r) in detected {
        let rec = &records[i].record;
        match r {
            Ok(c) => {
                confidences.push(c);
                ids.push(rec.id.as_str());
            }
            Err(e) => {
                log::warn!("excluding {}: {e}", rec.id);
                exclusions.push(Exclusion {
                    id: rec.id.clone(),
                    domain: rec.domain.clone(),
                    stage: "detect".into(),
                    error: e.to_string(),
                });
            }
        }
    }
    let points = match gold {
        Some(g) => {
            let (conf, truth): (Vec<f64>, Vec<bool>) = confidences
                .iter()
                .zip(&ids)
                .filter_map(|(&c, id)| g.get(*id).map(|&t| (c, t)))
                .unzip();
            let mut labelled = threshold_sweep(&conf, Some(&truth), grid)?;
            // Flag counts cover every evaluated record, labelled or not.
            let all = threshold_sweep(&confidences, None, grid)?;
            for (p, a) in labelled.iter_mut().zip(all) {
                p.flagged = a.flagged;
            }
            labelled
        }
        None => threshold_sweep(&confidences, None, grid)?,
    };
    Ok(SweepResult {
        parameter: SweepParam::H,
        grid: grid.to_vec(),
        points,
        evaluated: confidences.len(),
        exclusions,
    })
}

fn sweep_repair(
    param: SweepParam,
    grid: &[f64],
    config: &RepairConfig,
    records: &[TranslatedRecord],
    profile: &StyleProfile,
    backends: &BackendSet,
    seed: u64,
) -> Result<SweepResult> {
    let sources: Vec<_> = records.iter().map(|t| t.record.clone()).collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut evaluated = 0;
    let mut exclusions = Vec::new();
    for &v in grid {
        let cfg = param.apply(config, v);
        log::info!("sweep {param}={v}");
        let report = evaluate_translated(
            param.name(),
            &sources,
            records,
            Vec::new(),
            profile,
            &cfg,
            backends,
            None,
            seed,
        )?;
        let n = report.records.len();
        let remaining = report.records.iter().filter(|o| o.final_flagged).count();
        let style = (n > 0).then(|| report.records.iter().map(|o| o.final_confidence).sum::<f64>() / n as f64);
        let sts: Vec<f64> = report.records.iter().filter_map(|o| o.selected_sts()).collect();
        points.push(SweepPoint {
            value: v,
            flagged: None,
            confusion: None,
            remaining_issues: Some(remaining),
            style_score: style,
            sts_mean: (!sts.is_empty()).then(|| sts.iter().sum::<f64>() / sts.len() as f64),
        });
        evaluated = evaluated.max(n);
        for e in report.exclusions {
            if !exclusions.iter().any(|x: &Exclusion| x.id == e.id) {
                exclusions.push(e);
            }
        }
    }
    Ok(SweepResult {
        parameter: param,
        grid: grid.to_vec(),
        points,
        evaluated,
        exclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.3]).is_ok());
        assert!(validate_grid(&[0.3, 0.3]).is_err());
        assert!(validate_grid(&[0.5, 0.3]).is_err());
        assert!(validate_grid(&[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn threshold_counts_by_brute_force() {
        let conf = [0.1, 0.45, 0.5, 0.7, 0.95];
        let pts = threshold_sweep(&conf, None, &[0.2, 0.5, 0.75, 0.99]).unwrap();
        let counts: Vec<_> = pts.iter().map(|p| p.flagged.unwrap()).collect();
        assert_eq!(counts, vec![1, 2, 4, 5]);
    }

    #[test]
    fn params_parse() {
        assert_eq!("tau".parse::<SweepParam>().unwrap(), SweepParam::Tau);
        assert!("beta".parse::<SweepParam>().is_err());
    }
}
