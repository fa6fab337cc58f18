//! End-to-end evaluation: translate, detect, repair flagged records and
//! aggregate per (system, domain).
//!
//! Style scores are detector confidences for the source style and are only
//! comparable within one dataset and detector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

use crate::applicator::GuidanceSet;
use crate::backend::BackendSet;
use crate::detector::{check_consistency, is_flagged, score_flags, ConfusionScores, DetectionVerdict, Segment};
use crate::error::{Error, Result};
use crate::harness::corpus::{split_key, CorpusRecord};
use crate::harness::profile::StyleProfile;
use crate::harness::translate::Translator;
use crate::repair::{repair_with, RepairConfig, RepairResult};

pub const STYLE_SCORE_CAVEAT: &str = "style scores are detector confidences and are comparable only within one dataset";

/// A source record with its machine translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedRecord {
    pub record: CorpusRecord,
    pub target_lang: String,
    pub translation: String,
}

/// Records that could not be processed, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub domain: String,
    pub stage: String,
    pub error: String,
}

/// Translate every record. Failures are returned, not dropped.
pub fn translate_records(
    records: &[CorpusRecord],
    client: &dyn Translator,
    target_lang: &str,
) -> (Vec<TranslatedRecord>, Vec<Exclusion>) {
    let results: Vec<_> = records
        .par_iter()
        .map(|r| {
            client
                .translate(&r.text, &r.lang, target_lang)
                .map(|translation| TranslatedRecord {
                    record: r.clone(),
                    target_lang: target_lang.to_string(),
                    translation,
                })
                .map_err(|e| Exclusion {
                    id: r.id.clone(),
                    domain: r.domain.clone(),
                    stage: "translate".into(),
                    error: e.to_string(),
                })
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => {
                log::warn!("excluding {}: {}", e.id, e.error);
                failed.push(e);
            }
        }
    }
    (ok, failed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub domain: String,
    pub translation: String,
    pub verdict: DetectionVerdict,
    pub repair: Option<RepairResult>,
    pub final_text: String,
    pub final_confidence: f64,
    pub final_flagged: bool,
}

impl RecordOutcome {
    /// STS of the selected rewrite, if a rewrite was selected.
    pub fn selected_sts(&self) -> Option<f64> {
        self.repair.as_ref().and_then(|r| r.selected()).map(|c| c.sts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub system: String,
    pub domain: String,
    pub total: usize,
    pub evaluated: usize,
    pub excluded: usize,
    pub flagged: usize,
    pub bias_ratio: Option<f64>,
    pub style_score: Option<f64>,
    pub revised_flagged: usize,
    pub revised_bias_ratio: Option<f64>,
    pub revised_style_score: Option<f64>,
    /// Records for which a rewrite passed the semantic gate.
    pub repaired: usize,
    /// Mean STS of selected rewrites; `None` when nothing was rewritten.
    pub sts_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAverage {
    pub system: String,
    pub bias_ratio: Option<f64>,
    pub style_score: Option<f64>,
    pub revised_bias_ratio: Option<f64>,
    pub revised_style_score: Option<f64>,
    pub sts_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<DomainRow>,
    pub averages: Vec<SystemAverage>,
    pub confusion: Option<ConfusionScores>,
    pub exclusions: Vec<Exclusion>,
    pub records: Vec<RecordOutcome>,
    pub note: String,
}

impl EvaluationReport {
    pub fn empty() -> Self {
        Self {
            rows: Vec::new(),
            averages: Vec::new(),
            confusion: None,
            exclusions: Vec::new(),
            records: Vec::new(),
            note: STYLE_SCORE_CAVEAT.into(),
        }
    }
}

/// Per-record seed derived from the master seed and the record id.
pub fn record_seed(master: u64, id: &str) -> u64 {
    let k = split_key(master, id);
    u64::from_le_bytes(k[..8].try_into().expect("8 bytes"))
}

/// Mean of the present values; `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Evaluate one translation system.
///
/// `gold` optionally maps record ids to human inconsistency labels; when
/// present the report carries detection confusion scores over the labelled
/// records.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_system(
    system: &str,
    records: &[CorpusRecord],
    client: &dyn Translator,
    target_lang: &str,
    profile: &StyleProfile,
    config: &RepairConfig,
    backends: &BackendSet,
    gold: Option<&HashMap<String, bool>>,
    seed: u64,
) -> Result<EvaluationReport> {
    let (translated, exclusions) = translate_records(records, client, target_lang);
    evaluate_translated(
        system,
        records,
        &translated,
        exclusions,
        profile,
        config,
        backends,
        gold,
        seed,
    )
}

/// Evaluation over already-translated records. `records` is the full input
/// set, used for per-domain totals.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_translated(
    system: &str,
    records: &[CorpusRecord],
    translated: &[TranslatedRecord],
    mut exclusions: Vec<Exclusion>,
    profile: &StyleProfile,
    config: &RepairConfig,
    backends: &BackendSet,
    gold: Option<&HashMap<String, bool>>,
    seed: u64,
) -> Result<EvaluationReport> {
    config.validate()?;
    let mut guidance: BTreeMap<(String, String), GuidanceSet> = BTreeMap::new();
    for t in translated {
        for label in &profile.labels {
            let key = (t.target_lang.clone(), label.clone());
            if let std::collections::btree_map::Entry::Vacant(e) = guidance.entry(key) {
                let backend = backends.get(&t.target_lang)?;
                e.insert(profile.guidance(&t.target_lang, label, backend.as_ref())?);
            }
        }
    }

    let outcomes: Vec<std::result::Result<RecordOutcome, Exclusion>> = translated
        .par_iter()
        .map(|t| {
            evaluate_record(t, profile, config, backends, &guidance, seed).map_err(|e| {
                log::warn!("excluding {}: {e}", t.record.id);
                Exclusion {
                    id: t.record.id.clone(),
                    domain: t.record.domain.clone(),
                    stage: "detect_or_repair".into(),
                    error: e.to_string(),
                }
            })
        })
        .collect();
    let mut done = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => done.push(r),
            Err(e) => exclusions.push(e),
        }
    }

    let mut domains: Vec<String> = Vec::new();
    for r in records {
        if !domains.contains(&r.domain) {
            domains.push(r.domain.clone());
        }
    }
    let rows: Vec<DomainRow> = domains
        .iter()
        .map(|d| {
            let total = records.iter().filter(|r| &r.domain == d).count();
            let outs: Vec<&RecordOutcome> = done.iter().filter(|o| &o.domain == d).collect();
            let excluded = exclusions.iter().filter(|e| &e.domain == d).count();
            let n = outs.len();
            let flagged = outs.iter().filter(|o| o.verdict.flagged).count();
            let revised_flagged = outs.iter().filter(|o| o.final_flagged).count();
            let sts: Vec<Option<f64>> = outs.iter().map(|o| o.selected_sts()).collect();
            DomainRow {
                system: system.to_string(),
                domain: d.clone(),
                total,
                evaluated: n,
                excluded,
                flagged,
                bias_ratio: ratio(flagged, n),
                style_score: mean_defined(
                    outs.iter()
                        .map(|o| Some(o.verdict.translation_confidence_for_source_label)),
                ),
                revised_flagged,
                revised_bias_ratio: ratio(revised_flagged, n),
                revised_style_score: mean_defined(outs.iter().map(|o| Some(o.final_confidence))),
                repaired: sts.iter().flatten().count(),
                sts_mean: mean_defined(sts),
            }
        })
        .collect();
    let averages = average_rows(&rows);

    let confusion = match gold {
        Some(g) => {
            let labelled: Vec<(&RecordOutcome, bool)> =
                done.iter().filter_map(|o| g.get(&o.id).map(|&v| (o, v))).collect();
            let flags: Vec<bool> = labelled.iter().map(|(o, _)| o.verdict.flagged).collect();
            let truth: Vec<bool> = labelled.iter().map(|(_, g)| *g).collect();
            Some(score_flags(&flags, &truth)?)
        }
        None => None,
    };

    Ok(EvaluationReport {
        rows,
        averages,
        confusion,
        exclusions,
        records: done,
        note: STYLE_SCORE_CAVEAT.into(),
    })
}

/// Row means per system, in order of first appearance.
pub fn average_rows(rows: &[DomainRow]) -> Vec<SystemAverage> {
    let mut systems: Vec<&str> = Vec::new();
    for r in rows {
        if !systems.contains(&r.system.as_str()) {
            systems.push(&r.system);
        }
    }
    systems
        .into_iter()
        .map(|s| {
            let rs: Vec<&DomainRow> = rows.iter().filter(|r| r.system == s).collect();
            SystemAverage {
                system: s.to_string(),
                bias_ratio: mean_defined(rs.iter().map(|r| r.bias_ratio)),
                style_score: mean_defined(rs.iter().map(|r| r.style_score)),
                revised_bias_ratio: mean_defined(rs.iter().map(|r| r.revised_bias_ratio)),
                revised_style_score: mean_defined(rs.iter().map(|r| r.revised_style_score)),
                sts_mean: mean_defined(rs.iter().map(|r| r.sts_mean)),
            }
        })
        .collect()
}

fn evaluate_record(
    t: &TranslatedRecord,
    profile: &StyleProfile,
    config: &RepairConfig,
    backends: &BackendSet,
    guidance: &BTreeMap<(String, String), GuidanceSet>,
    seed: u64,
) -> Result<RecordOutcome> {
    let source = Segment::new(&t.record.text, &t.record.lang);
    let target = Segment::new(&t.translation, &t.target_lang);
    let verdict = check_consistency(source, target, profile, &config.detection, backends)?;
    let (repair, final_text, final_confidence) = if verdict.flagged {
        let g = guidance
            .get(&(t.target_lang.clone(), verdict.source_label.clone()))
            .ok_or_else(|| Error::Config(format!("no guidance for {}", verdict.source_label)))?;
        let backend = backends.get(&t.target_lang)?;
        let result = repair_with(
            target,
            &verdict,
            g,
            config,
            backend.as_ref(),
            record_seed(seed, &t.record.id),
        )?;
        let text = result.output().to_string();
        let conf = match result.selected() {
            Some(c) => c.style_score,
            None => verdict.translation_confidence_for_source_label,
        };
        (Some(result), text, conf)
    } else {
        (
            None,
            t.translation.clone(),
            verdict.translation_confidence_for_source_label,
        )
    };
    Ok(RecordOutcome {
        id: t.record.id.clone(),
        domain: t.record.domain.clone(),
        translation: t.translation.clone(),
        final_flagged: is_flagged(final_confidence, config.detection.threshold),
        verdict,
        repair,
        final_text,
        final_confidence,
    })
}
