//! Candidate generation, semantic gating and selection for flagged
//! translations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::applicator::{apply_style, GuidanceSet};
use crate::backend::{BackendSet, ModelBackend};
use crate::detector::{check_consistency, style_score, DetectionConfig, DetectionVerdict, Segment};
use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::harness::profile::StyleProfile;
use crate::tensor;

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub candidate_count: usize,
    pub sts_threshold: f64,
    pub diffusion: DiffusionConfig,
    pub detection: DetectionConfig,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            candidate_count: 4,
            sts_threshold: 0.85,
            diffusion: DiffusionConfig::default(),
            detection: DetectionConfig::default(),
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidate_count == 0 {
            return Err(Error::Config("candidate_count must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.sts_threshold) {
            return Err(Error::Config(format!(
                "sts_threshold must lie in [-1, 1], got {}",
                self.sts_threshold
            )));
        }
        self.diffusion.validate()?;
        self.detection.validate()
    }
}

/// Seed of candidate `k` derived from the master seed.
pub fn candidate_seed(master: u64, k: usize) -> u64 {
    master.wrapping_add((k as u64).wrapping_mul(SEED_STRIDE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Generation index, `0..candidate_count`.
    pub index: usize,
    pub seed: u64,
    pub text: String,
    /// Target-language detector confidence for the source label.
    pub style_score: f64,
    /// Similarity to the original translation.
    pub sts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairResult {
    pub original_translation: String,
    pub source_label: String,
    /// False when repair ran on a pair the detector did not flag.
    pub was_flagged: bool,
    pub candidates: Vec<Candidate>,
    pub failures: Vec<CandidateFailure>,
    /// Position in `candidates` of the chosen rewrite.
    pub selected_index: Option<usize>,
    pub fallback_to_original: bool,
}

impl RepairResult {
    /// The selected candidate's text, or the original translation.
    pub fn output(&self) -> &str {
        match self.selected_index {
            Some(i) => &self.candidates[i].text,
            None => &self.original_translation,
        }
    }

    pub fn selected(&self) -> Option<&Candidate> {
        self.selected_index.map(|i| &self.candidates[i])
    }
}

/// Cosine similarity of sentence embeddings. Identical texts score 1; a
/// text whose embedding vanishes scores 0 against any other text.
pub fn semantic_similarity(a: &str, b: &str, backend: &dyn ModelBackend) -> Result<f64> {
    if a.trim().is_empty() || b.trim().is_empty() {
        return Err(Error::validation("semantic similarity of empty text"));
    }
    if a == b {
        return Ok(1.0);
    }
    let ea = backend.sentence_embed(a)?;
    let eb = backend.sentence_embed(b)?;
    if ea.len() != eb.len() {
        return Err(Error::shape(ea.len(), eb.len()));
    }
    Ok(tensor::cosine(&ea, &eb).unwrap_or(0.0))
}

/// Index of the best `(style_score, sts)` pair that passes the gate: highest
/// style score, then highest STS, then lowest index.
pub fn select_candidate(scores: &[(f64, f64)], sts_threshold: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(style, sts)) in scores.iter().enumerate() {
        // Written this way so a NaN STS never passes.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(sts >= sts_threshold) {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) => {
                let (bs, bt) = scores[j];
                if style > bs || (style == bs && sts > bt) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    best
}

/// Detect, then repair `translation` toward the source's style using the
/// profile's exemplars for that style.
pub fn repair(
    source: Segment<'_>,
    translation: Segment<'_>,
    profile: &StyleProfile,
    config: &RepairConfig,
    backends: &BackendSet,
    seed: u64,
) -> Result<RepairResult> {
    config.validate()?;
    let verdict = check_consistency(source, translation, profile, &config.detection, backends)?;
    let backend = backends.get(translation.language)?;
    let guidance = profile.guidance(translation.language, &verdict.source_label, backend.as_ref())?;
    repair_with(translation, &verdict, &guidance, config, backend.as_ref(), seed)
}

/// Repair given an existing verdict and guidance set.
pub fn repair_with(
    translation: Segment<'_>,
    verdict: &DetectionVerdict,
    guidance: &GuidanceSet,
    config: &RepairConfig,
    backend: &dyn ModelBackend,
    seed: u64,
) -> Result<RepairResult> {
    config.validate()?;
    if !verdict.flagged {
        log::info!("repairing a translation the detector did not flag");
    }
    let label = verdict.source_label.as_str();
    let outcomes: Vec<(usize, u64, Result<Candidate>)> = (0..config.candidate_count)
        .into_par_iter()
        .map(|k| {
            let s = candidate_seed(seed, k);
            let run = || -> Result<Candidate> {
                let text = apply_style(translation.text, guidance, &config.diffusion, backend, s)?;
                let style = style_score(&text, translation.language, label, backend)?;
                let sts = semantic_similarity(&text, translation.text, backend)?;
                Ok(Candidate {
                    index: k,
                    seed: s,
                    text,
                    style_score: style,
                    sts,
                })
            };
            (k, s, run())
        })
        .collect();

    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for (index, seed, outcome) in outcomes {
        match outcome {
            Ok(c) => candidates.push(c),
            Err(e) => {
                log::warn!("repair candidate {index} failed: {e}");
                failures.push(CandidateFailure {
                    index,
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::CandidatesFailed {
            count: failures.len(),
            diagnostics: failures.iter().map(|f| f.error.clone()).collect(),
        });
    }
    let scores: Vec<(f64, f64)> = candidates.iter().map(|c| (c.style_score, c.sts)).collect();
    let selected_index = select_candidate(&scores, config.sts_threshold);
    Ok(RepairResult {
        original_translation: translation.text.to_string(),
        source_label: label.to_string(),
        was_flagged: verdict.flagged,
        candidates,
        failures,
        selected_index,
        fallback_to_original: selected_index.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_excludes_high_style_low_sts() {
        assert_eq!(select_candidate(&[(0.9, 0.84), (0.7, 0.90)], 0.85), Some(1));
    }

    #[test]
    fn nothing_passes() {
        assert_eq!(select_candidate(&[(0.9, 0.1), (0.7, 0.2)], 0.85), None);
        assert_eq!(select_candidate(&[], 0.85), None);
    }

    #[test]
    fn ties_prefer_sts_then_index() {
        assert_eq!(select_candidate(&[(0.8, 0.9), (0.8, 0.95), (0.8, 0.95)], 0.85), Some(1));
    }

    #[test]
    fn nan_sts_never_passes() {
        assert_eq!(select_candidate(&[(0.9, f64::NAN)], 0.0), None);
    }

    #[test]
    fn candidate_seeds_are_distinct() {
        let s: std::collections::HashSet<_> = (0..4).map(|k| candidate_seed(7, k)).collect();
        assert_eq!(s.len(), 4);
        assert_eq!(candidate_seed(7, 0), 7);
    }

    #[test]
    fn config_validation() {
        let mut c = RepairConfig::default();
        assert!(c.validate().is_ok());
        c.candidate_count = 0;
        assert!(c.validate().is_err());
        c.candidate_count = 4;
        c.sts_threshold = 1.5;
        assert!(c.validate().is_err());
    }
}
