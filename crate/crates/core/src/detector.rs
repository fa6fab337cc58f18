//! Style-consistency detection between a source text and its translation.
//!
//! A translation is flagged when the target-language detector's probability
//! for the source's detected style falls below the threshold `h`. Larger `h`
//! flags more.

use serde::{Deserialize, Serialize};

use crate::backend::{BackendSet, ModelBackend, StyleDistribution};
use crate::error::{Error, Result};
use crate::harness::profile::StyleProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Threshold `h` in `(0, 1)`.
    pub threshold: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

impl DetectionConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        let c = Self { threshold };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold h must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// A text with its language tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment<'a> {
    pub text: &'a str,
    pub language: &'a str,
}

impl<'a> Segment<'a> {
    pub fn new(text: &'a str, language: &'a str) -> Self {
        Self { text, language }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub source_label: String,
    pub source_confidence: f64,
    pub translation_confidence_for_source_label: f64,
    pub flagged: bool,
    pub threshold_used: f64,
}

impl DetectionVerdict {
    /// Apply the flag rule to already-computed confidences.
    pub fn from_confidences(
        source_label: impl Into<String>,
        source_confidence: f64,
        translation_confidence: f64,
        config: &DetectionConfig,
    ) -> Self {
        Self {
            source_label: source_label.into(),
            source_confidence,
            translation_confidence_for_source_label: translation_confidence,
            flagged: is_flagged(translation_confidence, config.threshold),
            threshold_used: config.threshold,
        }
    }
}

/// The flag rule: `confidence < h`.
pub fn is_flagged(confidence: f64, threshold: f64) -> bool {
    confidence < threshold
}

/// Style distribution of `text` under the `language` detector.
pub fn detect_style(text: &str, language: &str, backend: &dyn ModelBackend) -> Result<StyleDistribution> {
    if !backend.descriptor().declares_language(language) {
        return Err(Error::Unsupported(format!("language {language:?}")));
    }
    backend.classify_style(text, language)
}

/// Check that the detector's labels cover the profile's labels.
fn check_alignment(dist: &StyleDistribution, profile: &StyleProfile, language: &str) -> Result<()> {
    let missing: Vec<&String> = profile.labels.iter().filter(|l| dist.prob(l).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "{language} detector labels {:?} do not cover profile labels {missing:?}",
            dist.labels()
        )));
    }
    Ok(())
}

/// Most probable profile label under `dist`; ties follow profile order.
pub fn profile_argmax<'p>(dist: &StyleDistribution, profile: &'p StyleProfile) -> Result<(&'p str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for label in &profile.labels {
        let p = dist
            .prob(label)
            .ok_or_else(|| Error::Config(format!("detector lacks label {label:?}")))?;
        if best.is_none_or(|(_, q)| p > q) {
            best = Some((label, p));
        }
    }
    best.ok_or_else(|| Error::Config("profile has no labels".into()))
}

/// Probability the `language` detector assigns to `label` for `text`.
pub fn style_score(text: &str, language: &str, label: &str, backend: &dyn ModelBackend) -> Result<f64> {
    let dist = detect_style(text, language, backend)?;
    dist.prob(label)
        .ok_or_else(|| Error::Config(format!("{language} detector lacks label {label:?}")))
}

pub fn check_consistency(
    source: Segment<'_>,
    translation: Segment<'_>,
    profile: &StyleProfile,
    config: &DetectionConfig,
    backends: &BackendSet,
) -> Result<DetectionVerdict> {
    config.validate()?;
    let src_dist = detect_style(source.text, source.language, backends.get(source.language)?.as_ref())?;
    check_alignment(&src_dist, profile, source.language)?;
    let tgt_dist = detect_style(
        translation.text,
        translation.language,
        backends.get(translation.language)?.as_ref(),
    )?;
    check_alignment(&tgt_dist, profile, translation.language)?;
    let (label, confidence) = profile_argmax(&src_dist, profile)?;
    let translated = tgt_dist.prob(label).expect("alignment checked");
    Ok(DetectionVerdict::from_confidences(
        label, confidence, translated, config,
    ))
}

/// Counts with the inconsistent class as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Confusion matrix plus its derived rates; a rate is `None` when its
/// denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionScores {
    pub matrix: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
}

impl From<ConfusionMatrix> for ConfusionScores {
    fn from(matrix: ConfusionMatrix) -> Self {
        Self {
            matrix,
            precision: matrix.precision(),
            recall: matrix.recall(),
            fpr: matrix.fpr(),
        }
    }
}

/// Compare flags against gold labels (`true` = inconsistent).
pub fn score_confusion(verdicts: &[DetectionVerdict], gold: &[bool]) -> Result<ConfusionScores> {
    score_flags(&verdicts.iter().map(|v| v.flagged).collect::<Vec<_>>(), gold)
}

pub fn score_flags(flags: &[bool], gold: &[bool]) -> Result<ConfusionScores> {
    if flags.len() != gold.len() {
        return Err(Error::shape(format!("{} gold labels", flags.len()), gold.len()));
    }
    let mut m = ConfusionMatrix::default();
    for (&f, &g) in flags.iter().zip(gold) {
        m.record(f, g);
    }
    Ok(m.into())
}
