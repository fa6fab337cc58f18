//! One interface over every learned component: tokenizer, token embedder,
//! style embedder, per-language style classifier, paraphraser and denoiser.
//!
//! Two implementations ship with the crate: [`ReferenceBackend`], a small
//! deterministic stand-in trainable in seconds, and [`RemoteBackend`], a
//! JSON-over-HTTP client for an external model server (see
//! `docs/protocol.md`). Everything downstream is written against
//! [`ModelBackend`] and runs unchanged on either.

pub mod reference;
pub mod remote;
pub mod server;
mod text;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::diffusion::Timestep;
use crate::error::{Error, Result};
use crate::tensor::{EmbeddingMatrix, LogitsMatrix};

pub use reference::{ReferenceBackend, ReferenceConfig, Vocabulary};
pub use remote::{RemoteBackend, RemoteConfig};
pub use server::ProtocolServer;
pub use text::{Paraphraser, RuleTable};

/// Token ids plus the vocabulary size they were drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<u32>,
    vocab_size: u32,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>, vocab_size: u32) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::validation("vocab_size must be positive"));
        }
        if let Some(bad) = ids.iter().find(|&&id| id >= vocab_size) {
            return Err(Error::validation(format!(
                "token id {bad} outside vocabulary of size {vocab_size}"
            )));
        }
        Ok(Self { ids, vocab_size })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Probability per style label. Label order is the detector's declared order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl StyleDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() || labels.is_empty() {
            return Err(Error::validation(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation("probabilities must be finite and >= 0"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels.iter().map(String::as_str).zip(self.probs.iter().copied())
    }

    /// Most probable label; ties go to the label listed first in `order`,
    /// then to declaration order.
    pub fn argmax_with_order(&self, order: &[String]) -> &str {
        let rank = |label: &str| order.iter().position(|o| o == label).unwrap_or(usize::MAX);
        let mut best = 0;
        for i in 1..self.labels.len() {
            let (p, q) = (self.probs[i], self.probs[best]);
            if p > q || (p == q && rank(&self.labels[i]) < rank(&self.labels[best])) {
                best = i;
            }
        }
        &self.labels[best]
    }

    pub fn argmax(&self) -> &str {
        self.argmax_with_order(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Tokenize,
    Embed,
    StyleEmbed,
    Classify,
    Paraphrase,
    Denoise,
}

impl Capability {
    pub const ALL: [Capability; 6] = [
        Capability::Tokenize,
        Capability::Embed,
        Capability::StyleEmbed,
        Capability::Classify,
        Capability::Paraphrase,
        Capability::Denoise,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Reference,
    Remote,
}

/// What a backend can do and the shapes it works in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub embedding_dim: usize,
    pub vocab_size: usize,
    pub style_labels: Vec<String>,
    pub languages: Vec<String>,
    pub max_sequence_len: usize,
    pub capabilities: Vec<Capability>,
    pub endpoint: Option<String>,
}

impl BackendDescriptor {
    pub fn supports(&self, cap: Capability) -> bool {
        self.capabilities.contains(&cap)
    }

    pub fn declares_language(&self, lang: &str) -> bool {
        self.languages.iter().any(|l| l == lang)
    }
}

/// The learned components, behind one object-safe interface.
///
/// Implementations are pure functions of their inputs and their own state;
/// concurrent read-only use from several threads must be safe.
pub trait ModelBackend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn tokenize(&self, text: &str) -> Result<TokenSequence>;

    fn detokenize(&self, tokens: &TokenSequence) -> Result<String>;

    /// One embedding row per token.
    fn embed_tokens(&self, tokens: &TokenSequence) -> Result<EmbeddingMatrix>;

    /// The full `vocab_size x embedding_dim` token table. Used by the
    /// guidance relaxation to form probability-weighted embeddings.
    fn token_embedding_table(&self) -> Result<Arc<EmbeddingMatrix>>;

    /// Unit-norm style embedding of a whole text.
    fn style_embed(&self, text: &str) -> Result<Vec<f64>>;

    /// Differentiable style head over a mean-pooled (soft) token embedding.
    /// Lands in the same space as [`ModelBackend::style_embed`].
    fn style_head(&self, pooled: &[f64]) -> Result<Vec<f64>>;

    /// Vector-Jacobian product of [`ModelBackend::style_head`] at `pooled`.
    fn style_head_vjp(&self, pooled: &[f64], cotangent: &[f64]) -> Result<Vec<f64>>;

    /// Style-agnostic sentence embedding used for semantic similarity.
    fn sentence_embed(&self, text: &str) -> Result<Vec<f64>>;

    fn classify_style(&self, text: &str, language: &str) -> Result<StyleDistribution>;

    fn paraphrase(&self, text: &str, seed: u64) -> Result<String>;

    /// Per-position logits for the clean sequence given noisy `x_t`, the step
    /// and a conditioning sequence of the same length.
    fn denoise(&self, x_t: &EmbeddingMatrix, t: Timestep, condition: &TokenSequence) -> Result<LogitsMatrix>;
}

/// One supervised example for the denoiser objective.
#[derive(Debug, Clone)]
pub struct DenoiseExample {
    pub x_t: EmbeddingMatrix,
    pub t: Timestep,
    /// The paraphrase the model conditions on.
    pub condition: TokenSequence,
    /// The original text it must reconstruct.
    pub target: TokenSequence,
}

/// A backend whose denoiser parameters can be fit in-process.
pub trait TrainableDenoiser: ModelBackend {
    /// Current flat parameter vector; `None` until initialised.
    fn denoiser_parameters(&self) -> Option<&[f64]>;

    fn set_denoiser_parameters(&mut self, params: Vec<f64>) -> Result<()>;

    /// Zero-initialised parameter vector of the right length.
    fn initial_denoiser_parameters(&self) -> Vec<f64>;

    /// Mean token-level cross-entropy over `batch` and its gradient with
    /// respect to `params`.
    fn denoiser_loss_and_gradient(&self, params: &[f64], batch: &[DenoiseExample]) -> Result<(f64, Vec<f64>)>;
}

/// Bundle of per-language detectors keyed by language tag.
#[derive(Clone, Default)]
pub struct BackendSet {
    by_language: BTreeMap<String, Arc<dyn ModelBackend>>,
}

impl BackendSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// A single backend serving every language it declares.
    pub fn single(backend: Arc<dyn ModelBackend>) -> Self {
        let mut set = Self::new();
        for lang in backend.descriptor().languages.clone() {
            set.by_language.insert(lang, backend.clone());
        }
        set
    }

    pub fn with(mut self, language: impl Into<String>, backend: Arc<dyn ModelBackend>) -> Self {
        self.by_language.insert(language.into(), backend);
        self
    }

    pub fn get(&self, language: &str) -> Result<&Arc<dyn ModelBackend>> {
        self.by_language
            .get(language)
            .ok_or_else(|| Error::Unsupported(format!("language {language:?}")))
    }
}

impl std::fmt::Debug for BackendSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.by_language.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_ids_are_bounded_by_vocab() {
        assert!(TokenSequence::new(vec![0, 4], 5).is_ok());
        assert!(TokenSequence::new(vec![5], 5).is_err());
        assert!(TokenSequence::new(vec![], 0).is_err());
    }

    #[test]
    fn distribution_must_normalise() {
        let l = vec!["a".to_string(), "b".to_string()];
        assert!(StyleDistribution::new(l.clone(), vec![0.3, 0.7]).is_ok());
        assert!(StyleDistribution::new(l.clone(), vec![0.3, 0.6]).is_err());
        assert!(StyleDistribution::new(l, vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn argmax_ties_follow_declared_order() {
        let d = StyleDistribution::new(vec!["x".into(), "y".into()], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.argmax(), "x");
        assert_eq!(d.argmax_with_order(&["y".into(), "x".into()]), "y");
    }
}
