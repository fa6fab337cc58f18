//! Deterministic, CPU-only reference implementation of every backend
//! capability.
//!
//! * Tokenizer: one token per character of a fixed alphabet; id 0 is the
//!   unknown token.
//! * Token embeddings: entry `(id, j)` of the table is a standard normal
//!   built from two hashed uniforms by Box-Muller:
//!   `u1 = unit_open(splitmix64(seed ^ splitmix64((id << 32) | 2j)))`,
//!   `u2 = unit_open(splitmix64(seed ^ splitmix64((id << 32) | (2j + 1))))`,
//!   `z = sqrt(-2 ln u1) * cos(2 pi u2)`.
//! * Style embedder: signed feature hashing of character 1..3-grams into
//!   `style_dim` buckets, L2-normalised.
//! * Style classifier: one multinomial logistic head per language over the
//!   style embedding.
//! * Style head: ridge-regression map from a mean-pooled token embedding to
//!   the style space, fitted on a text sample.
//! * Sentence embedder: hashed word and in-word character trigrams of the
//!   lowercased text with register markers removed.
//! * Denoiser: one affine map shared by all positions, from
//!   `[g(t) * x_t row | aligned condition row | mean condition embedding |
//!   time features]` to vocabulary logits, where the gate
//!   `g(t) = d * sqrt(beta_t) / (1 + d - beta_t)` with `d = 0.1` follows the
//!   shape of the Gaussian likelihood ratio of `x_t`, scaled so `g(0) = 1`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use super::text::{accumulate_char_ngrams, splitmix64, unit_open, Paraphraser};
use super::{
    BackendDescriptor, BackendKind, Capability, DenoiseExample, ModelBackend, StyleDistribution, TokenSequence,
    TrainableDenoiser,
};
use crate::diffusion::Timestep;
use crate::error::{Error, Result};
use crate::tensor::{self, EmbeddingMatrix, LogitsMatrix, Matrix};

/// Number of time features appended to every denoiser input row.
pub const TIME_FEATURES: usize = 8;

const STYLE_NGRAMS: [usize; 3] = [1, 2, 3];

/// Character alphabet. Id 0 is reserved for characters outside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    alphabet: Vec<char>,
}

impl Vocabulary {
    pub const UNKNOWN: u32 = 0;
    pub const UNKNOWN_CHAR: char = '\u{FFFD}';

    pub fn new(alphabet: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut chars = Vec::new();
        for c in alphabet {
            if c == Self::UNKNOWN_CHAR {
                return Err(Error::validation("alphabet may not contain U+FFFD"));
            }
            if seen.insert(c) {
                chars.push(c);
            }
        }
        if chars.is_empty() {
            return Err(Error::validation("alphabet is empty"));
        }
        Ok(Self { alphabet: chars })
    }

    /// Printable ASCII, space through tilde.
    pub fn printable_ascii() -> Self {
        Self {
            alphabet: (' '..='~').collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.alphabet.len() + 1
    }

    pub fn id(&self, c: char) -> u32 {
        self.alphabet
            .iter()
            .position(|&a| a == c)
            .map_or(Self::UNKNOWN, |i| i as u32 + 1)
    }

    pub fn char(&self, id: u32) -> Option<char> {
        match id {
            0 => Some(Self::UNKNOWN_CHAR),
            i => self.alphabet.get(i as usize - 1).copied(),
        }
    }

    /// Id of the lowercase form of `id`'s character (itself when unchanged).
    fn fold_case(&self, id: u32) -> u32 {
        match self.char(id) {
            Some(c) if c != Self::UNKNOWN_CHAR => {
                let lower = c.to_lowercase().next().unwrap_or(c);
                match self.id(lower) {
                    Self::UNKNOWN => id,
                    l => l,
                }
            }
            _ => id,
        }
    }
}

/// Construction parameters of a [`ReferenceBackend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub seed: u64,
    pub embedding_dim: usize,
    /// Width of the hashed style space.
    pub style_dim: usize,
    /// Width of the hashed sentence-embedding space.
    pub semantic_dim: usize,
    pub vocabulary: Vocabulary,
    pub style_labels: Vec<String>,
    pub languages: Vec<String>,
    pub max_sequence_len: usize,
}

impl ReferenceConfig {
    pub fn new(
        seed: u64,
        embedding_dim: usize,
        vocabulary: Vocabulary,
        style_labels: Vec<String>,
        languages: Vec<String>,
    ) -> Self {
        Self {
            seed,
            embedding_dim,
            style_dim: 512,
            semantic_dim: 1024,
            vocabulary,
            style_labels,
            languages,
            max_sequence_len: 512,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.embedding_dim < 2 {
            return Err(Error::validation(format!(
                "embedding_dim must be at least 2, got {}",
                self.embedding_dim
            )));
        }
        if self.style_dim < 2 || self.semantic_dim < 2 {
            return Err(Error::validation("style_dim and semantic_dim must be >= 2"));
        }
        let unique: HashSet<_> = self.style_labels.iter().collect();
        if self.style_labels.len() < 2 || unique.len() != self.style_labels.len() {
            return Err(Error::validation("need at least two distinct style labels"));
        }
        if self.languages.is_empty() {
            return Err(Error::validation("need at least one language"));
        }
        Ok(())
    }
}

/// Multinomial logistic regression over style embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticClassifier {
    labels: Vec<String>,
    /// `labels.len() x style_dim`.
    weights: Matrix,
    bias: Vec<f64>,
}

impl LogisticClassifier {
    fn probabilities(&self, features: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| tensor::dot(w, features) + b)
            .collect();
        tensor::softmax_with_temperature(&logits, 1.0)
    }
}

/// Options for [`ReferenceBackend::train_classifier`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTraining {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 2.0,
            l2: 1e-4,
        }
    }
}

/// Affine map `pooled -> style space`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearStyleHead {
    /// `style_dim x embedding_dim`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearStyleHead {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(format!("bias of length {}", weights.rows()), bias.len()));
        }
        Ok(Self { weights, bias })
    }

    pub fn apply(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        if pooled.len() != self.weights.cols() {
            return Err(Error::shape(
                format!("pooled vector of length {}", self.weights.cols()),
                pooled.len(),
            ));
        }
        Ok(self
            .weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| tensor::dot(w, pooled) + b)
            .collect())
    }

    pub fn vjp(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        if cotangent.len() != self.weights.rows() {
            return Err(Error::shape(
                format!("cotangent of length {}", self.weights.rows()),
                cotangent.len(),
            ));
        }
        let mut out = vec![0.0; self.weights.cols()];
        for (row, g) in self.weights.iter_rows().zip(cotangent) {
            if *g != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += g * w;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Snapshot {
    config: ReferenceConfig,
    paraphraser: Paraphraser,
    classifiers: BTreeMap<String, LogisticClassifier>,
    style_head: Option<LinearStyleHead>,
    denoiser: Option<Vec<f64>>,
}

/// The built-in deterministic backend. See the module docs for the
/// construction of each component.
#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    config: ReferenceConfig,
    descriptor: BackendDescriptor,
    table: Arc<EmbeddingMatrix>,
    fold: Vec<u32>,
    paraphraser: Paraphraser,
    classifiers: BTreeMap<String, LogisticClassifier>,
    style_head: Option<LinearStyleHead>,
    denoiser: Option<Vec<f64>>,
}

/// Entry `(id, j)` of the reference token table for `seed`.
pub fn reference_embedding_entry(seed: u64, id: u32, j: usize) -> f64 {
    let key = (u64::from(id) << 32) | (2 * j as u64);
    let u1 = unit_open(splitmix64(seed ^ splitmix64(key)));
    let u2 = unit_open(splitmix64(seed ^ splitmix64(key + 1)));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

const GATE_FLOOR: f64 = 0.1;

/// Weight on the noisy input at step `t`; 1 at `t = 0`, 0 at `t = T`.
pub fn input_gate(t: Timestep) -> f64 {
    let b = t.beta();
    GATE_FLOOR * b.sqrt() / (1.0 + GATE_FLOOR - b)
}

/// Time features for step `t`: signal and noise coefficients, the input
/// gate and its product with the signal coefficient, then two sine/cosine
/// pairs of `t / T`.
pub fn time_features(t: Timestep) -> [f64; TIME_FEATURES] {
    let s = t.fraction();
    let b = t.beta();
    let g = input_gate(t);
    let pi = std::f64::consts::PI;
    [
        b.sqrt(),
        (1.0 - b).sqrt(),
        g,
        g * b.sqrt(),
        (pi * s).sin(),
        (pi * s).cos(),
        (2.0 * pi * s).sin(),
        (2.0 * pi * s).cos(),
    ]
}

impl ReferenceBackend {
    pub fn new(config: ReferenceConfig) -> Result<Self> {
        config.validate()?;
        let vocab = config.vocabulary.size();
        let dim = config.embedding_dim;
        let data = (0..vocab as u32)
            .flat_map(|id| (0..dim).map(move |j| (id, j)))
            .map(|(id, j)| reference_embedding_entry(config.seed, id, j))
            .collect();
        let table = EmbeddingMatrix::from_vec(vocab, dim, data)?;
        let fold = (0..vocab as u32).map(|id| config.vocabulary.fold_case(id)).collect();
        let descriptor = BackendDescriptor {
            kind: BackendKind::Reference,
            embedding_dim: dim,
            vocab_size: vocab,
            style_labels: config.style_labels.clone(),
            languages: config.languages.clone(),
            max_sequence_len: config.max_sequence_len,
            capabilities: Capability::ALL.to_vec(),
            endpoint: None,
        };
        Ok(Self {
            config,
            descriptor,
            table: Arc::new(table),
            fold,
            paraphraser: Paraphraser::default(),
            classifiers: BTreeMap::new(),
            style_head: None,
            denoiser: None,
        })
    }

    pub fn config(&self) -> &ReferenceConfig {
        &self.config
    }

    pub fn with_paraphraser(mut self, paraphraser: Paraphraser) -> Self {
        self.paraphraser = paraphraser;
        self
    }

    pub fn paraphraser(&self) -> &Paraphraser {
        &self.paraphraser
    }

    fn feature_width(&self) -> usize {
        3 * self.config.embedding_dim + TIME_FEATURES
    }

    pub fn denoiser_parameter_count(&self) -> usize {
        let v = self.config.vocabulary.size();
        v * self.feature_width() + v
    }

    pub fn is_denoiser_trained(&self) -> bool {
        self.denoiser.is_some()
    }

    pub fn has_classifier(&self, language: &str) -> bool {
        self.classifiers.contains_key(language)
    }

    /// Unnormalised hashed n-gram counts.
    fn style_features(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.config.style_dim];
        accumulate_char_ngrams(text, &STYLE_NGRAMS, self.config.seed, &mut v);
        v
    }

    fn style_vector(&self, text: &str) -> Vec<f64> {
        let mut v = self.style_features(text);
        tensor::normalize(&mut v);
        v
    }

    /// Fit the style classifier for `language` on `(text, label)` pairs.
    /// Every label must be one of the backend's declared style labels.
    pub fn train_classifier(
        &mut self,
        language: &str,
        examples: &[(String, String)],
        opts: ClassifierTraining,
    ) -> Result<()> {
        if !self.descriptor.declares_language(language) {
            return Err(Error::Unsupported(format!("language {language:?}")));
        }
        if examples.is_empty() {
            return Err(Error::validation("classifier training set is empty"));
        }
        let labels = self.config.style_labels.clone();
        let k = labels.len();
        let d = self.config.style_dim;
        let mut xs = Vec::with_capacity(examples.len());
        let mut ys = Vec::with_capacity(examples.len());
        for (text, label) in examples {
            let y = labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Error::validation(format!("label {label:?} not among {labels:?}")))?;
            if text.trim().is_empty() {
                return Err(Error::validation("empty training text"));
            }
            xs.push(self.style_vector(text));
            ys.push(y);
        }
        let n = xs.len() as f64;
        let mut clf = LogisticClassifier {
            labels,
            weights: Matrix::zeros(k, d),
            bias: vec![0.0; k],
        };
        for _ in 0..opts.iterations {
            let mut gw = Matrix::zeros(k, d);
            let mut gb = vec![0.0; k];
            for (x, &y) in xs.iter().zip(&ys) {
                let p = clf.probabilities(x);
                for c in 0..k {
                    let err = p[c] - if c == y { 1.0 } else { 0.0 };
                    gb[c] += err;
                    for (g, xi) in gw.row_mut(c).iter_mut().zip(x) {
                        *g += err * xi;
                    }
                }
            }
            let lr = opts.learning_rate;
            for c in 0..k {
                clf.bias[c] -= lr * gb[c] / n;
                let grad = gw.row(c).to_vec();
                let w = clf.weights.as_mut_slice();
                for (j, g) in grad.iter().enumerate() {
                    let idx = c * d + j;
                    w[idx] -= lr * (g / n + opts.l2 * w[idx]);
                }
            }
        }
        self.classifiers.insert(language.to_string(), clf);
        Ok(())
    }

    /// Fit the style head by ridge regression from pooled token embeddings
    /// to style embeddings over `texts`.
    pub fn fit_style_head(&mut self, texts: &[String], ridge: f64) -> Result<()> {
        let texts: Vec<&String> = texts.iter().filter(|t| !t.trim().is_empty()).collect();
        if texts.len() < 2 {
            return Err(Error::validation("style head needs at least two texts"));
        }
        let d = self.config.embedding_dim;
        let s = self.config.style_dim;
        let n = texts.len();
        let mut x = DMatrix::<f64>::zeros(n, d);
        let mut y = DMatrix::<f64>::zeros(n, s);
        for (i, text) in texts.iter().enumerate() {
            let tokens = self.tokenize(text)?;
            let pooled = self.embed_tokens(&tokens)?.mean_row();
            for j in 0..d {
                x[(i, j)] = pooled[j];
            }
            for (j, v) in self.style_vector(text).into_iter().enumerate() {
                y[(i, j)] = v;
            }
        }
        let x_mean = x.row_mean();
        let y_mean = y.row_mean();
        for i in 0..n {
            for j in 0..d {
                x[(i, j)] -= x_mean[j];
            }
            for j in 0..s {
                y[(i, j)] -= y_mean[j];
            }
        }
        let mut gram = x.transpose() * &x;
        for j in 0..d {
            gram[(j, j)] += ridge;
        }
        let rhs = x.transpose() * &y;
        let solved = gram
            .cholesky()
            .ok_or_else(|| Error::numeric("style head fit", "normal equations not positive definite"))?
            .solve(&rhs);
        // solved: d x s; weights are s x d
        let mut weights = Matrix::zeros(s, d);
        for r in 0..s {
            for c in 0..d {
                weights.row_mut(r)[c] = solved[(c, r)];
            }
        }
        let bias = (0..s)
            .map(|r| y_mean[r] - (0..d).map(|c| solved[(c, r)] * x_mean[c]).sum::<f64>())
            .collect();
        self.style_head = Some(LinearStyleHead::new(weights, bias)?);
        Ok(())
    }

    pub fn set_style_head(&mut self, head: LinearStyleHead) -> Result<()> {
        if head.weights.cols() != self.config.embedding_dim {
            return Err(Error::shape(
                format!("head over {} dims", self.config.embedding_dim),
                head.weights.cols(),
            ));
        }
        self.style_head = Some(head);
        Ok(())
    }

    pub fn style_head_params(&self) -> Option<&LinearStyleHead> {
        self.style_head.as_ref()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let snap = Snapshot {
            config: self.config.clone(),
            paraphraser: self.paraphraser.clone(),
            classifiers: self.classifiers.clone(),
            style_head: self.style_head.clone(),
            denoiser: self.denoiser.clone(),
        };
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &snap)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let snap: Snapshot = serde_json::from_reader(std::io::BufReader::new(file))?;
        let mut backend = Self::new(snap.config)?.with_paraphraser(snap.paraphraser);
        backend.classifiers = snap.classifiers;
        backend.style_head = snap.style_head;
        if let Some(p) = snap.denoiser {
            backend.set_denoiser_parameters(p)?;
        }
        Ok(backend)
    }

    fn check_tokens(&self, tokens: &TokenSequence) -> Result<()> {
        if tokens.vocab_size() as usize != self.descriptor.vocab_size {
            return Err(Error::validation(format!(
                "sequence built for vocabulary of {} tokens, backend has {}",
                tokens.vocab_size(),
                self.descriptor.vocab_size
            )));
        }
        Ok(())
    }

    /// Pair each target position with the condition position it aligns to.
    /// Only case-insensitively equal characters pair up (edit distance with
    /// substitution cost 2, i.e. a longest common subsequence); every other
    /// target position is unaligned.
    fn align(&self, target: &[u32], condition: &[u32]) -> Vec<Option<usize>> {
        let (n, m) = (target.len(), condition.len());
        let fold = |id: u32| self.fold.get(id as usize).copied().unwrap_or(id);
        let mut cost = vec![0u32; (n + 1) * (m + 1)];
        let at = |i: usize, j: usize| i * (m + 1) + j;
        for i in 0..=n {
            cost[at(i, 0)] = i as u32;
        }
        for j in 0..=m {
            cost[at(0, j)] = j as u32;
        }
        for i in 1..=n {
            for j in 1..=m {
                let sub = 2 * u32::from(fold(target[i - 1]) != fold(condition[j - 1]));
                cost[at(i, j)] = (cost[at(i - 1, j - 1)] + sub)
                    .min(cost[at(i - 1, j)] + 1)
                    .min(cost[at(i, j - 1)] + 1);
            }
        }
        let mut out = vec![None; n];
        let (mut i, mut j) = (n, m);
        while i > 0 && j > 0 {
            let same = fold(target[i - 1]) == fold(condition[j - 1]);
            if same && cost[at(i, j)] == cost[at(i - 1, j - 1)] {
                out[i - 1] = Some(j - 1);
                i -= 1;
                j -= 1;
            } else if cost[at(i, j)] == cost[at(i - 1, j)] + 1 {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        out
    }

    /// Input rows of the denoiser for a whole sequence.
    fn denoiser_inputs(
        &self,
        x_t: &Matrix,
        t: Timestep,
        condition: &[u32],
        alignment: &[Option<usize>],
    ) -> Vec<Vec<f64>> {
        let dim = self.config.embedding_dim;
        let time = time_features(t);
        let gate = input_gate(t);
        let mut mean_cond = vec![0.0; dim];
        for &id in condition {
            for (m, e) in mean_cond.iter_mut().zip(self.table.row(id as usize)) {
                *m += e;
            }
        }
        if !condition.is_empty() {
            let n = condition.len() as f64;
            mean_cond.iter_mut().for_each(|m| *m /= n);
        }
        (0..x_t.rows())
            .map(|pos| {
                let mut f = Vec::with_capacity(self.feature_width());
                let row = x_t.row(pos);
                f.extend(row.iter().map(|v| gate * v));
                match alignment[pos] {
                    Some(j) => f.extend_from_slice(self.table.row(condition[j] as usize)),
                    None => f.extend(std::iter::repeat_n(0.0, dim)),
                }
                f.extend_from_slice(&mean_cond);
                f.extend_from_slice(&time);
                f
            })
            .collect()
    }

    fn logits_for(&self, params: &[f64], inputs: &[f64]) -> Vec<f64> {
        let v = self.config.vocabulary.size();
        let fw = self.feature_width();
        let (w, b) = params.split_at(v * fw);
        (0..v)
            .map(|c| tensor::dot(&w[c * fw..(c + 1) * fw], inputs) + b[c])
            .collect()
    }

    fn example_loss_and_gradient(&self, params: &[f64], ex: &DenoiseExample) -> Result<(f64, Vec<f64>, usize)> {
        self.check_tokens(&ex.condition)?;
        self.check_tokens(&ex.target)?;
        if ex.x_t.rows() != ex.target.len() || ex.x_t.cols() != self.config.embedding_dim {
            return Err(Error::shape(
                format!("x_t of shape ({}, {})", ex.target.len(), self.config.embedding_dim),
                format!("{:?}", ex.x_t.shape()),
            ));
        }
        let alignment = self.align(ex.target.ids(), ex.condition.ids());
        let inputs = self.denoiser_inputs(&ex.x_t, ex.t, ex.condition.ids(), &alignment);
        let v = self.config.vocabulary.size();
        let fw = self.feature_width();
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for (f, &y) in inputs.iter().zip(ex.target.ids()) {
            let logits = self.logits_for(params, f);
            let p = tensor::softmax_with_temperature(&logits, 1.0);
            loss -= p[y as usize].max(f64::MIN_POSITIVE).ln();
            let (gw, gb) = grad.split_at_mut(v * fw);
            for c in 0..v {
                let err = p[c] - if c == y as usize { 1.0 } else { 0.0 };
                gb[c] += err;
                if err != 0.0 {
                    for (g, x) in gw[c * fw..(c + 1) * fw].iter_mut().zip(f) {
                        *g += err * x;
                    }
                }
            }
        }
        Ok((loss, grad, inputs.len()))
    }

    /// Sentence-embedding features: hashed words and in-word trigrams of
    /// the lowercased text, register markers dropped.
    fn semantic_vector(&self, text: &str) -> Vec<f64> {
        let markers: HashSet<&str> = self
            .paraphraser
            .table
            .rules
            .iter()
            .filter(|(from, to)| to.is_empty() && !from.contains(' '))
            .map(|(from, _)| from.as_str())
            .collect();
        let lowered = text.to_lowercase();
        let mut v = vec![0.0; self.config.semantic_dim];
        let seed = self.config.seed ^ 0x5EED_5E11_A471_C000;
        for word in lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty() && !markers.contains(w))
        {
            accumulate_char_ngrams(&format!("#{word}#"), &[3], seed, &mut v);
            accumulate_char_ngrams(&format!("<{word}>"), &[word.chars().count() + 2], seed, &mut v);
        }
        tensor::normalize(&mut v);
        v
    }
}

impl ModelBackend for ReferenceBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        let ids: Vec<u32> = text.chars().map(|c| self.config.vocabulary.id(c)).collect();
        if ids.len() > self.config.max_sequence_len {
            return Err(Error::validation(format!(
                "text of {} tokens exceeds max_sequence_len {}",
                ids.len(),
                self.config.max_sequence_len
            )));
        }
        TokenSequence::new(ids, self.descriptor.vocab_size as u32)
    }

    fn detokenize(&self, tokens: &TokenSequence) -> Result<String> {
        self.check_tokens(tokens)?;
        tokens
            .ids()
            .iter()
            .map(|&id| {
                self.config
                    .vocabulary
                    .char(id)
                    .ok_or_else(|| Error::validation(format!("unknown token id {id}")))
            })
            .collect()
    }

    fn embed_tokens(&self, tokens: &TokenSequence) -> Result<EmbeddingMatrix> {
        self.check_tokens(tokens)?;
        let dim = self.config.embedding_dim;
        let mut data = Vec::with_capacity(tokens.len() * dim);
        for &id in tokens.ids() {
            data.extend_from_slice(self.table.row(id as usize));
        }
        EmbeddingMatrix::from_vec(tokens.len(), dim, data)
    }

    fn token_embedding_table(&self) -> Result<Arc<EmbeddingMatrix>> {
        Ok(self.table.clone())
    }

    fn style_embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.is_empty() {
            return Err(Error::validation("style_embed of empty text"));
        }
        let v = self.style_vector(text);
        if tensor::norm(&v) == 0.0 {
            // every feature cancelled; fall back to a fixed unit vector
            let mut e = vec![0.0; v.len()];
            e[0] = 1.0;
            return Ok(e);
        }
        Ok(v)
    }

    fn style_head(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        self.style_head
            .as_ref()
            .ok_or_else(|| Error::NotReady("style head has not been fitted".into()))?
            .apply(pooled)
    }

    fn style_head_vjp(&self, pooled: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        let head = self
            .style_head
            .as_ref()
            .ok_or_else(|| Error::NotReady("style head has not been fitted".into()))?;
        if pooled.len() != head.weights.cols() {
            return Err(Error::shape(head.weights.cols(), pooled.len()));
        }
        head.vjp(cotangent)
    }

    fn sentence_embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(Error::validation("sentence_embed of empty text"));
        }
        Ok(self.semantic_vector(text))
    }

    fn classify_style(&self, text: &str, language: &str) -> Result<StyleDistribution> {
        if !self.descriptor.declares_language(language) {
            return Err(Error::Unsupported(format!("language {language:?}")));
        }
        let clf = self
            .classifiers
            .get(language)
            .ok_or_else(|| Error::NotReady(format!("no style classifier trained for {language:?}")))?;
        let probs = clf.probabilities(&self.style_vector(text));
        StyleDistribution::new(clf.labels.clone(), probs)
    }

    fn paraphrase(&self, text: &str, seed: u64) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::validation("paraphrase of empty text"));
        }
        Ok(self.paraphraser.paraphrase(text, seed))
    }

    fn denoise(&self, x_t: &EmbeddingMatrix, t: Timestep, condition: &TokenSequence) -> Result<LogitsMatrix> {
        let params = self
            .denoiser
            .as_deref()
            .ok_or_else(|| Error::NotReady("denoiser has not been trained".into()))?;
        self.check_tokens(condition)?;
        if x_t.shape() != (condition.len(), self.config.embedding_dim) {
            return Err(Error::shape(
                format!("x_t of shape ({}, {})", condition.len(), self.config.embedding_dim),
                format!("{:?}", x_t.shape()),
            ));
        }
        let identity: Vec<Option<usize>> = (0..condition.len()).map(Some).collect();
        let inputs = self.denoiser_inputs(x_t, t, condition.ids(), &identity);
        let v = self.config.vocabulary.size();
        let mut data = Vec::with_capacity(inputs.len() * v);
        for f in &inputs {
            data.extend(self.logits_for(params, f));
        }
        let m = Matrix::from_vec(inputs.len(), v, data)?;
        if let Some((r, _)) = m.first_non_finite() {
            return Err(Error::numeric(format!("denoiser position {r}"), "non-finite logit"));
        }
        Ok(LogitsMatrix::from_matrix_unchecked(m))
    }
}

impl TrainableDenoiser for ReferenceBackend {
    fn denoiser_parameters(&self) -> Option<&[f64]> {
        self.denoiser.as_deref()
    }

    fn set_denoiser_parameters(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.denoiser_parameter_count() {
            return Err(Error::shape(
                format!("{} denoiser parameters", self.denoiser_parameter_count()),
                params.len(),
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("non-finite denoiser parameter"));
        }
        self.denoiser = Some(params);
        Ok(())
    }

    fn initial_denoiser_parameters(&self) -> Vec<f64> {
        vec![0.0; self.denoiser_parameter_count()]
    }

    fn denoiser_loss_and_gradient(&self, params: &[f64], batch: &[DenoiseExample]) -> Result<(f64, Vec<f64>)> {
        if params.len() != self.denoiser_parameter_count() {
            return Err(Error::shape(self.denoiser_parameter_count(), params.len()));
        }
        if batch.is_empty() {
            return Err(Error::validation("empty denoiser batch"));
        }
        // per-example results are summed in batch order for bitwise determinism
        let parts: Vec<(f64, Vec<f64>, usize)> = batch
            .par_iter()
            .map(|ex| self.example_loss_and_gradient(params, ex))
            .collect::<Result<_>>()?;
        let positions: usize = parts.iter().map(|p| p.2).sum();
        if positions == 0 {
            return Err(Error::validation("denoiser batch has no target tokens"));
        }
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (l, g, _) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let n = positions as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backend(seed: u64) -> ReferenceBackend {
        ReferenceBackend::new(ReferenceConfig::new(
            seed,
            16,
            Vocabulary::printable_ascii(),
            vec!["formal".into(), "informal".into()],
            vec!["en".into()],
        ))
        .unwrap()
    }

    #[test]
    fn char_round_trip() {
        let b = backend(1);
        let t = b.tokenize("ab").unwrap();
        assert_eq!(t.ids(), &[b.config.vocabulary.id('a'), b.config.vocabulary.id('b')]);
        assert_eq!(b.detokenize(&t).unwrap(), "ab");
        let empty = b.tokenize("").unwrap();
        assert!(empty.is_empty());
        assert_eq!(b.detokenize(&empty).unwrap(), "");
    }

    #[test]
    fn unknown_chars_map_to_reserved_id() {
        let b = backend(1);
        let t = b.tokenize("é").unwrap();
        assert_eq!(t.ids(), &[Vocabulary::UNKNOWN]);
    }

    #[test]
    fn foreign_vocab_is_rejected() {
        let b = backend(1);
        let t = TokenSequence::new(vec![3], 7).unwrap();
        assert!(b.detokenize(&t).is_err());
    }

    #[test]
    fn embeddings_are_position_independent_and_seeded() {
        let b = backend(7);
        let t = b.tokenize("xyx").unwrap();
        let e = b.embed_tokens(&t).unwrap();
        assert_eq!(e.shape(), (3, 16));
        assert_eq!(e.row(0), e.row(2));
        let other = backend(8).embed_tokens(&t).unwrap();
        assert_ne!(e, other);
        assert_eq!(e, backend(7).embed_tokens(&t).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = backend(1).config.clone();
        cfg.embedding_dim = 1;
        assert!(ReferenceBackend::new(cfg.clone()).is_err());
        cfg.embedding_dim = 4;
        cfg.style_labels = vec!["only".into()];
        assert!(ReferenceBackend::new(cfg).is_err());
    }

    #[test]
    fn alignment_skips_inserted_words() {
        let b = backend(1);
        let target = b.tokenize("A SHALL B").unwrap();
        let cond = b.tokenize("a will b").unwrap();
        let al = b.align(target.ids(), cond.ids());
        // first and last characters line up regardless of the middle
        assert_eq!(al[0], Some(0));
        assert_eq!(al[8], Some(7));
    }

    #[test]
    fn untrained_components_report_not_ready() {
        let b = backend(1);
        let t = b.tokenize("ab").unwrap();
        let x = b.embed_tokens(&t).unwrap();
        let step = Timestep::new(0, 10).unwrap();
        assert!(matches!(b.denoise(&x, step, &t), Err(Error::NotReady(_))));
        assert!(matches!(b.classify_style("ab", "en"), Err(Error::NotReady(_))));
        assert!(matches!(b.classify_style("ab", "fr"), Err(Error::Unsupported(_))));
        assert!(matches!(b.style_head(&[0.0; 16]), Err(Error::NotReady(_))));
    }

    #[test]
    fn style_embed_is_unit_norm() {
        let b = backend(3);
        let v = b.style_embed("Hereby ordered.").unwrap();
        assert!((tensor::norm(&v) - 1.0).abs() < 1e-12);
        assert!(b.style_embed("").is_err());
    }
}
