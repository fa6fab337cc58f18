//! Style guidance `J = mean_i cos(E_s(r), E_s(y_i))` and its gradient with
//! respect to the denoiser logits.
//!
//! Sampling is discrete, so the gradient goes through a relaxation: per
//! position `P = softmax(logits / tau)`, expected embedding `P . E`, mean
//! pooling over positions, then the backend's differentiable style head.

use serde::{Deserialize, Serialize};

use crate::backend::ModelBackend;
use crate::error::{Error, Result};
use crate::tensor::{self, LogitsMatrix, Matrix};

/// Style exemplars and their unit-norm style embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceSet {
    sample_texts: Vec<String>,
    sample_embeddings: Vec<Vec<f64>>,
    language: String,
}

impl GuidanceSet {
    /// Embed `samples` with the backend's style embedder.
    pub fn from_samples(samples: &[String], language: &str, backend: &dyn ModelBackend) -> Result<Self> {
        let embeddings = samples
            .iter()
            .map(|s| backend.style_embed(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples.to_vec(), embeddings, language)
    }

    /// Build from precomputed embeddings. Each must be unit-norm within 1e-6.
    pub fn new(
        sample_texts: Vec<String>,
        sample_embeddings: Vec<Vec<f64>>,
        language: impl Into<String>,
    ) -> Result<Self> {
        if sample_embeddings.is_empty() {
            return Err(Error::validation("guidance needs at least one sample"));
        }
        if sample_texts.len() != sample_embeddings.len() {
            return Err(Error::shape(sample_texts.len(), sample_embeddings.len()));
        }
        let dim = sample_embeddings[0].len();
        for (i, e) in sample_embeddings.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::shape(dim, e.len()));
            }
            let n = tensor::norm(e);
            if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
                return Err(Error::validation(format!(
                    "guidance sample {i} has norm {n}, expected 1"
                )));
            }
        }
        Ok(Self {
            sample_texts,
            sample_embeddings,
            language: language.into(),
        })
    }

    pub fn sample_texts(&self) -> &[String] {
        &self.sample_texts
    }

    pub fn sample_embeddings(&self) -> &[Vec<f64>] {
        &self.sample_embeddings
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.sample_embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_embeddings.is_empty()
    }

    fn mean_embedding(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.sample_embeddings[0].len()];
        for e in &self.sample_embeddings {
            for (a, b) in m.iter_mut().zip(e) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// Mean cosine similarity between `style_vec` and every guidance sample.
pub fn guidance_value(style_vec: &[f64], guidance: &GuidanceSet) -> Result<f64> {
    if style_vec.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("style vector has a non-finite entry"));
    }
    let mut total = 0.0;
    for e in guidance.sample_embeddings() {
        if e.len() != style_vec.len() {
            return Err(Error::shape(e.len(), style_vec.len()));
        }
        total += tensor::cosine(style_vec, e).ok_or_else(|| Error::validation("style vector has zero norm"))?;
    }
    Ok(total / guidance.len() as f64)
}

/// Guidance value of a concrete text: style head applied to the mean of its
/// token embeddings.
pub fn text_guidance_value(text: &str, guidance: &GuidanceSet, backend: &dyn ModelBackend) -> Result<f64> {
    let tokens = backend.tokenize(text)?;
    if tokens.is_empty() {
        return Err(Error::validation("guidance value of empty text"));
    }
    let pooled = backend.embed_tokens(&tokens)?.mean_row();
    guidance_value(&backend.style_head(&pooled)?, guidance)
}

/// `J` at the relaxed logits together with `dJ/dlogits`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceEval {
    pub value: f64,
    pub gradient: Matrix,
}

/// `J` and its gradient with respect to `logits` under temperature `tau`.
pub fn guidance_gradient(
    logits: &LogitsMatrix,
    guidance: &GuidanceSet,
    backend: &dyn ModelBackend,
    tau: f64,
) -> Result<GuidanceEval> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::validation(format!("temperature must be positive, got {tau}")));
    }
    let table = backend.token_embedding_table()?;
    let (len, vocab) = logits.shape();
    if vocab != table.rows() {
        return Err(Error::shape(format!("logits over {} tokens", table.rows()), vocab));
    }
    if len == 0 {
        return Err(Error::validation("guidance over an empty sequence"));
    }
    let dim = table.cols();

    let probs: Vec<Vec<f64>> = logits
        .iter_rows()
        .map(|row| tensor::softmax_with_temperature(row, tau))
        .collect();
    let mut pooled = vec![0.0; dim];
    for (pos, p) in probs.iter().enumerate() {
        let mut expected = vec![0.0; dim];
        for (v, pv) in p.iter().enumerate() {
            if *pv != 0.0 {
                for (x, e) in expected.iter_mut().zip(table.row(v)) {
                    *x += pv * e;
                }
            }
        }
        if expected.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(
                format!("guidance position {pos}"),
                "non-finite expected embedding",
            ));
        }
        for (a, x) in pooled.iter_mut().zip(&expected) {
            *a += x;
        }
    }
    let l = len as f64;
    pooled.iter_mut().for_each(|v| *v /= l);

    let h = backend.style_head(&pooled)?;
    let h_norm = tensor::norm(&h);
    if !(h_norm > 0.0 && h_norm.is_finite()) {
        return Err(Error::numeric("style head output", format!("norm {h_norm}")));
    }
    let s_bar = guidance.mean_embedding();
    if s_bar.len() != h.len() {
        return Err(Error::shape(s_bar.len(), h.len()));
    }
    let u: Vec<f64> = h.iter().map(|x| x / h_norm).collect();
    let value = tensor::dot(&u, &s_bar);
    // dJ/dh = (s_bar - (u . s_bar) u) / |h|
    let d_h: Vec<f64> = s_bar.iter().zip(&u).map(|(s, ui)| (s - value * ui) / h_norm).collect();
    let d_pooled = backend.style_head_vjp(&pooled, &d_h)?;
    if d_pooled.len() != dim {
        return Err(Error::shape(dim, d_pooled.len()));
    }
    // dJ/dP[pos, v] = E_v . d_pooled / L, identical at every position
    let a: Vec<f64> = table.iter_rows().map(|e| tensor::dot(e, &d_pooled) / l).collect();

    let mut grad = Matrix::zeros(len, vocab);
    for (pos, p) in probs.iter().enumerate() {
        let mean_a = tensor::dot(p, &a);
        let row = grad.row_mut(pos);
        for v in 0..vocab {
            row[v] = p[v] * (a[v] - mean_a) / tau;
        }
        if row.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric(
                format!("guidance position {pos}"),
                "non-finite gradient",
            ));
        }
    }
    Ok(GuidanceEval { value, gradient: grad })
}
