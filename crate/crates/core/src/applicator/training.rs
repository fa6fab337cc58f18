//! Denoiser training on simulated style loss: each text is paraphrased into
//! a style-neutral condition and the denoiser learns to recover the
//! original from a noised embedding of it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{DenoiseExample, TokenSequence, TrainableDenoiser};
use crate::diffusion::{forward_diffuse, seeded_rng, standard_normal, DiffusionConfig, Timestep};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Number of diffusion steps `T` the denoiser is trained for.
    pub total_steps: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 128,
            learning_rate: 1e-5,
            total_steps: 800,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_steps == 0 {
            return Err(Error::Config("batch_size and total_steps must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    /// Mean per-token cross-entropy at each step, before that step's update.
    pub losses: Vec<f64>,
    /// Parameters after the final step.
    pub parameters: Option<Vec<f64>>,
}

struct Pair {
    target: TokenSequence,
    condition: TokenSequence,
}

/// Fit the backend's denoiser by minibatch gradient descent.
///
/// Each step draws `batch_size` texts with replacement, a step `t` uniform on
/// `[0, T]` and fresh Gaussian noise per example, all from one stream seeded
/// by `config.seed`.
pub fn train_denoiser<B: TrainableDenoiser + ?Sized>(
    backend: &mut B,
    corpus: &[String],
    config: &TrainingConfig,
) -> Result<TrainingTrace> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::validation("training corpus is empty"));
    }
    if config.steps == 0 {
        return Ok(TrainingTrace {
            losses: Vec::new(),
            parameters: backend.denoiser_parameters().map(<[f64]>::to_vec),
        });
    }
    let pairs = corpus
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let paraphrase = backend.paraphrase(text, config.seed.wrapping_add(i as u64))?;
            Ok(Pair {
                target: backend.tokenize(text)?,
                condition: backend.tokenize(&paraphrase)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.iter().all(|p| p.target.is_empty()) {
        return Err(Error::validation("every training text is empty"));
    }
    let diffusion = DiffusionConfig {
        total_steps: config.total_steps,
        ..DiffusionConfig::default()
    };
    let dim = backend.descriptor().embedding_dim;
    let mut params = backend
        .denoiser_parameters()
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| backend.initial_denoiser_parameters());
    let mut rng = seeded_rng(config.seed);
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let pair = &pairs[rng.random_range(0..pairs.len())];
            let t = rng.random_range(0..=config.total_steps);
            let clean = backend.embed_tokens(&pair.target).map_err(|e| e.at_step(step))?;
            let noise = standard_normal(pair.target.len(), dim, &mut rng);
            let x_t = forward_diffuse(&clean, t, &diffusion, &noise).map_err(|e| e.at_step(step))?;
            batch.push(DenoiseExample {
                x_t,
                t: Timestep::new(t, config.total_steps)?,
                condition: pair.condition.clone(),
                target: pair.target.clone(),
            });
        }
        let (loss, grad) = backend
            .denoiser_loss_and_gradient(&params, &batch)
            .map_err(|e| e.at_step(step))?;
        if !loss.is_finite() {
            return Err(Error::numeric("training loss", format!("{loss}")).at_step(step));
        }
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::numeric("denoiser parameters", "diverged").at_step(step));
        }
    }
    backend.set_denoiser_parameters(params.clone())?;
    log::debug!(
        "denoiser trained: {} steps, first loss {:.4}, last loss {:.4}",
        losses.len(),
        losses[0],
        losses[losses.len() - 1]
    );
    Ok(TrainingTrace {
        losses,
        parameters: Some(params),
    })
}
