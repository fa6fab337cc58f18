//! Top-p sampling and the guided reverse-diffusion loop.

use rand::Rng;

use super::guidance::{guidance_gradient, GuidanceSet};
use crate::backend::{ModelBackend, TokenSequence};
use crate::diffusion::{forward_diffuse, seeded_rng, standard_normal, DiffusionConfig, SeededRng, Timestep};
use crate::error::{Error, Result};
use crate::tensor::{self, LogitsMatrix};

/// The nucleus of `probs`: the shortest prefix of tokens sorted by
/// descending probability (ties by ascending id) whose mass reaches `p`,
/// renormalised. Returns `(token id, probability)` pairs in that order.
pub fn nucleus_distribution(probs: &[f64], p: f64) -> Vec<(u32, f64)> {
    let mut order: Vec<u32> = (0..probs.len() as u32).collect();
    order.sort_by(|&a, &b| probs[b as usize].total_cmp(&probs[a as usize]).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for id in order {
        kept.push(id);
        mass += probs[id as usize];
        if mass >= p {
            break;
        }
    }
    kept.into_iter().map(|id| (id, probs[id as usize] / mass)).collect()
}

fn check_sampling_args(tau: f64, p: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::validation(format!("temperature must be positive, got {tau}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("top_p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Draw one token per position from the nucleus of `softmax(logits / tau)`.
/// Consumes exactly one uniform from `rng` per position, in position order.
pub fn top_p_sample(logits: &LogitsMatrix, tau: f64, p: f64, rng: &mut SeededRng) -> Result<TokenSequence> {
    check_sampling_args(tau, p)?;
    let vocab = logits.cols();
    if vocab == 0 {
        return Err(Error::validation("logits have no vocabulary columns"));
    }
    let mut ids = Vec::with_capacity(logits.rows());
    for row in logits.iter_rows().take(logits.rows()) {
        let nucleus = nucleus_distribution(&tensor::softmax_with_temperature(row, tau), p);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = nucleus[nucleus.len() - 1].0;
        for &(id, q) in &nucleus {
            acc += q;
            if u < acc {
                chosen = id;
                break;
            }
        }
        ids.push(chosen);
    }
    TokenSequence::new(ids, vocab as u32)
}

/// Rewrite `translation` toward the style of `guidance` by guided reverse
/// diffusion conditioned on the translation itself. Deterministic in `seed`.
pub fn apply_style(
    translation: &str,
    guidance: &GuidanceSet,
    config: &DiffusionConfig,
    backend: &dyn ModelBackend,
    seed: u64,
) -> Result<String> {
    if guidance.is_empty() {
        return Err(Error::validation("guidance set is empty"));
    }
    run_reverse(translation, Some(guidance), config, backend, seed)
}

/// The same loop with no guidance term.
pub fn sample_unguided(
    translation: &str,
    config: &DiffusionConfig,
    backend: &dyn ModelBackend,
    seed: u64,
) -> Result<String> {
    run_reverse(translation, None, config, backend, seed)
}

fn run_reverse(
    translation: &str,
    guidance: Option<&GuidanceSet>,
    config: &DiffusionConfig,
    backend: &dyn ModelBackend,
    seed: u64,
) -> Result<String> {
    config.validate()?;
    let condition = backend.tokenize(translation)?;
    if condition.is_empty() {
        return Err(Error::validation("cannot restyle an empty translation"));
    }
    let total = config.total_steps;
    let dim = backend.descriptor().embedding_dim;
    let mut rng = seeded_rng(seed);
    let mut x = standard_normal(condition.len(), dim, &mut rng);

    let step = |t: usize, x: &crate::tensor::EmbeddingMatrix, rng: &mut SeededRng| -> Result<TokenSequence> {
        let mut logits = backend.denoise(x, Timestep::new(t, total)?, &condition)?;
        if let Some(g) = guidance {
            let grad = guidance_gradient(&logits, g, backend, config.temperature)?.gradient;
            let lambda = config.guidance_strength;
            for (l, d) in logits.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                *l += lambda * d;
            }
            if let Some((pos, _)) = logits.first_non_finite() {
                return Err(Error::numeric(
                    format!("guided logits position {pos}"),
                    "non-finite value",
                ));
            }
        }
        top_p_sample(&logits, config.temperature, config.top_p, rng)
    };

    for t in (1..=total).rev() {
        let tokens = step(t, &x, &mut rng).map_err(|e| e.at_step(t))?;
        let noise = standard_normal(condition.len(), dim, &mut rng);
        let embedded = backend.embed_tokens(&tokens).map_err(|e| e.at_step(t))?;
        x = forward_diffuse(&embedded, t - 1, config, &noise).map_err(|e| e.at_step(t))?;
    }
    let tokens = step(0, &x, &mut rng).map_err(|e| e.at_step(0))?;
    backend.detokenize(&tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nucleus_of_worked_example() {
        let n = nucleus_distribution(&[0.5, 0.3, 0.2], 0.7);
        assert_eq!(n.len(), 2);
        assert_eq!((n[0].0, n[1].0), (0, 1));
        assert!((n[0].1 - 0.625).abs() < 1e-12);
        assert!((n[1].1 - 0.375).abs() < 1e-12);
    }

    #[test]
    fn full_mass_keeps_everything() {
        let probs = [0.1, 0.6, 0.3];
        let mut n = nucleus_distribution(&probs, 1.0);
        n.sort_by_key(|(id, _)| *id);
        for ((_, q), p) in n.iter().zip(probs) {
            assert!((q - p).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_lower_id() {
        let n = nucleus_distribution(&[0.25, 0.25, 0.25, 0.25], 0.5);
        assert_eq!(n.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn one_hot_is_deterministic() {
        let logits = LogitsMatrix::from_rows(&[vec![0.0, 50.0, 0.0]]).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..20 {
            assert_eq!(top_p_sample(&logits, 0.3, 0.9, &mut rng).unwrap().ids(), &[1]);
        }
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let logits = LogitsMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let mut rng = seeded_rng(1);
        assert!(top_p_sample(&logits, 0.0, 0.9, &mut rng).is_err());
        assert!(top_p_sample(&logits, 1.0, 1.5, &mut rng).is_err());
    }
}
