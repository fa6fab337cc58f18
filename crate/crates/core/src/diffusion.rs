//! Noise schedule and closed-form forward diffusion in embedding space.
//!
//! The schedule is `beta_t = sqrt((T - t) / T)`, the signal coefficient of
//! `x_t = sqrt(beta_t) * E(r) + sqrt(1 - beta_t) * eps`. It starts at 1
//! (pure signal) and reaches 0 (pure noise) at `t = T`, decaying slowly
//! for most of the range.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{EmbeddingMatrix, Matrix};

/// Random stream used for every stochastic path in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Knobs of the guided sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    /// Number of diffusion steps `T`.
    pub total_steps: usize,
    /// Softmax temperature applied as `logits / temperature`.
    pub temperature: f64,
    /// Scale `lambda` on the style-guidance gradient.
    pub guidance_strength: f64,
    /// Nucleus mass for top-p sampling.
    pub top_p: f64,
    pub rng_seed: u64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            total_steps: 800,
            temperature: 0.3,
            guidance_strength: 1000.0,
            top_p: 0.9,
            rng_seed: 0,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.guidance_strength >= 0.0 && self.guidance_strength.is_finite()) {
            return Err(Error::Config(format!(
                "guidance_strength must be non-negative, got {}",
                self.guidance_strength
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p must lie in (0, 1], got {}", self.top_p)));
        }
        Ok(())
    }
}

/// A step index `t` on the closed range `[0, total]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Timestep {
    pub t: usize,
    pub total: usize,
}

impl Timestep {
    pub fn new(t: usize, total: usize) -> Result<Self> {
        if total == 0 {
            return Err(Error::Domain("total steps must be at least 1".into()));
        }
        if t > total {
            return Err(Error::Domain(format!("step {t} outside [0, {total}]")));
        }
        Ok(Self { t, total })
    }

    /// `t / T` in `[0, 1]`.
    pub fn fraction(&self) -> f64 {
        self.t as f64 / self.total as f64
    }

    pub fn beta(&self) -> f64 {
        ((self.total - self.t) as f64 / self.total as f64).sqrt()
    }
}

/// Signal coefficient `beta_t = sqrt((T - t) / T)`.
pub fn beta(t: usize, total: usize) -> Result<f64> {
    Ok(Timestep::new(t, total)?.beta())
}

/// `sqrt(beta_t) * embedding + sqrt(1 - beta_t) * noise`, elementwise.
pub fn forward_diffuse(
    embedding: &EmbeddingMatrix,
    t: usize,
    config: &DiffusionConfig,
    noise: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    if embedding.shape() != noise.shape() {
        return Err(Error::shape(
            format!("noise of shape {:?}", embedding.shape()),
            format!("{:?}", noise.shape()),
        ));
    }
    let b = beta(t, config.total_steps)?;
    let signal = b.sqrt();
    let spread = (1.0 - b).sqrt();
    let data = embedding
        .as_slice()
        .iter()
        .zip(noise.as_slice())
        .map(|(e, n)| signal * e + spread * n)
        .collect();
    let (rows, cols) = embedding.shape();
    EmbeddingMatrix::new(Matrix::from_vec(rows, cols, data)?)
}

/// Draw a standard-normal matrix from `rng` in row-major order.
pub fn standard_normal(rows: usize, cols: usize, rng: &mut SeededRng) -> EmbeddingMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    EmbeddingMatrix::from_matrix_unchecked(Matrix::from_vec(rows, cols, data).expect("length matches shape"))
}

/// [`forward_diffuse`] with noise drawn from `rng`.
pub fn forward_diffuse_seeded(
    embedding: &EmbeddingMatrix,
    t: usize,
    config: &DiffusionConfig,
    rng: &mut SeededRng,
) -> Result<EmbeddingMatrix> {
    let noise = standard_normal(embedding.rows(), embedding.cols(), rng);
    forward_diffuse(embedding, t, config, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_endpoints_and_midpoint() {
        assert_eq!(beta(0, 800).unwrap(), 1.0);
        assert_eq!(beta(800, 800).unwrap(), 0.0);
        assert_eq!(beta(400, 800).unwrap(), std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn beta_rejects_out_of_range() {
        assert!(matches!(beta(801, 800), Err(Error::Domain(_))));
        assert!(matches!(beta(0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn forward_diffuse_endpoints() {
        let cfg = DiffusionConfig::default();
        let e = EmbeddingMatrix::from_rows(&[vec![0.25, -1.5], vec![3.0, 0.125]]).unwrap();
        let n = EmbeddingMatrix::from_rows(&[vec![0.7, 0.1], vec![-0.3, 2.0]]).unwrap();
        assert_eq!(forward_diffuse(&e, 0, &cfg, &n).unwrap(), e);
        assert_eq!(forward_diffuse(&e, 800, &cfg, &n).unwrap(), n);
    }

    #[test]
    fn forward_diffuse_midpoint_on_ones() {
        let cfg = DiffusionConfig::default();
        let e = EmbeddingMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let z = EmbeddingMatrix::zeros(1, 2);
        let x = forward_diffuse(&e, 400, &cfg, &z).unwrap();
        // sqrt(beta) with beta = sqrt(0.5)
        let expected = 0.5f64.sqrt().sqrt();
        for v in x.as_slice() {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_diffuse_shape_mismatch() {
        let cfg = DiffusionConfig::default();
        let e = EmbeddingMatrix::zeros(1, 2);
        let n = EmbeddingMatrix::zeros(2, 2);
        assert!(matches!(forward_diffuse(&e, 1, &cfg, &n), Err(Error::Shape { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(DiffusionConfig::default().validate().is_ok());
        let bad = DiffusionConfig {
            top_p: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DiffusionConfig {
            total_steps: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
