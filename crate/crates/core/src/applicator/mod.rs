//! Style applicator: denoiser training and guided diffusion sampling.

mod guidance;
mod sampling;
mod training;

pub use guidance::{guidance_gradient, guidance_value, text_guidance_value, GuidanceEval, GuidanceSet};
pub use sampling::{apply_style, nucleus_distribution, sample_unguided, top_p_sample};
pub use training::{train_denoiser, TrainingConfig, TrainingTrace};
