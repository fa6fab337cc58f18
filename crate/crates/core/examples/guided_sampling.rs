//! Guided against unguided sampling from the same seed.
//!
//! The guidance objective J is the mean cosine similarity between a text's
//! style vector and the formal exemplars; raising lambda should raise it.

use babel::applicator::{apply_style, text_guidance_value};
use babel::diffusion::DiffusionConfig;
use babel::harness::synthetic::{
    style_stripping_translator, ToyWorld, ToyWorldConfig, FORMAL, SOURCE_LANG, TARGET_LANG,
};
use babel::harness::translate::Translator;

pub fn run_example() -> babel::Result<()> {
    let world = ToyWorld::build(&ToyWorldConfig::default())?;
    let backend = world.backend.as_ref();
    let guidance = world.profile.guidance(TARGET_LANG, FORMAL, backend)?;

    let text =
        style_stripping_translator(1.0, 0).translate("THE QUEEN SHALL READ THE LETTER.", SOURCE_LANG, TARGET_LANG)?;
    println!(
        "input: {text:?}  J = {:.3}",
        text_guidance_value(&text, &guidance, backend)?
    );
    for lambda in [0.0, 100.0, 1000.0] {
        let diffusion = DiffusionConfig {
            total_steps: 100,
            guidance_strength: lambda,
            ..Default::default()
        };
        for seed in 0..2 {
            let out = apply_style(&text, &guidance, &diffusion, backend, seed)?;
            let j = text_guidance_value(&out, &guidance, backend)?;
            println!("lambda {lambda:>6} seed {seed}: J = {j:.3}  {out:?}");
        }
    }
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
