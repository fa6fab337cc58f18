//! Fit the reference denoiser on a handful of sentences and watch the loss.

use babel::applicator::{train_denoiser, TrainingConfig};
use babel::backend::{ModelBackend, ReferenceBackend, ReferenceConfig, Vocabulary};
use babel::diffusion::{forward_diffuse_seeded, seeded_rng, DiffusionConfig, Timestep};
use babel::harness::synthetic::{faithful_translator, synthetic_corpus, FORMAL, INFORMAL};
use babel::harness::translate::Translator;

pub fn run_example() -> babel::Result<()> {
    let mut backend = ReferenceBackend::new(ReferenceConfig::new(
        1,
        32,
        Vocabulary::printable_ascii(),
        vec![FORMAL.into(), INFORMAL.into()],
        vec!["en".into(), "es".into()],
    ))?;
    let translator = faithful_translator();
    let sentences: Vec<String> = synthetic_corpus(20, 1)
        .iter()
        .map(|r| translator.translate(&r.text, "en", "es"))
        .collect::<babel::Result<_>>()?;

    let config = TrainingConfig {
        steps: 1500,
        batch_size: 16,
        learning_rate: 0.2,
        total_steps: 100,
        seed: 1,
    };
    let trace = train_denoiser(&mut backend, &sentences, &config)?;
    for (i, chunk) in trace.losses.chunks(250).enumerate() {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        println!(
            "steps {:>3}-{:>3}: mean loss {mean:.4}",
            i * 250,
            i * 250 + chunk.len() - 1
        );
    }

    // Reconstruct a lightly noised training sentence.
    let text = &sentences[0];
    let tokens = backend.tokenize(text)?;
    let clean = backend.embed_tokens(&tokens)?;
    let diffusion = DiffusionConfig {
        total_steps: 100,
        ..Default::default()
    };
    let x_t = forward_diffuse_seeded(&clean, 10, &diffusion, &mut seeded_rng(3))?;
    let logits = backend.denoise(&x_t, Timestep::new(10, 100)?, &tokens)?;
    let ids: Vec<u32> = logits
        .iter_rows()
        .map(|row| (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0) as u32)
        .collect();
    let decoded = backend.detokenize(&babel::backend::TokenSequence::new(ids, tokens.vocab_size())?)?;
    println!("original: {text}\ndecoded:  {decoded}");
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
