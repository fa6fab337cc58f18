//! Detect and repair one style-stripped translation.

use std::sync::Arc;

use babel::backend::{BackendSet, ModelBackend};
use babel::detector::Segment;
use babel::harness::synthetic::{style_stripping_translator, ToyWorld, ToyWorldConfig, SOURCE_LANG, TARGET_LANG};
use babel::harness::translate::Translator;
use babel::repair::{repair, RepairConfig};

pub fn run_example() -> babel::Result<()> {
    let world = ToyWorld::build(&ToyWorldConfig::default())?;
    let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);

    let source = "THE JUDGE SHALL SIGN THE CONTRACT.";
    let translation = style_stripping_translator(1.0, 0).translate(source, SOURCE_LANG, TARGET_LANG)?;

    // The toy denoiser was trained with T = 100; its features only see t/T,
    // so sampling with fewer steps is fine and much faster.
    let mut config = RepairConfig::default();
    config.diffusion.total_steps = 100;

    let result = repair(
        Segment::new(source, SOURCE_LANG),
        Segment::new(&translation, TARGET_LANG),
        &world.profile,
        &config,
        &backends,
        7,
    )?;
    println!("source:      {source}");
    println!("translation: {translation}");
    for c in &result.candidates {
        println!(
            "  candidate {} style {:.3} sts {:.3}  {:?}",
            c.index, c.style_score, c.sts, c.text
        );
    }
    match result.selected() {
        Some(c) => println!("selected #{}: {}", c.index, c.text),
        None => println!("nothing passed the STS gate; keeping {:?}", result.output()),
    }
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
