//! Flag translations that lose the source's style.
//!
//! Builds a small synthetic world (two styles, a trained reference backend)
//! and checks one formal sentence against a faithful and a style-stripping
//! translation.

use std::sync::Arc;

use babel::backend::{BackendSet, ModelBackend};
use babel::detector::{check_consistency, DetectionConfig, Segment};
use babel::harness::synthetic::{
    faithful_translator, style_stripping_translator, ToyWorld, ToyWorldConfig, FORMAL, SOURCE_LANG, TARGET_LANG,
};
use babel::harness::translate::Translator;

pub fn run_example() -> babel::Result<()> {
    // Detection needs the classifiers only, so skip most denoiser training.
    let mut config = ToyWorldConfig::default();
    config.training.steps = 1;
    let world = ToyWorld::build(&config)?;
    let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);
    let detection = DetectionConfig::new(0.5)?;

    let source = world
        .test
        .iter()
        .find(|r| r.style == FORMAL)
        .map(|r| r.text.as_str())
        .unwrap_or("THE COURT SHALL HEREBY ORDER THE FEE.");
    for (name, translation) in [
        (
            "faithful",
            faithful_translator().translate(source, SOURCE_LANG, TARGET_LANG)?,
        ),
        (
            "stripping",
            style_stripping_translator(1.0, 0).translate(source, SOURCE_LANG, TARGET_LANG)?,
        ),
    ] {
        let v = check_consistency(
            Segment::new(source, SOURCE_LANG),
            Segment::new(&translation, TARGET_LANG),
            &world.profile,
            &detection,
            &backends,
        )?;
        println!(
            "{name:>9}: {translation:?}\n           source is {} ({:.3}); translation keeps it with p = {:.3} -> flagged: {}",
            v.source_label, v.source_confidence, v.translation_confidence_for_source_label, v.flagged
        );
    }
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
