//! Sweep the flag threshold h against gold labels.

use std::collections::HashMap;
use std::sync::Arc;

use babel::backend::{BackendSet, ModelBackend};
use babel::harness::evaluate::translate_records;
use babel::harness::report::sweep_csv;
use babel::harness::sweep::{sweep_parameter, SweepParam};
use babel::harness::synthetic::{
    faithful_translator, style_stripping_translator, ToyWorld, ToyWorldConfig, FORMAL, TARGET_LANG,
};
use babel::harness::translate::Translator;
use babel::repair::RepairConfig;

pub fn run_example() -> babel::Result<()> {
    let mut world_config = ToyWorldConfig {
        records: 150,
        embedding_dim: 16,
        ..Default::default()
    };
    world_config.training.steps = 100;
    let world = ToyWorld::build(&world_config)?;
    let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);

    let system = style_stripping_translator(0.5, 0);
    let (translated, _) = translate_records(&world.test, &system, TARGET_LANG);
    // A formal sentence whose translation lost its formal markers is a true
    // inconsistency.
    let faithful = faithful_translator();
    let mut gold = HashMap::new();
    for t in &translated {
        let reference = faithful.translate(&t.record.text, &t.record.lang, TARGET_LANG)?;
        gold.insert(
            t.record.id.clone(),
            t.record.style == FORMAL && t.translation != reference,
        );
    }

    let grid = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999];
    let result = sweep_parameter(
        SweepParam::H,
        &grid,
        &RepairConfig::default(),
        &translated,
        &world.profile,
        &backends,
        Some(&gold),
        0,
    )?;
    print!("{}", sweep_csv(&result));
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
