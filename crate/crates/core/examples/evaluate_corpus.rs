//! Evaluate a translation system over a corpus and print the CSV report.

use std::sync::Arc;

use babel::backend::{BackendSet, ModelBackend};
use babel::harness::evaluate::evaluate_system;
use babel::harness::report::evaluation_csv;
use babel::harness::synthetic::{style_stripping_translator, ToyWorld, ToyWorldConfig, TARGET_LANG};
use babel::repair::RepairConfig;

pub fn run_example() -> babel::Result<()> {
    let mut world_config = ToyWorldConfig {
        records: 150,
        embedding_dim: 16,
        ..Default::default()
    };
    world_config.training.steps = 400;
    let world = ToyWorld::build(&world_config)?;
    let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);

    let mut config = RepairConfig::default();
    config.diffusion.total_steps = 50;
    // Half of the sentences lose their style in translation.
    let system = style_stripping_translator(0.5, 0);
    let report = evaluate_system(
        "stripping-mt",
        &world.test,
        &system,
        TARGET_LANG,
        &world.profile,
        &config,
        &backends,
        None,
        0,
    )?;
    print!("{}", evaluation_csv(&report));
    println!("{} excluded. {}", report.exclusions.len(), report.note);
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
