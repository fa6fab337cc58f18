#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use babel::applicator::{train_denoiser, TrainingConfig};
use babel::backend::reference::ClassifierTraining;
use babel::backend::{ReferenceBackend, ReferenceConfig, Vocabulary};
use babel::harness::synthetic::{faithful_translator, synthetic_corpus, ToyWorld, ToyWorldConfig, FORMAL, INFORMAL};
use babel::harness::translate::Translator;

/// Small, fast backend with every component trained. Golden protocol
/// fixtures were recorded against exactly this configuration.
pub fn fixture_backend() -> ReferenceBackend {
    let mut config = ReferenceConfig::new(
        3,
        8,
        Vocabulary::printable_ascii(),
        vec![FORMAL.into(), INFORMAL.into()],
        vec!["en".into(), "es".into()],
    );
    config.style_dim = 16;
    config.semantic_dim = 32;
    let mut backend = ReferenceBackend::new(config).unwrap();
    let corpus = synthetic_corpus(40, 3);
    let translator = faithful_translator();
    let en: Vec<(String, String)> = corpus.iter().map(|r| (r.text.clone(), r.style.clone())).collect();
    let es: Vec<(String, String)> = corpus
        .iter()
        .map(|r| (translator.translate(&r.text, "en", "es").unwrap(), r.style.clone()))
        .collect();
    let opts = ClassifierTraining {
        iterations: 100,
        ..Default::default()
    };
    backend.train_classifier("en", &en, opts).unwrap();
    backend.train_classifier("es", &es, opts).unwrap();
    let texts: Vec<String> = es.iter().chain(&en).map(|(t, _)| t.clone()).collect();
    backend.fit_style_head(&texts, 1.0).unwrap();
    let targets: Vec<String> = es.iter().map(|(t, _)| t.clone()).collect();
    let training = TrainingConfig {
        steps: 30,
        batch_size: 4,
        learning_rate: 0.2,
        total_steps: 20,
        seed: 3,
    };
    train_denoiser(&mut backend, &targets, &training).unwrap();
    backend
}

/// The default toy world, built once per test binary.
pub fn toy_world() -> &'static ToyWorld {
    static WORLD: OnceLock<ToyWorld> = OnceLock::new();
    WORLD.get_or_init(|| ToyWorld::build(&ToyWorldConfig::default()).unwrap())
}

pub fn shared_fixture_backend() -> Arc<ReferenceBackend> {
    static B: OnceLock<Arc<ReferenceBackend>> = OnceLock::new();
    B.get_or_init(|| Arc::new(fixture_backend())).clone()
}
