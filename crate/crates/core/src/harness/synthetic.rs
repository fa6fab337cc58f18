//! A small two-style world for end-to-end runs without external models.
//!
//! Source sentences are English, targets Spanish, over the five corpus
//! domains. `formal` text is upper case with formal markers ("SHALL HEREBY",
//! "DEBERA POR LA PRESENTE"); `informal` text is lower case with casual
//! markers ("gonna ... ok", "va a ... vale"). The style-stripping translator
//! lowercases and drops markers, which turns formal sources into
//! informal-looking translations.

use rand::seq::IndexedRandom;
use rand::Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::applicator::{train_denoiser, TrainingConfig, TrainingTrace};
use crate::backend::reference::ClassifierTraining;
use crate::backend::{ReferenceBackend, ReferenceConfig, Vocabulary};
use crate::diffusion::seeded_rng;
use crate::error::Result;
use crate::harness::corpus::{split_train_test, CorpusRecord, DOMAINS};
use crate::harness::profile::StyleProfile;
use crate::harness::translate::{DictionaryTranslator, StripPolicy, Translator};

pub const SOURCE_LANG: &str = "en";
pub const TARGET_LANG: &str = "es";
pub const FORMAL: &str = "formal";
pub const INFORMAL: &str = "informal";

struct DomainLexicon {
    subjects: &'static [&'static str],
    verbs: &'static [&'static str],
    objects: &'static [&'static str],
}

fn lexicon(domain: &str) -> DomainLexicon {
    match domain {
        "law" => DomainLexicon {
            subjects: &["the court", "the judge", "the tenant", "the buyer"],
            verbs: &["order", "pay", "sign", "review"],
            objects: &["the fee", "the contract", "the debt", "the claim"],
        },
        "literature" => DomainLexicon {
            subjects: &["the poet", "the hero", "the queen", "the child"],
            verbs: &["write", "read", "sing", "tell"],
            objects: &["the story", "the song", "the letter", "the poem"],
        },
        "wikipedia" => DomainLexicon {
            subjects: &["the city", "the river", "the team", "the museum"],
            verbs: &["host", "open", "mark", "show"],
            objects: &["the event", "the map", "the record", "the list"],
        },
        "medicine" => DomainLexicon {
            subjects: &["the doctor", "the nurse", "the patient", "the clinic"],
            verbs: &["check", "treat", "test", "note"],
            objects: &["the wound", "the dose", "the fever", "the pulse"],
        },
        _ => DomainLexicon {
            subjects: &["the teacher", "the student", "the school", "the class"],
            verbs: &["teach", "learn", "grade", "plan"],
            objects: &["the lesson", "the exam", "the topic", "the course"],
        },
    }
}

const FORMAL_MARKERS: &[&str] = &["shall hereby", "shall duly", "shall"];
const INFORMAL_OPENERS: &[&str] = &["", "just "];
const INFORMAL_CLOSERS: &[&str] = &["ok", "really"];

/// Word dictionary shared by both translators.
pub fn dictionary_entries() -> BTreeMap<String, String> {
    let pairs: &[(&str, &str)] = &[
        ("the", "el"),
        ("shall", "debera"),
        ("hereby", "por la presente"),
        ("duly", "debidamente"),
        ("gonna", "va a"),
        ("just", "pues"),
        ("ok", "vale"),
        ("really", "super"),
        ("court", "tribunal"),
        ("judge", "juez"),
        ("tenant", "inquilino"),
        ("buyer", "comprador"),
        ("order", "ordenar"),
        ("pay", "pagar"),
        ("sign", "firmar"),
        ("review", "revisar"),
        ("fee", "pago"),
        ("contract", "contrato"),
        ("debt", "credito"),
        ("claim", "reclamo"),
        ("poet", "poeta"),
        ("hero", "heroe"),
        ("queen", "rey"),
        ("child", "nino"),
        ("write", "escribir"),
        ("read", "leer"),
        ("sing", "cantar"),
        ("tell", "contar"),
        ("story", "cuento"),
        ("song", "canto"),
        ("letter", "mensaje"),
        ("poem", "poema"),
        ("city", "pueblo"),
        ("river", "rio"),
        ("team", "equipo"),
        ("museum", "museo"),
        ("host", "acoger"),
        ("open", "abrir"),
        ("mark", "marcar"),
        ("show", "mostrar"),
        ("event", "evento"),
        ("map", "mapa"),
        ("record", "registro"),
        ("list", "listado"),
        ("doctor", "medico"),
        ("nurse", "enfermero"),
        ("patient", "paciente"),
        ("clinic", "hospital"),
        ("check", "revisar"),
        ("treat", "tratar"),
        ("test", "probar"),
        ("note", "anotar"),
        ("wound", "corte"),
        ("dose", "jarabe"),
        ("fever", "resfriado"),
        ("pulse", "pulso"),
        ("teacher", "maestro"),
        ("student", "alumno"),
        ("school", "colegio"),
        ("class", "grupo"),
        ("teach", "ensenar"),
        ("learn", "aprender"),
        ("grade", "evaluar"),
        ("plan", "planear"),
        ("lesson", "tema"),
        ("exam", "examen"),
        ("topic", "asunto"),
        ("course", "curso"),
    ];
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// Replacements used when the translator strips style.
pub fn neutral_entries() -> BTreeMap<String, String> {
    [
        ("shall", "va a"),
        ("hereby", ""),
        ("duly", ""),
        ("just", ""),
        ("ok", ""),
        ("really", ""),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

/// Style-preserving dictionary translator.
pub fn faithful_translator() -> DictionaryTranslator {
    DictionaryTranslator::new(
        "dictionary",
        dictionary_entries(),
        neutral_entries(),
        StripPolicy::Never,
    )
}

/// Dictionary translator that strips style from a `fraction` of inputs.
pub fn style_stripping_translator(fraction: f64, seed: u64) -> DictionaryTranslator {
    DictionaryTranslator::new(
        "dictionary-stripping",
        dictionary_entries(),
        neutral_entries(),
        StripPolicy::Fraction { fraction, seed },
    )
}

/// One source sentence in the given style.
pub fn sentence(domain: &str, style: &str, rng: &mut impl Rng) -> String {
    let lex = lexicon(domain);
    let subj = lex.subjects.choose(rng).expect("non-empty");
    let verb = lex.verbs.choose(rng).expect("non-empty");
    let obj = lex.objects.choose(rng).expect("non-empty");
    if style == FORMAL {
        let marker = FORMAL_MARKERS.choose(rng).expect("non-empty");
        format!("{subj} {marker} {verb} {obj}.").to_uppercase()
    } else {
        let open = INFORMAL_OPENERS.choose(rng).expect("non-empty");
        let close = INFORMAL_CLOSERS.choose(rng).expect("non-empty");
        format!("{open}{subj} gonna {verb} {obj} {close}.")
    }
}

/// `n` source records, domains round-robin, styles alternating.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|i| {
            let domain = DOMAINS[i % DOMAINS.len()];
            let style = if (i / DOMAINS.len()).is_multiple_of(2) {
                FORMAL
            } else {
                INFORMAL
            };
            CorpusRecord {
                id: format!("syn-{seed}-{i:05}"),
                domain: domain.to_string(),
                lang: SOURCE_LANG.to_string(),
                text: sentence(domain, style, &mut rng),
                style: style.to_string(),
            }
        })
        .collect()
}

/// Settings for [`ToyWorld::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct ToyWorldConfig {
    pub records: usize,
    pub seed: u64,
    pub embedding_dim: usize,
    /// Exemplars per (language, label) in the profile.
    pub profile_samples: usize,
    pub classifier: ClassifierTraining,
    pub training: TrainingConfig,
}

impl Default for ToyWorldConfig {
    fn default() -> Self {
        Self {
            records: 250,
            seed: 0,
            embedding_dim: 32,
            profile_samples: 8,
            classifier: ClassifierTraining::default(),
            training: TrainingConfig {
                steps: 2000,
                batch_size: 16,
                learning_rate: 0.2,
                total_steps: 100,
                seed: 0,
            },
        }
    }
}

/// A trained reference backend, a profile and the corpus it was built from.
pub struct ToyWorld {
    pub backend: Arc<ReferenceBackend>,
    pub profile: StyleProfile,
    pub train: Vec<CorpusRecord>,
    pub test: Vec<CorpusRecord>,
    pub trace: TrainingTrace,
}

impl ToyWorld {
    pub fn build(config: &ToyWorldConfig) -> Result<Self> {
        let corpus = synthetic_corpus(config.records, config.seed);
        let (train, test) = split_train_test(&corpus, config.seed);
        let translator = faithful_translator();
        let translated: Vec<(String, String)> = train
            .iter()
            .map(|r| {
                translator
                    .translate(&r.text, SOURCE_LANG, TARGET_LANG)
                    .map(|t| (t, r.style.clone()))
            })
            .collect::<Result<_>>()?;
        let source: Vec<(String, String)> = train.iter().map(|r| (r.text.clone(), r.style.clone())).collect();

        let mut backend = ReferenceBackend::new(ReferenceConfig::new(
            config.seed,
            config.embedding_dim,
            Vocabulary::printable_ascii(),
            vec![FORMAL.into(), INFORMAL.into()],
            vec![SOURCE_LANG.into(), TARGET_LANG.into()],
        ))?;
        backend.train_classifier(SOURCE_LANG, &source, config.classifier)?;
        backend.train_classifier(TARGET_LANG, &translated, config.classifier)?;
        let head_texts: Vec<String> = translated
            .iter()
            .map(|(t, _)| t.clone())
            .chain(source.iter().map(|(t, _)| t.clone()))
            .collect();
        backend.fit_style_head(&head_texts, 1.0)?;

        let mut samples: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
        for (lang, pairs) in [(SOURCE_LANG, &source), (TARGET_LANG, &translated)] {
            for label in [FORMAL, INFORMAL] {
                let picked: Vec<String> = pairs
                    .iter()
                    .filter(|(_, l)| l == label)
                    .take(config.profile_samples)
                    .map(|(t, _)| t.clone())
                    .collect();
                samples
                    .entry(lang.to_string())
                    .or_default()
                    .insert(label.to_string(), picked);
            }
        }
        let profile = StyleProfile::new("synthetic", vec![FORMAL.into(), INFORMAL.into()], samples)?;

        let denoiser_corpus: Vec<String> = translated.iter().map(|(t, _)| t.clone()).collect();
        let trace = train_denoiser(&mut backend, &denoiser_corpus, &config.training)?;
        Ok(Self {
            backend: Arc::new(backend),
            profile,
            train,
            test,
            trace,
        })
    }
}
