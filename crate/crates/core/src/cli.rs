//! The `babel` command line.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration
//! (including unknown flags), 2 for failures while running.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backend::{BackendSet, ModelBackend, ReferenceBackend, RemoteBackend, RemoteConfig};
use crate::detector::{check_consistency, DetectionConfig, DetectionVerdict, Segment};
use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::harness::corpus::{load_corpus, write_corpus, CorpusRecord};
use crate::harness::evaluate::{evaluate_system, translate_records, Exclusion};
use crate::harness::profile::StyleProfile;
use crate::harness::report::{render_evaluation, render_sweep, to_json, write_file, ReportFormat};
use crate::harness::sweep::{sweep_parameter, SweepParam};
use crate::harness::synthetic::{self, ToyWorld, ToyWorldConfig};
use crate::harness::translate::{
    CachedTranslator, DictionaryTranslator, HttpTranslator, IdentityTranslator, StripPolicy, Translator, CACHE_DIR_ENV,
};
use crate::repair::{repair, RepairConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "babel",
    version,
    about = "Find and repair style inconsistencies in machine translation output"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a corpus and flag style-inconsistent translations.
    Detect(DetectArgs),
    /// Detect and repair a single source/translation pair.
    Repair(RepairArgs),
    /// Translate, detect and repair a corpus; report per-domain metrics.
    Evaluate(EvaluateArgs),
    /// Sweep one of h, tau or lambda over a grid of values.
    Sweep(SweepArgs),
    /// Train the reference backend on the synthetic two-style corpus.
    TrainToy(TrainToyArgs),
    /// Print a backend's capabilities.
    Capabilities(CapabilitiesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Reference,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslatorChoice {
    Identity,
    Dictionary,
    DictionaryStripping,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatChoice {
    Json,
    Csv,
}

impl From<FormatChoice> for ReportFormat {
    fn from(f: FormatChoice) -> Self {
        match f {
            FormatChoice::Json => ReportFormat::Json,
            FormatChoice::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BackendArgs {
    /// Model backend.
    #[arg(long, value_enum, default_value_t = BackendChoice::Reference)]
    pub backend: BackendChoice,
    /// Reference backend snapshot (written by `train-toy`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Model server base URL for the remote backend. The bearer token is
    /// read from BABEL_BACKEND_TOKEN.
    #[arg(long)]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Machine-readable output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatChoice::Json)]
    pub format: FormatChoice,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectionArgs {
    /// Flag threshold h on the translation's confidence for the source style.
    #[arg(long = "h", default_value_t = 0.5)]
    pub h: f64,
    /// Style profile (JSON).
    #[arg(long)]
    pub profile: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RepairParams {
    /// Sampling temperature tau.
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Guidance strength lambda.
    #[arg(long, default_value_t = 1000.0)]
    pub lambda: f64,
    /// Diffusion steps T.
    #[arg(long, default_value_t = 800)]
    pub steps: usize,
    /// Nucleus mass for top-p sampling. 0.9 is this tool's choice; the
    /// method uses top-p without fixing p.
    #[arg(long = "top-p", default_value_t = 0.9)]
    pub top_p: f64,
    /// Rewrite candidates per flagged translation.
    #[arg(long, default_value_t = 4)]
    pub candidates: usize,
    /// Minimum semantic similarity for a candidate to be accepted.
    #[arg(long = "sts-threshold", default_value_t = 0.85)]
    pub sts_threshold: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TranslatorArgs {
    /// Translation client.
    #[arg(long, value_enum, default_value_t = TranslatorChoice::Dictionary)]
    pub translator: TranslatorChoice,
    /// Dictionary file for the dictionary clients; defaults to the built-in
    /// synthetic dictionary.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Fraction of inputs the stripping client strips.
    #[arg(long = "strip-fraction", default_value_t = 1.0)]
    pub strip_fraction: f64,
    /// Base URL of an HTTP translation service.
    #[arg(long = "translate-endpoint")]
    pub translate_endpoint: Option<String>,
    /// Environment variable holding the translation API key.
    #[arg(long = "api-key-env", default_value = "BABEL_TRANSLATE_KEY")]
    pub api_key_env: String,
    /// Response cache directory; defaults to $BABEL_CACHE_DIR when set.
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
    /// Serve translations from the cache only; a miss is an error.
    #[arg(long = "cache-only")]
    pub cache_only: bool,
    /// Target language.
    #[arg(long = "target-lang", default_value = synthetic::TARGET_LANG)]
    pub target_lang: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    /// Corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub translator: TranslatorArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RepairArgs {
    /// Source text.
    #[arg(long)]
    pub source: String,
    /// Translation to check and repair.
    #[arg(long)]
    pub translation: String,
    #[arg(long = "source-lang", default_value = synthetic::SOURCE_LANG)]
    pub source_lang: String,
    #[arg(long = "target-lang", default_value = synthetic::TARGET_LANG)]
    pub target_lang: String,
    /// Repair even when the detector does not flag the pair.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub params: RepairParams,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Gold inconsistency labels: a JSON object mapping record id to bool.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// System name in the report; defaults to the translator's name.
    #[arg(long)]
    pub system: Option<String>,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub params: RepairParams,
    #[command(flatten)]
    pub translator: TranslatorArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Parameter to sweep: h, tau or lambda.
    #[arg(long)]
    pub param: String,
    /// Comma-separated, strictly increasing grid.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Gold inconsistency labels. Without them an h sweep reports flag counts only.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub params: RepairParams,
    #[command(flatten)]
    pub translator: TranslatorArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainToyArgs {
    /// Output directory for model.json, profile.json, train.jsonl and test.jsonl.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Synthetic records to generate.
    #[arg(long, default_value_t = 250)]
    pub records: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Denoiser training steps.
    #[arg(long = "train-steps", default_value_t = 2000)]
    pub train_steps: usize,
    #[arg(long = "batch-size", default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long = "learning-rate", default_value_t = 0.2)]
    pub learning_rate: f64,
    /// Diffusion steps T used during training.
    #[arg(long = "diffusion-steps", default_value_t = 100)]
    pub diffusion_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CapabilitiesArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `argv` and run. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn log_config(name: &str, args: &impl Serialize) {
    match serde_json::to_string(args) {
        Ok(s) => log::info!("{name} config: {s}"),
        Err(e) => log::warn!("could not serialise {name} config: {e}"),
    }
}

fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Detect(a) => {
            log_config("detect", &a);
            with_jobs(a.common.jobs, || detect(&a))
        }
        Command::Repair(a) => {
            log_config("repair", &a);
            with_jobs(a.common.jobs, || repair_pair(&a))
        }
        Command::Evaluate(a) => {
            log_config("evaluate", &a);
            with_jobs(a.common.jobs, || evaluate(&a))
        }
        Command::Sweep(a) => {
            log_config("sweep", &a);
            with_jobs(a.common.jobs, || sweep(&a))
        }
        Command::TrainToy(a) => {
            log_config("train-toy", &a);
            with_jobs(a.jobs, || train_toy(&a))
        }
        Command::Capabilities(a) => {
            log_config("capabilities", &a);
            capabilities(&a)
        }
    }
}

fn open_backend(args: &BackendArgs) -> Result<Arc<dyn ModelBackend>> {
    match args.backend {
        BackendChoice::Reference => {
            let path = args
                .model
                .as_ref()
                .ok_or_else(|| Error::Config("--model is required for the reference backend".into()))?;
            Ok(Arc::new(ReferenceBackend::load(path)?))
        }
        BackendChoice::Remote => {
            let endpoint = args
                .endpoint
                .as_ref()
                .ok_or_else(|| Error::Config("--endpoint is required for the remote backend".into()))?;
            Ok(Arc::new(RemoteBackend::connect(RemoteConfig::new(endpoint))?))
        }
    }
}

fn detection_config(args: &DetectionArgs) -> Result<DetectionConfig> {
    if !(args.h > 0.0 && args.h < 1.0) {
        return Err(Error::Validation(format!("--h must lie in (0, 1), got {}", args.h)));
    }
    DetectionConfig::new(args.h)
}

fn check_flags(p: &RepairParams) -> Result<()> {
    let bad = |flag: &str, rule: &str, v: &dyn std::fmt::Display| {
        Err(Error::Validation(format!("--{flag} must be {rule}, got {v}")))
    };
    if !(p.tau.is_finite() && p.tau > 0.0) {
        return bad("tau", "positive", &p.tau);
    }
    if !(p.lambda.is_finite() && p.lambda >= 0.0) {
        return bad("lambda", "non-negative", &p.lambda);
    }
    if p.steps == 0 {
        return bad("steps", "at least 1", &p.steps);
    }
    if !(p.top_p > 0.0 && p.top_p <= 1.0) {
        return bad("top-p", "in (0, 1]", &p.top_p);
    }
    if p.candidates == 0 {
        return bad("candidates", "at least 1", &p.candidates);
    }
    if !(-1.0..=1.0).contains(&p.sts_threshold) {
        return bad("sts-threshold", "in [-1, 1]", &p.sts_threshold);
    }
    Ok(())
}

fn repair_config(params: &RepairParams, detection: &DetectionArgs, seed: u64) -> Result<RepairConfig> {
    check_flags(params)?;
    let config = RepairConfig {
        candidate_count: params.candidates,
        sts_threshold: params.sts_threshold,
        diffusion: DiffusionConfig {
            total_steps: params.steps,
            temperature: params.tau,
            guidance_strength: params.lambda,
            top_p: params.top_p,
            rng_seed: seed,
        },
        detection: detection_config(detection)?,
    };
    config.validate().map_err(|e| match e {
        Error::Config(m) => Error::Validation(m),
        other => other,
    })?;
    Ok(config)
}

fn open_translator(args: &TranslatorArgs, seed: u64) -> Result<Box<dyn Translator>> {
    let dictionary = |strip: StripPolicy, name: &str| -> Result<DictionaryTranslator> {
        Ok(match &args.dictionary {
            Some(p) => DictionaryTranslator::load(p)?.with_strip(strip),
            None => DictionaryTranslator::new(
                name,
                synthetic::dictionary_entries(),
                synthetic::neutral_entries(),
                strip,
            ),
        })
    };
    let inner: Box<dyn Translator> = match args.translator {
        TranslatorChoice::Identity => Box::new(IdentityTranslator),
        TranslatorChoice::Dictionary => Box::new(dictionary(StripPolicy::Never, "dictionary")?),
        TranslatorChoice::DictionaryStripping => {
            if !(0.0..=1.0).contains(&args.strip_fraction) {
                return Err(Error::Validation(format!(
                    "--strip-fraction must lie in [0, 1], got {}",
                    args.strip_fraction
                )));
            }
            Box::new(dictionary(
                StripPolicy::Fraction {
                    fraction: args.strip_fraction,
                    seed,
                },
                "dictionary-stripping",
            )?)
        }
        TranslatorChoice::Http => {
            let endpoint = args
                .translate_endpoint
                .as_ref()
                .ok_or_else(|| Error::Config("--translate-endpoint is required for the http translator".into()))?;
            Box::new(HttpTranslator::new("http", endpoint, &args.api_key_env))
        }
    };
    let dir = args
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from));
    Ok(match dir {
        Some(d) => Box::new(CachedTranslator::new(inner, d).cache_only(args.cache_only)),
        None if args.cache_only => {
            return Err(Error::Config(
                "--cache-only needs --cache-dir or BABEL_CACHE_DIR".into(),
            ))
        }
        None => inner,
    })
}

fn load_gold(path: Option<&Path>) -> Result<Option<HashMap<String, bool>>> {
    path.map(|p| -> Result<_> { Ok(serde_json::from_slice(&std::fs::read(p)?)?) })
        .transpose()
}

fn load_inputs(corpus: &Path, profile: &Path) -> Result<(Vec<CorpusRecord>, StyleProfile)> {
    let profile = StyleProfile::load(profile)?;
    let records = load_corpus(corpus)?;
    crate::harness::corpus::check_labels(&records, &profile)?;
    Ok((records, profile))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    if let Some(p) = out {
        write_file(p, contents)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DetectRecord {
    id: String,
    domain: String,
    source: String,
    translation: String,
    verdict: DetectionVerdict,
}

#[derive(Debug, Serialize)]
struct DetectOutput {
    records: Vec<DetectRecord>,
    exclusions: Vec<Exclusion>,
}

fn detect(a: &DetectArgs) -> Result<()> {
    let config = detection_config(&a.detection)?;
    let (records, profile) = load_inputs(&a.corpus, &a.detection.profile)?;
    let client = open_translator(&a.translator, a.common.seed)?;
    let backends = BackendSet::single(open_backend(&a.backend)?);
    let (translated, mut exclusions) = translate_records(&records, client.as_ref(), &a.translator.target_lang);
    let mut out = Vec::new();
    for t in translated {
        let v = check_consistency(
            Segment::new(&t.record.text, &t.record.lang),
            Segment::new(&t.translation, &t.target_lang),
            &profile,
            &config,
            &backends,
        );
        match v {
            Ok(verdict) => out.push(DetectRecord {
                id: t.record.id,
                domain: t.record.domain,
                source: t.record.text,
                translation: t.translation,
                verdict,
            }),
            Err(e) => exclusions.push(Exclusion {
                id: t.record.id,
                domain: t.record.domain,
                stage: "detect".into(),
                error: e.to_string(),
            }),
        }
    }
    let flagged = out.iter().filter(|r| r.verdict.flagged).count();
    println!(
        "flagged {flagged} of {} translations (h = {}); {} excluded",
        out.len(),
        config.threshold,
        exclusions.len()
    );
    let output = DetectOutput {
        records: out,
        exclusions,
    };
    let contents = match a.common.format {
        FormatChoice::Json => to_json(&output)?,
        FormatChoice::Csv => {
            let mut s = String::from("id,domain,source_label,source_confidence,translation_confidence,flagged\n");
            for r in &output.records {
                s += &format!(
                    "{},{},{},{},{},{}\n",
                    r.id,
                    r.domain,
                    r.verdict.source_label,
                    r.verdict.source_confidence,
                    r.verdict.translation_confidence_for_source_label,
                    r.verdict.flagged
                );
            }
            s
        }
    };
    emit(a.common.out.as_deref(), &contents)
}

fn repair_pair(a: &RepairArgs) -> Result<()> {
    let config = repair_config(&a.params, &a.detection, a.common.seed)?;
    let profile = StyleProfile::load(&a.detection.profile)?;
    let backends = BackendSet::single(open_backend(&a.backend)?);
    let source = Segment::new(&a.source, &a.source_lang);
    let translation = Segment::new(&a.translation, &a.target_lang);
    let verdict = check_consistency(source, translation, &profile, &config.detection, &backends)?;
    if !verdict.flagged && !a.force {
        println!(
            "not flagged: confidence {:.4} for {:?} is at least h = {}",
            verdict.translation_confidence_for_source_label, verdict.source_label, config.detection.threshold
        );
        return emit(a.common.out.as_deref(), &to_json(&verdict)?);
    }
    let result = repair(source, translation, &profile, &config, &backends, a.common.seed)?;
    match result.selected() {
        Some(c) => println!("repaired: {:?} (style {:.4}, sts {:.4})", c.text, c.style_score, c.sts),
        None => println!("no candidate passed the semantic gate; keeping the original"),
    }
    emit(a.common.out.as_deref(), &to_json(&result)?)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let config = repair_config(&a.params, &a.detection, a.common.seed)?;
    let (records, profile) = load_inputs(&a.corpus, &a.detection.profile)?;
    let gold = load_gold(a.gold.as_deref())?;
    let client = open_translator(&a.translator, a.common.seed)?;
    let backends = BackendSet::single(open_backend(&a.backend)?);
    let system = a.system.clone().unwrap_or_else(|| client.name().to_string());
    let report = evaluate_system(
        &system,
        &records,
        client.as_ref(),
        &a.translator.target_lang,
        &profile,
        &config,
        &backends,
        gold.as_ref(),
        a.common.seed,
    )?;
    for avg in &report.averages {
        println!(
            "{}: bias ratio {} -> {}, style score {} -> {}",
            avg.system,
            crate::harness::report::format_percent(avg.bias_ratio),
            crate::harness::report::format_percent(avg.revised_bias_ratio),
            crate::harness::report::format_score(avg.style_score),
            crate::harness::report::format_score(avg.revised_style_score),
        );
    }
    println!("{} records excluded; {}", report.exclusions.len(), report.note);
    emit(
        a.common.out.as_deref(),
        &render_evaluation(&report, a.common.format.into())?,
    )
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let param: SweepParam = a.param.parse()?;
    let config = repair_config(&a.params, &a.detection, a.common.seed)?;
    let (records, profile) = load_inputs(&a.corpus, &a.detection.profile)?;
    let gold = load_gold(a.gold.as_deref())?;
    let client = open_translator(&a.translator, a.common.seed)?;
    let backends = BackendSet::single(open_backend(&a.backend)?);
    let (translated, exclusions) = translate_records(&records, client.as_ref(), &a.translator.target_lang);
    let mut result = sweep_parameter(
        param,
        &a.values,
        &config,
        &translated,
        &profile,
        &backends,
        gold.as_ref(),
        a.common.seed,
    )?;
    result.exclusions.splice(0..0, exclusions);
    println!(
        "{param} sweep over {} values, {} records",
        result.points.len(),
        result.evaluated
    );
    emit(a.common.out.as_deref(), &render_sweep(&result, a.common.format.into())?)
}

fn train_toy(a: &TrainToyArgs) -> Result<()> {
    let mut config = ToyWorldConfig {
        records: a.records,
        seed: a.seed,
        embedding_dim: a.dim,
        ..ToyWorldConfig::default()
    };
    config.training.steps = a.train_steps;
    config.training.batch_size = a.batch_size;
    config.training.learning_rate = a.learning_rate;
    config.training.total_steps = a.diffusion_steps;
    config.training.seed = a.seed;
    let world = ToyWorld::build(&config)?;
    std::fs::create_dir_all(&a.out_dir)?;
    world.backend.save(a.out_dir.join("model.json"))?;
    world.profile.save(a.out_dir.join("profile.json"))?;
    write_corpus(a.out_dir.join("train.jsonl"), &world.train)?;
    write_corpus(a.out_dir.join("test.jsonl"), &world.test)?;
    let losses = &world.trace.losses;
    let window = losses.len().clamp(1, 50);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
    println!(
        "trained on {} records: loss {:.4} -> {:.4}; wrote {}",
        world.train.len(),
        mean(&losses[..window.min(losses.len())]),
        mean(&losses[losses.len().saturating_sub(window)..]),
        a.out_dir.display()
    );
    Ok(())
}

fn capabilities(a: &CapabilitiesArgs) -> Result<()> {
    let backend = open_backend(&a.backend)?;
    let json = to_json(backend.descriptor())?;
    print!("{json}");
    emit(a.out.as_deref(), &json)
}
