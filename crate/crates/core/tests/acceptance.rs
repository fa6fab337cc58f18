//! Acceptance suite. Runs every criterion at its stated tolerance and time
//! budget and prints one PASS/FAIL line each. Exits non-zero on any FAIL.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use babel::applicator::{
    apply_style, guidance_gradient, nucleus_distribution, sample_unguided, top_p_sample, GuidanceSet,
};
use babel::backend::{
    BackendSet, DenoiseExample, ModelBackend, ReferenceBackend, ReferenceConfig, TrainableDenoiser, Vocabulary,
};
use babel::detector::ConfusionMatrix;
use babel::diffusion::{beta, forward_diffuse, seeded_rng, standard_normal, DiffusionConfig, Timestep};
use babel::harness::evaluate::{average_rows, evaluate_system, translate_records, DomainRow, EvaluationReport};
use babel::harness::report::{format_percent, format_score, to_json};
use babel::harness::sweep::{sweep_parameter, SweepParam};
use babel::harness::synthetic::{
    faithful_translator, style_stripping_translator, ToyWorld, ToyWorldConfig, FORMAL, TARGET_LANG,
};
use babel::harness::translate::{CachedTranslator, HttpTranslator, Translator};
use babel::repair::RepairConfig;
use babel::tensor::{softmax_with_temperature, EmbeddingMatrix, LogitsMatrix};
use rand::Rng;

// Reported detection results: (system, domain, TP, TN, FP, FN, precision %, FPR %).
type DetectionRow = (&'static str, &'static str, u64, u64, u64, u64, f64, f64);
const DETECTION_RESULTS: [DetectionRow; 30] = [
    ("Google", "Law", 22, 23, 5, 0, 81.48, 17.86),
    ("Google", "Literature", 21, 24, 4, 1, 84.00, 14.29),
    ("Google", "Wikipedia", 20, 25, 3, 2, 86.96, 10.71),
    ("Google", "Medicine", 19, 26, 2, 3, 90.48, 7.14),
    ("Google", "Education", 20, 24, 2, 4, 90.91, 7.69),
    ("Baidu", "Law", 23, 22, 4, 1, 85.19, 15.38),
    ("Baidu", "Literature", 22, 23, 3, 2, 88.00, 11.54),
    ("Baidu", "Wikipedia", 23, 25, 0, 2, 100.00, 0.00),
    ("Baidu", "Medicine", 20, 23, 1, 6, 95.24, 4.17),
    ("Baidu", "Education", 19, 23, 3, 5, 86.36, 11.54),
    ("Youdao", "Law", 21, 22, 6, 1, 77.78, 21.43),
    ("Youdao", "Literature", 19, 24, 6, 1, 76.00, 20.00),
    ("Youdao", "Wikipedia", 20, 24, 3, 3, 86.96, 11.11),
    ("Youdao", "Medicine", 20, 24, 1, 5, 95.24, 4.00),
    ("Youdao", "Education", 22, 25, 0, 3, 100.00, 0.00),
    ("Opus-MT", "Law", 24, 21, 3, 2, 88.89, 12.50),
    ("Opus-MT", "Literature", 22, 20, 3, 5, 88.00, 13.04),
    ("Opus-MT", "Wikipedia", 21, 22, 2, 5, 91.30, 8.33),
    ("Opus-MT", "Medicine", 15, 28, 6, 1, 71.43, 17.65),
    ("Opus-MT", "Education", 22, 25, 0, 3, 100.00, 0.00),
    ("GPT-4o", "Law", 20, 24, 4, 2, 83.33, 14.29),
    ("GPT-4o", "Literature", 19, 25, 5, 1, 79.17, 16.67),
    ("GPT-4o", "Wikipedia", 22, 24, 2, 2, 91.67, 7.69),
    ("GPT-4o", "Medicine", 21, 23, 3, 3, 87.50, 11.54),
    ("GPT-4o", "Education", 19, 24, 4, 3, 82.61, 14.29),
    ("Claude 3.7", "Law", 21, 23, 3, 3, 87.50, 11.54),
    ("Claude 3.7", "Literature", 20, 24, 4, 2, 83.33, 14.29),
    ("Claude 3.7", "Wikipedia", 23, 24, 1, 2, 95.83, 4.00),
    ("Claude 3.7", "Medicine", 22, 22, 2, 4, 91.67, 8.33),
    ("Claude 3.7", "Education", 20, 25, 3, 2, 86.96, 10.71),
];

// Reported repair results: per system, five domain rows then the printed average.
// Columns: bias %, score, revised bias %, revised score, STS.
type RepairRow = (f64, f64, f64, f64, f64);
const REPAIR_RESULTS: [(&str, [RepairRow; 6]); 6] = [
    (
        "Google",
        [
            (17.54, 0.72, 7.87, 0.77, 0.91),
            (12.34, 0.75, 7.67, 0.78, 0.88),
            (5.98, 0.73, 2.34, 0.79, 0.93),
            (15.67, 0.74, 5.98, 0.80, 0.91),
            (14.21, 0.76, 11.56, 0.81, 0.95),
            (13.15, 0.74, 7.08, 0.79, 0.92),
        ],
    ),
    (
        "Baidu",
        [
            (18.34, 0.71, 6.78, 0.76, 0.90),
            (8.54, 0.77, 4.89, 0.82, 0.87),
            (7.33, 0.72, 5.67, 0.79, 0.92),
            (7.54, 0.70, 3.45, 0.75, 0.93),
            (13.89, 0.73, 11.33, 0.78, 0.94),
            (11.13, 0.73, 6.42, 0.78, 0.91),
        ],
    ),
    (
        "Youdao",
        [
            (16.47, 0.72, 10.21, 0.77, 0.91),
            (8.90, 0.78, 6.54, 0.83, 0.90),
            (10.67, 0.74, 5.22, 0.79, 0.93),
            (9.87, 0.75, 7.65, 0.81, 0.94),
            (11.45, 0.76, 9.10, 0.82, 0.95),
            (11.47, 0.75, 7.74, 0.80, 0.93),
        ],
    ),
    (
        "Opus-MT",
        [
            (15.78, 0.72, 10.56, 0.77, 0.92),
            (7.45, 0.76, 5.23, 0.83, 0.89),
            (6.34, 0.74, 4.21, 0.79, 0.92),
            (19.95, 0.71, 17.82, 0.76, 0.93),
            (13.66, 0.73, 11.47, 0.78, 0.94),
            (12.64, 0.73, 9.86, 0.79, 0.92),
        ],
    ),
    (
        "GPT-4",
        [
            (15.80, 0.74, 6.65, 0.78, 0.90),
            (14.20, 0.73, 8.34, 0.77, 0.88),
            (8.40, 0.79, 4.12, 0.82, 0.93),
            (17.20, 0.73, 9.45, 0.78, 0.90),
            (12.90, 0.77, 8.21, 0.80, 0.92),
            (13.70, 0.75, 7.35, 0.79, 0.91),
        ],
    ),
    (
        "Claude 3.7",
        [
            (16.20, 0.75, 7.25, 0.79, 0.89),
            (15.60, 0.72, 9.11, 0.76, 0.87),
            (9.80, 0.78, 5.23, 0.81, 0.92),
            (18.70, 0.72, 10.24, 0.77, 0.89),
            (13.70, 0.76, 8.67, 0.79, 0.91),
            (14.80, 0.75, 8.10, 0.78, 0.90),
        ],
    ),
];

const DOMAINS: [&str; 5] = ["Law", "Literature", "Wikipedia", "Medicine", "Education"];

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn detection_arithmetic() -> Result<String, String> {
    for (sys, dom, tp, tn, fp, fn_, prec, fpr) in DETECTION_RESULTS {
        let m = ConfusionMatrix::new(tp, tn, fp, fn_);
        let p = m.precision().ok_or("precision undefined")? * 100.0;
        let f = m.fpr().ok_or("fpr undefined")? * 100.0;
        ensure((p - prec).abs() <= 0.01, || {
            format!("{sys}/{dom}: precision {p:.4} vs {prec}")
        })?;
        ensure((f - fpr).abs() <= 0.01, || format!("{sys}/{dom}: FPR {f:.4} vs {fpr}"))?;
    }
    Ok(format!("{} rows within 0.01 pp", DETECTION_RESULTS.len()))
}

fn repair_aggregation() -> Result<String, String> {
    let mut rows = Vec::new();
    for (sys, block) in REPAIR_RESULTS {
        for (dom, r) in DOMAINS.iter().zip(&block[..5]) {
            rows.push(DomainRow {
                system: sys.into(),
                domain: dom.to_string(),
                total: 0,
                evaluated: 0,
                excluded: 0,
                flagged: 0,
                bias_ratio: Some(r.0 / 100.0),
                style_score: Some(r.1),
                revised_flagged: 0,
                revised_bias_ratio: Some(r.2 / 100.0),
                revised_style_score: Some(r.3),
                repaired: 0,
                sts_mean: Some(r.4),
            });
        }
    }
    let averages = average_rows(&rows);
    ensure(averages.len() == 6, || format!("{} systems", averages.len()))?;
    let mut checked = 0;
    for ((sys, block), avg) in REPAIR_RESULTS.iter().zip(&averages) {
        ensure(avg.system == *sys, || format!("order: {} vs {sys}", avg.system))?;
        let printed = block[5];
        let pairs = [
            (
                "bias",
                avg.bias_ratio.unwrap() * 100.0,
                printed.0,
                format_percent(avg.bias_ratio),
                format!("{:.2}%", printed.0),
            ),
            (
                "score",
                avg.style_score.unwrap(),
                printed.1,
                format_score(avg.style_score),
                format!("{:.2}", printed.1),
            ),
            (
                "revised bias",
                avg.revised_bias_ratio.unwrap() * 100.0,
                printed.2,
                format_percent(avg.revised_bias_ratio),
                format!("{:.2}%", printed.2),
            ),
            (
                "revised score",
                avg.revised_style_score.unwrap(),
                printed.3,
                format_score(avg.revised_style_score),
                format!("{:.2}", printed.3),
            ),
            (
                "sts",
                avg.sts_mean.unwrap(),
                printed.4,
                format_score(avg.sts_mean),
                format!("{:.2}", printed.4),
            ),
        ];
        for (name, got, want, got_s, want_s) in pairs {
            ensure((got - want).abs() <= 0.01 + 1e-9, || {
                format!("{sys} {name}: {got:.4} vs {want}")
            })?;
            ensure(got_s == want_s, || {
                format!("{sys} {name}: emitted {got_s} vs printed {want_s}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} averages within 0.01 and equal as emitted"))
}

fn schedule_suite() -> Result<String, String> {
    let t_max = 10_000;
    ensure(beta(0, t_max).unwrap() == 1.0, || "beta_0 != 1".into())?;
    ensure(beta(t_max, t_max).unwrap() == 0.0, || "beta_T != 0".into())?;
    let mut prev = f64::INFINITY;
    for t in 0..=t_max {
        let b = beta(t, t_max).unwrap();
        ensure(b < prev, || format!("not strictly decreasing at t={t}"))?;
        prev = b;
    }

    let dim = 16;
    let rows: Vec<Vec<f64>> = vec![(0..dim).map(|j| 0.5 + 0.25 * (j as f64).sin()).collect()];
    let clean = EmbeddingMatrix::from_rows(&rows).unwrap();
    let clean_energy: f64 = rows[0].iter().map(|v| v * v).sum();
    let total = 800;
    let config = DiffusionConfig {
        total_steps: total,
        ..Default::default()
    };
    let draws = 10_000;
    let mut worst: f64 = 0.0;
    for t in [0, 100, 400, 700, 800] {
        let mut rng = seeded_rng(t as u64);
        let mut acc = 0.0;
        for _ in 0..draws {
            let noise = standard_normal(1, dim, &mut rng);
            let x = forward_diffuse(&clean, t, &config, &noise).unwrap();
            acc += x.as_slice().iter().map(|v| v * v).sum::<f64>();
        }
        let b = ((total - t) as f64 / total as f64).sqrt();
        let expected = b * clean_energy + (1.0 - b) * dim as f64;
        let rel = (acc / draws as f64 - expected).abs() / expected;
        worst = worst.max(rel);
        ensure(rel <= 0.03, || format!("t={t}: energy off by {:.2}%", rel * 100.0))?;
    }
    Ok(format!(
        "endpoints exact, 10^4-point grid monotone, energy within {:.2}%",
        worst * 100.0
    ))
}

fn small_backend(seed: u64, dim: usize) -> ReferenceBackend {
    ReferenceBackend::new(ReferenceConfig::new(
        seed,
        dim,
        Vocabulary::printable_ascii(),
        vec!["formal".into(), "informal".into()],
        vec!["es".into()],
    ))
    .unwrap()
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Five-point central difference: truncation error O(h^4), so a step of
/// 1e-3 keeps both truncation and round-off far below the tolerance.
fn five_point(h: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

fn gradient_oracles() -> Result<String, String> {
    // Training loss: central differences on sampled parameters, plus an
    // independent cross-entropy recomputation of the loss itself.
    let mut backend = small_backend(5, 4);
    let mut rng = seeded_rng(21);
    let params: Vec<f64> = (0..backend.denoiser_parameter_count())
        .map(|_| rng.random_range(-0.3..0.3))
        .collect();
    let config = DiffusionConfig {
        total_steps: 10,
        ..Default::default()
    };
    let mut batch = Vec::new();
    for (k, (target, cond)) in [("EL JUEZ.", "el juez."), ("va a ir", "va a ir"), ("OK", "ok")]
        .iter()
        .enumerate()
    {
        let target = backend.tokenize(target).unwrap();
        let condition = backend.tokenize(cond).unwrap();
        let clean = backend.embed_tokens(&target).unwrap();
        let t = 3 + 2 * k;
        let noise = standard_normal(target.len(), 4, &mut rng);
        batch.push(DenoiseExample {
            x_t: forward_diffuse(&clean, t, &config, &noise).unwrap(),
            t: Timestep::new(t, 10).unwrap(),
            condition,
            target,
        });
    }
    let (loss, grad) = backend.denoiser_loss_and_gradient(&params, &batch).unwrap();

    backend.set_denoiser_parameters(params.clone()).unwrap();
    let (mut ce, mut n) = (0.0, 0usize);
    for ex in &batch {
        let logits = backend.denoise(&ex.x_t, ex.t, &ex.condition).unwrap();
        for (row, &id) in logits.iter_rows().zip(ex.target.ids()) {
            ce -= log_softmax(row)[id as usize];
            n += 1;
        }
    }
    ensure(relative_error(ce / n as f64, loss) <= 1e-9, || {
        format!("loss {loss} vs recomputed cross-entropy {}", ce / n as f64)
    })?;

    let mut worst: f64 = 0.0;
    let picks: Vec<usize> = (0..60).map(|_| rng.random_range(0..params.len())).collect();
    for i in picks {
        let fd = five_point(1e-3, |d| {
            let mut p = params.clone();
            p[i] += d;
            backend.denoiser_loss_and_gradient(&p, &batch).unwrap().0
        });
        let e = relative_error(grad[i], fd);
        worst = worst.max(e);
        ensure(e <= 1e-4, || format!("training grad[{i}]: {} vs fd {fd}", grad[i]))?;
    }

    // Guidance: dJ/dlogits against central differences of J.
    let fixture = common::shared_fixture_backend();
    let samples = vec![
        "EL JUEZ DEBERA FIRMAR EL CONTRATO.".to_string(),
        "LA REINA DEBERA LEER LA CARTA.".to_string(),
    ];
    let guidance = GuidanceSet::from_samples(&samples, TARGET_LANG, fixture.as_ref()).unwrap();
    let vocab = fixture.descriptor().vocab_size;
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..vocab).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let logits = LogitsMatrix::from_rows(&rows).unwrap();
    let tau = 0.3;
    let eval = guidance_gradient(&logits, &guidance, fixture.as_ref(), tau).unwrap();
    let mut checked = 0;
    for _ in 0..60 {
        let (r, c) = (rng.random_range(0..5), rng.random_range(0..vocab));
        let fd = five_point(1e-3, |d| {
            let mut l = logits.clone();
            l.row_mut(r)[c] += d;
            guidance_gradient(&l, &guidance, fixture.as_ref(), tau).unwrap().value
        });
        let an = eval.gradient.get(r, c);
        let e = relative_error(an, fd);
        worst = worst.max(e);
        ensure(e <= 1e-4, || format!("guidance grad[{r},{c}]: {an} vs fd {fd}"))?;
        checked += 1;
    }
    Ok(format!(
        "60 training + {checked} guidance entries, worst relative error {worst:.2e}"
    ))
}

fn sampler_suite() -> Result<String, String> {
    let mut rng = seeded_rng(99);
    for case in 0..1000 {
        let vocab = rng.random_range(1..=50);
        let weights: Vec<f64> = (0..vocab)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.0..1.0f64).powi(3)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            continue;
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let p = if case % 10 == 0 {
            1.0
        } else {
            rng.random_range(0.05..1.0)
        };

        // Oracle: token i is kept iff the mass ranked strictly before it is
        // below p (rank by probability, ties by smaller id).
        let before = |i: usize| -> f64 {
            let mut ranked: Vec<usize> = (0..vocab)
                .filter(|&j| probs[j] > probs[i] || (probs[j] == probs[i] && j < i))
                .collect();
            ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
            ranked.iter().map(|&j| probs[j]).sum()
        };
        let support: Vec<usize> = (0..vocab).filter(|&i| before(i) < p).collect();
        let mass: f64 = support.iter().map(|&i| probs[i]).sum();
        let got = nucleus_distribution(&probs, p);
        let mut got_ids: Vec<usize> = got.iter().map(|&(id, _)| id as usize).collect();
        got_ids.sort_unstable();
        ensure(got_ids == support, || {
            format!("case {case}: support {got_ids:?} vs {support:?}")
        })?;
        for &(id, q) in &got {
            let want = probs[id as usize] / mass;
            ensure((q - want).abs() <= 1e-12, || {
                format!("case {case}: token {id} prob {q} vs {want}")
            })?;
        }
        let s: f64 = got.iter().map(|g| g.1).sum();
        ensure((s - 1.0).abs() <= 1e-9, || format!("case {case}: sums to {s}"))?;

        // Sampling follows the inverse CDF of the nucleus, one uniform per row.
        let logits = LogitsMatrix::from_rows(&[probs.iter().map(|q| (q + 1e-300).ln()).collect()]).unwrap();
        let seed = case as u64;
        let drawn = top_p_sample(&logits, 1.0, p, &mut seeded_rng(seed)).unwrap().ids()[0] as usize;
        let u: f64 = seeded_rng(seed).random();
        let nucleus = nucleus_distribution(&softmax_with_temperature(logits.row(0), 1.0), p);
        let mut acc = 0.0;
        let mut expected = nucleus.last().unwrap().0 as usize;
        for &(id, q) in &nucleus {
            acc += q;
            if u < acc {
                expected = id as usize;
                break;
            }
        }
        ensure(drawn == expected, || {
            format!("case {case}: drew {drawn}, inverse CDF gives {expected}")
        })?;
    }

    let backend = common::shared_fixture_backend();
    let samples = vec!["EL JUEZ DEBERA FIRMAR EL CONTRATO.".to_string()];
    let guidance = GuidanceSet::from_samples(&samples, TARGET_LANG, backend.as_ref()).unwrap();
    let config = DiffusionConfig {
        total_steps: 20,
        guidance_strength: 0.0,
        ..Default::default()
    };
    for seed in 0..20 {
        let text = "el juez va a firmar el contrato.";
        let guided = apply_style(text, &guidance, &config, backend.as_ref(), seed).unwrap();
        let plain = sample_unguided(text, &config, backend.as_ref(), seed).unwrap();
        ensure(guided == plain, || format!("seed {seed}: {guided:?} vs {plain:?}"))?;
    }
    Ok("1000 distributions match the oracle; lambda=0 equals unguided on 20 seeds".into())
}

const E2E_SEEDS: [u64; 3] = [0, 1, 2];
const E2E_RECORDS: usize = 1000;
const E2E_STEPS: usize = 100;

fn e2e_world(seed: u64) -> ToyWorld {
    let mut cfg = ToyWorldConfig {
        records: E2E_RECORDS,
        seed,
        ..Default::default()
    };
    cfg.training.seed = seed;
    ToyWorld::build(&cfg).unwrap()
}

fn e2e_config() -> RepairConfig {
    let mut c = RepairConfig::default();
    c.diffusion.total_steps = E2E_STEPS;
    c
}

fn end_to_end() -> Result<String, String> {
    let mut lines = Vec::new();
    for seed in E2E_SEEDS {
        let world = e2e_world(seed);
        ensure(world.test.len() >= 200, || {
            format!("only {} test records", world.test.len())
        })?;
        let translator = style_stripping_translator(0.5, seed);
        let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);
        let report = evaluate_system(
            "stripping",
            &world.test,
            &translator,
            TARGET_LANG,
            &world.profile,
            &e2e_config(),
            &backends,
            None,
            seed,
        )
        .map_err(|e| e.to_string())?;
        ensure(report.exclusions.is_empty(), || {
            format!("seed {seed}: {} exclusions", report.exclusions.len())
        })?;
        let n = report.records.len();
        let flagged = report.records.iter().filter(|o| o.verdict.flagged).count();
        let remaining = report.records.iter().filter(|o| o.final_flagged).count();
        let sts: Vec<f64> = report.records.iter().filter_map(|o| o.selected_sts()).collect();
        ensure(!sts.is_empty(), || format!("seed {seed}: nothing repaired"))?;
        let sts_mean = sts.iter().sum::<f64>() / sts.len() as f64;
        let (bias, revised) = (flagged as f64 / n as f64, remaining as f64 / n as f64);
        ensure(revised < bias, || {
            format!("seed {seed}: revised {revised:.4} not below {bias:.4}")
        })?;
        ensure(sts_mean >= 0.85, || format!("seed {seed}: mean STS {sts_mean:.4}"))?;
        lines.push(format!(
            "seed {seed}: {n} records, bias {bias:.4} -> {revised:.4}, STS {sts_mean:.4}"
        ));
    }
    Ok(lines.join("; "))
}

fn sweep_shape() -> Result<String, String> {
    let world = common::toy_world();
    let translator = style_stripping_translator(0.5, 0);
    let faithful = faithful_translator();
    let (translated, _) = translate_records(&world.test, &translator, TARGET_LANG);
    let gold: HashMap<String, bool> = translated
        .iter()
        .map(|t| {
            let f = faithful.translate(&t.record.text, "en", TARGET_LANG).unwrap();
            (t.record.id.clone(), t.record.style == FORMAL && t.translation != f)
        })
        .collect();
    let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);
    let config = e2e_config();

    // Confidences on faithful translations sit close to 1, so the grid is
    // dense near the top where negatives start to be flagged.
    let mut grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    grid.extend([0.97, 0.98, 0.99, 0.995, 0.998, 0.999, 0.9995, 0.9999]);
    let h = sweep_parameter(
        SweepParam::H,
        &grid,
        &config,
        &translated,
        &world.profile,
        &backends,
        Some(&gold),
        0,
    )
    .map_err(|e| e.to_string())?;
    ensure(h.points.len() == grid.len(), || "h sweep incomplete".into())?;
    let fprs: Vec<f64> = h.points.iter().map(|p| p.confusion.unwrap().fpr.unwrap()).collect();
    ensure(fprs.windows(2).all(|w| w[0] <= w[1]), || {
        format!("FPR not monotone: {fprs:?}")
    })?;
    // Guard against a vacuous pass on a constant series.
    ensure(fprs[fprs.len() - 1] > fprs[0], || format!("FPR never moves: {fprs:?}"))?;

    let subset = &translated[..60.min(translated.len())];
    let mut out = vec![format!(
        "h: FPR {:.3}..{:.3} over {} values",
        fprs[0],
        fprs[fprs.len() - 1],
        grid.len()
    )];
    for (param, values) in [
        (SweepParam::Tau, vec![0.1, 0.3, 0.5]),
        (SweepParam::Lambda, vec![100.0, 1000.0, 3000.0]),
    ] {
        let run = || {
            sweep_parameter(param, &values, &config, subset, &world.profile, &backends, None, 5)
                .map_err(|e| e.to_string())
        };
        let (a, b) = (run()?, run()?);
        ensure(a == b, || format!("{param} sweep not deterministic"))?;
        ensure(a.points.len() == values.len(), || format!("{param} sweep incomplete"))?;
        for p in &a.points {
            ensure(p.remaining_issues.is_some() && p.style_score.is_some(), || {
                format!("{param}={}: missing metrics", p.value)
            })?;
        }
        let series: Vec<String> = a
            .points
            .iter()
            .map(|p| {
                format!(
                    "{}:{}/{:.3}",
                    p.value,
                    p.remaining_issues.unwrap(),
                    p.style_score.unwrap()
                )
            })
            .collect();
        out.push(format!("{param} {}", series.join(" ")));
    }
    Ok(out.join("; "))
}

fn hermeticity() -> Result<String, String> {
    // The evaluation path runs from a response cache alone: the wrapped
    // client points at a closed port and the cache refuses to fall through.
    let world = common::toy_world();
    let records = &world.test[..40.min(world.test.len())];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seeding = CachedTranslator::new(style_stripping_translator(0.5, 0), dir.path());
    for r in records {
        seeding
            .translate(&r.text, &r.lang, TARGET_LANG)
            .map_err(|e| e.to_string())?;
    }
    // Entries are keyed by client name, so copy them under the offline
    // client's name.
    let offline_inner = HttpTranslator::new("dictionary-stripping", "http://127.0.0.1:9", "BABEL_UNUSED_KEY");
    let offline = CachedTranslator::new(offline_inner, dir.path()).cache_only(true);
    let backends = BackendSet::single(world.backend.clone() as Arc<dyn ModelBackend>);
    let run = || -> Result<String, String> {
        let r: EvaluationReport = evaluate_system(
            "cached",
            records,
            &offline,
            TARGET_LANG,
            &world.profile,
            &e2e_config(),
            &backends,
            None,
            7,
        )
        .map_err(|e| e.to_string())?;
        ensure(r.exclusions.is_empty(), || {
            format!("{} exclusions: {:?}", r.exclusions.len(), r.exclusions.first())
        })?;
        to_json(&r).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "reports differ between identical runs".into())?;
    Ok(format!(
        "{} records from cache only, reports byte-identical ({} bytes)",
        records.len(),
        a.len()
    ))
}

fn main() {
    let checks: [(&str, Check, Duration); 8] = [
        (
            "detection table arithmetic",
            detection_arithmetic,
            Duration::from_secs(1),
        ),
        ("repair table aggregation", repair_aggregation, Duration::from_secs(1)),
        ("Schedule/diffusion suite", schedule_suite, Duration::from_secs(10)),
        ("Gradient oracles", gradient_oracles, Duration::from_secs(30)),
        ("Sampler suite", sampler_suite, Duration::from_secs(30)),
        ("End-to-end desk-scale repair", end_to_end, Duration::from_secs(300)),
        ("Sweep shape properties", sweep_shape, Duration::from_secs(300)),
        ("Hermeticity", hermeticity, Duration::from_secs(300)),
    ];
    // Shared fixtures are built outside the timed sections.
    let _ = common::shared_fixture_backend();
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Ok(Ok(detail)) if elapsed <= budget => Ok(detail),
            Ok(Ok(_)) => Err(format!("took {elapsed:.2?}, budget {budget:?}")),
            Ok(Err(e)) => Err(e),
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match verdict {
            Ok(detail) => println!("PASS {name} ({elapsed:.2?}): {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
