//! Recompute published precision/FPR cells and per-system averages with the
//! same code paths the harness uses for its own reports.

use babel::detector::ConfusionMatrix;
use babel::harness::evaluate::{average_rows, DomainRow};
use babel::harness::report::{format_change, format_percent, format_score};

pub fn run_example() -> babel::Result<()> {
    // (domain, TP, TN, FP, FN)
    let google = [
        ("Law", 22, 23, 5, 0),
        ("Literature", 21, 24, 4, 1),
        ("Wikipedia", 20, 25, 3, 2),
        ("Medicine", 19, 26, 2, 3),
        ("Education", 20, 24, 2, 4),
    ];
    println!("domain      precision  FPR");
    for (domain, tp, tn, fp, fn_) in google {
        let m = ConfusionMatrix::new(tp, tn, fp, fn_);
        println!(
            "{domain:<11} {:>9}  {}",
            format_percent(m.precision()),
            format_percent(m.fpr())
        );
    }

    // (domain, bias, score, revised bias, revised score, STS)
    let rows = [
        ("Law", 0.1754, 0.72, 0.0787, 0.77, 0.91),
        ("Literature", 0.1234, 0.75, 0.0767, 0.78, 0.88),
        ("Wikipedia", 0.0598, 0.73, 0.0234, 0.79, 0.93),
        ("Medicine", 0.1567, 0.74, 0.0598, 0.80, 0.91),
        ("Education", 0.1421, 0.76, 0.1156, 0.81, 0.95),
    ];
    let rows: Vec<DomainRow> = rows
        .iter()
        .map(|&(domain, b, s, rb, rs, sts)| DomainRow {
            system: "Google".into(),
            domain: domain.into(),
            total: 0,
            evaluated: 0,
            excluded: 0,
            flagged: 0,
            bias_ratio: Some(b),
            style_score: Some(s),
            revised_flagged: 0,
            revised_bias_ratio: Some(rb),
            revised_style_score: Some(rs),
            repaired: 0,
            sts_mean: Some(sts),
        })
        .collect();
    for r in &rows {
        println!(
            "{:<11} {} -> {} ({})",
            r.domain,
            format_percent(r.bias_ratio),
            format_percent(r.revised_bias_ratio),
            format_change(r.bias_ratio, r.revised_bias_ratio)
        );
    }
    let avg = &average_rows(&rows)[0];
    println!(
        "average     {} -> {} ({}), score {} -> {}, STS {}",
        format_percent(avg.bias_ratio),
        format_percent(avg.revised_bias_ratio),
        format_change(avg.bias_ratio, avg.revised_bias_ratio),
        format_score(avg.style_score),
        format_score(avg.revised_style_score),
        format_score(avg.sts_mean)
    );
    Ok(())
}

fn main() -> babel::Result<()> {
    run_example()
}
