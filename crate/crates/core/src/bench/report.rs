use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::MetricsReport;
use super::BenchError;

/// One row per metric: exact fraction, its value, and the rounded percentage.
pub fn render_csv(report: &MetricsReport) -> String {
    let mut out = String::from("metric,key,numerator,denominator,value,percent\n");
    let mut frac = |metric: &str, key: &str, f: super::Fraction| {
        let _ = writeln!(
            out,
            "{metric},{key},{},{},{},{}",
            f.num,
            f.den,
            f.value(),
            f.percent_rounded(2)
        );
    };
    for (k, f) in report.success_at.iter().enumerate() {
        frac("success_at", &format!("y{k}"), *f);
    }
    for (d, f) in &report.per_difficulty {
        frac("per_difficulty", &d.to_string(), *f);
    }
    for (kind, f) in &report.failure_breakdown {
        frac("failure_breakdown", &format!("{kind:?}"), *f);
    }
    for (k, d) in report.delta_fractions().into_iter().enumerate() {
        frac("delta", &format!("y{k}->y{}", k + 1), d);
    }
    frac(
        "overall_improvement",
        &format!("y{}-y0", report.k_max()),
        report.improvement_fraction(),
    );
    let t = &report.totals;
    let _ = writeln!(out, "totals,rows,{},,,", t.rows);
    let _ = writeln!(out, "totals,solved,{},,,", t.solved);
    let _ = writeln!(out, "totals,failed,{},,,", t.failed);
    out
}

pub fn render_markdown(report: &MetricsReport) -> String {
    let mut md = String::from("# Benchmark report\n\n");

    md.push_str("## Success rate by difficulty\n\n");
    md.push_str("| difficulty | solved | success |\n|---|---|---|\n");
    for (d, f) in &report.per_difficulty {
        let _ = writeln!(md, "| {d} | {f} | {}% |", f.percent_rounded(2));
    }

    md.push_str("\n## Success rate per refinement iteration\n\n|");
    for k in 0..=report.k_max() {
        let _ = write!(md, " y{k} |");
    }
    md.push_str("\n|");
    md.push_str(&"---|".repeat(report.k_max() + 1));
    md.push_str("\n|");
    for f in &report.success_at {
        let _ = write!(md, " {}% |", f.percent_rounded(2));
    }
    md.push_str("\n|");
    for f in &report.success_at {
        let _ = write!(md, " {f} |");
    }
    md.push('\n');

    md.push_str("\n## Improvement per iteration\n\n| step | points |\n|---|---|\n");
    for (k, d) in report.delta_fractions().into_iter().enumerate() {
        let _ = writeln!(md, "| y{k} -> y{} | {} |", k + 1, d.percent_rounded(2));
    }

    md.push_str("\n## Failure breakdown\n\n");
    if report.failure_breakdown.is_empty() {
        md.push_str("no failures\n");
    } else {
        md.push_str("| kind | count | share |\n|---|---|---|\n");
        for (kind, f) in &report.failure_breakdown {
            let _ = writeln!(md, "| {kind:?} | {f} | {}% |", f.percent_rounded(2));
        }
    }

    let t = &report.totals;
    let _ = write!(
        md,
        "\nTotal: {} queries, {} solved, {} failed. Overall improvement y{} - y0: {} points.\n",
        t.rows,
        t.solved,
        t.failed,
        report.k_max(),
        report.improvement_fraction().percent_rounded(2)
    );
    md
}

/// Writes `metrics.csv`, `report.md`, and `metrics.json` into `outdir`.
pub fn emit_report(report: &MetricsReport, outdir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(outdir)?;
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    let files = [
        ("metrics.csv", render_csv(report)),
        ("report.md", render_markdown(report)),
        ("metrics.json", json),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = outdir.join(name);
        std::fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}
