//! Report files: `convergence.csv`, `probabilities.csv`, `bound.csv`,
//! `blocklist_<seed>.csv` and `summary.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::report::RunReport;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes every report file into `dir`, replacing earlier ones.
pub fn emit_csv(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let convergence = dir.join("convergence.csv");
    write_csv(
        &convergence,
        &["iteration", "seed", "error_norm", "skipped"],
        report.runs.iter().flat_map(|r| {
            r.curve
                .iter()
                .map(move |p| (p.iteration, r.seed, p.error_norm, u8::from(p.skipped)))
        }),
    )?;

    let a = &report.analysis;
    write_csv(
        &dir.join("probabilities.csv"),
        &["category", "count", "q_mode_exact", "q_mode_decimal"],
        a.counts
            .iter()
            .zip(&a.q_mode_exact)
            .zip(&a.q_mode_decimal)
            .enumerate()
            .map(|(l, ((count, exact), dec))| (l, count, exact, dec)),
    )?;

    write_csv(
        &dir.join("bound.csv"),
        &["iteration", "bound"],
        report.bound.iter().map(|b| (b.iteration, b.bound)),
    )?;

    for r in &report.runs {
        write_csv(
            &dir.join(format!("blocklist_{}.csv", r.seed)),
            &["worker", "category", "counter", "participation", "blocked"],
            r.workers
                .iter()
                .map(|w| (w.worker, w.category, w.counter, w.participation, u8::from(w.blocked))),
        )?;
    }

    let summary = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&summary, text).map_err(io_err(&summary))?;
    Ok(())
}
