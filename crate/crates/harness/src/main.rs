use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rk_core::analysis::{
    convergence_bound, mc_mode_probability, mode_probabilities, to_f64, worker_mode_probability,
    CategoryCounts,
};
use rk_core::kaczmarz::generate_problem;
use rk_harness::report::{bound_inputs, keep_point, AnalysisReport};
use rk_harness::{emit_csv, parse_config, preset_cases, run_experiment, ExperimentConfig, HarnessError, Result, PRESETS};

/// `println!` that stops quietly when stdout is closed early.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "rk-sim", version, about = "Distributed randomized Kaczmarz with adversarial workers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Experiment document.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset; see `rk-sim presets`.
    #[arg(long)]
    preset: Option<String>,
    /// Case label within a multi-case preset.
    #[arg(long, requires = "preset")]
    case: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed of one config.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        full_trace: bool,
    },
    /// Exact mode probabilities for given category counts.
    Probs {
        #[command(flatten)]
        source: Source,
        /// Comma-separated counts, honest first.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["config", "preset", "workers"])]
        counts: Option<Vec<u64>>,
        #[arg(long, requires_all = ["rate", "categories"])]
        workers: Option<usize>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        categories: Option<usize>,
        /// Workers drawn per iteration.
        #[arg(long)]
        n: Option<u64>,
    },
    /// Expected-error bound curve as CSV.
    Bound {
        #[command(flatten)]
        source: Source,
        /// Last iteration; the config's max_iter by default.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        full_trace: bool,
    },
    /// Monte Carlo estimate of the mode probabilities.
    Mc {
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every case of a preset or one config document and write reports.
    Experiment {
        #[command(flatten)]
        source: Source,
        /// Replace the config's seeds with this one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        full_trace: bool,
    },
    /// List presets, or print the documents of one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn config_error(message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        line: None,
        message: message.into(),
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        HarnessError::Config { line, message } => HarnessError::Config {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// `(label, config)` pairs selected by `source`.
fn configs(source: &Source) -> Result<Vec<(String, ExperimentConfig)>> {
    match (&source.config, &source.preset) {
        (Some(path), _) => Ok(vec![(String::new(), read_config(path)?)]),
        (None, Some(name)) => {
            let cases = preset_cases(name)?;
            let chosen: Vec<_> = match &source.case {
                Some(label) => cases.into_iter().filter(|c| &c.label == label).collect(),
                None => cases,
            };
            if chosen.is_empty() {
                return Err(config_error(format!("preset {name} has no case {:?}", source.case)));
            }
            chosen.into_iter().map(|c| Ok((c.label.clone(), c.config()?))).collect()
        }
        (None, None) => Err(config_error("one of --config or --preset is required")),
    }
}

fn single(source: &Source) -> Result<ExperimentConfig> {
    let mut all = configs(source)?;
    if all.len() != 1 {
        let labels: Vec<String> = all.into_iter().map(|(l, _)| l).collect();
        return Err(config_error(format!("pick one case with --case: {}", labels.join(", "))));
    }
    Ok(all.remove(0).1)
}

fn print_json(value: &serde_json::Value) {
    out!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn summary_line(label: &str, report: &rk_harness::RunReport) -> String {
    let a = &report.analysis;
    let mut line = format!("{label:<28} q={:.4} q0={:.4}", a.q, a.q0());
    if let Some(m) = report.median_final_error {
        let n = report.runs.len() as f64;
        let precision: f64 = report.runs.iter().map(|r| r.precision).sum::<f64>() / n;
        let recall: f64 = report.runs.iter().map(|r| r.recall).sum::<f64>() / n;
        line.push_str(&format!(
            " median_final_error={m:.3e} precision={precision:.3} recall={recall:.3}"
        ));
    }
    line
}

fn counts_from_rate(workers: usize, rate: f64, categories: usize, n: u64) -> Result<CategoryCounts> {
    let doc = format!(
        "[pool]\nworkers = {workers}\nadversary_rate = {rate:?}\ncategories = {categories}\n\
         [solve]\nn = {n}\n[run]\nsimulate = false\n"
    );
    parse_config(&doc)?.category_counts()
}

fn probs_report(cc: &CategoryCounts) -> Result<serde_json::Value> {
    let probs = mode_probabilities(cc);
    let mut workers = Vec::new();
    for l in 0..cc.counts().len() {
        if cc.counts()[l] < num_rational::BigRational::from_integer(1.into()) {
            continue;
        }
        let w = worker_mode_probability(cc, l)?;
        workers.push(json!({
            "category": l,
            "p_w": w.p_w.to_string(),
            "p_mode_given_w": w.p_mode_given_w.to_string(),
            "p_mode_given_w_decimal": to_f64(&w.p_mode_given_w),
            "p_joint": w.p_joint.to_string(),
            "p_joint_decimal": to_f64(&w.p_joint),
        }));
    }
    Ok(json!({
        "analysis": AnalysisReport::from_probabilities(cc, &probs),
        "workers": workers,
    }))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets { show: None } => {
            for p in PRESETS {
                out!("{:<8} {}", p.name, p.description);
            }
        }
        Command::Presets { show: Some(name) } => {
            for case in preset_cases(&name)? {
                out!("# {}\n{}", case.label, case.document);
            }
        }
        Command::Experiment {
            source,
            seed,
            out,
            full_trace,
        } => {
            let base = match &source.preset {
                Some(name) if source.config.is_none() => out.join(name),
                _ => out,
            };
            for (label, mut config) in configs(&source)? {
                if let Some(s) = seed {
                    config.run.seeds = vec![s];
                }
                config.run.full_trace |= full_trace;
                let report = run_experiment(&config)?;
                let dir = if label.is_empty() { base.clone() } else { base.join(&label) };
                emit_csv(&report, &dir)?;
                let name = if label.is_empty() { "config" } else { label.as_str() };
                out!("{}", summary_line(name, &report));
            }
        }
        Command::Solve {
            source,
            seed,
            out,
            full_trace,
        } => {
            let mut config = single(&source)?;
            config.run.seeds = vec![seed.unwrap_or(config.run.seeds[0])];
            config.run.full_trace |= full_trace;
            config.run.simulate = true;
            config.validate()?;
            let report = run_experiment(&config)?;
            if let Some(dir) = out {
                emit_csv(&report, &dir)?;
            }
            let r = &report.runs[0];
            print_json(&json!({
                "seed": r.seed,
                "final_error": r.final_error,
                "iterations": r.iterations,
                "updates": r.updates,
                "skips": r.skips,
                "corrupted_updates": r.corrupted_updates,
                "status": r.status,
                "tol_exit_iteration": r.tol_exit_iteration,
                "blocked": r.blocked.len(),
                "precision": r.precision,
                "recall": r.recall,
            }));
        }
        Command::Probs {
            source,
            counts,
            workers,
            rate,
            categories,
            n,
        } => {
            let cc = match (counts, workers) {
                (Some(counts), _) => {
                    let n = n.ok_or_else(|| config_error("--n is required with --counts"))?;
                    CategoryCounts::new(counts, n)?
                }
                (None, Some(workers)) => {
                    let n = n.ok_or_else(|| config_error("--n is required with --workers"))?;
                    counts_from_rate(workers, rate.unwrap_or(0.0), categories.unwrap_or(0), n)?
                }
                (None, None) => single(&source)?.category_counts()?,
            };
            print_json(&probs_report(&cc)?);
        }
        Command::Bound {
            source,
            iterations,
            full_trace,
        } => {
            let config = single(&source)?;
            let p = &config.problem;
            let problem = generate_problem(p.m, p.d, p.noise, p.seed)?;
            let probs = mode_probabilities(&config.category_counts()?);
            let inp = bound_inputs(&config, &problem, &probs)?;
            let total = iterations.unwrap_or(config.solve.max_iter);
            out!("iteration,bound");
            for j in (0..total).filter(|&j| keep_point(j, total, full_trace)) {
                out!("{j},{}", convergence_bound(&inp, j as u64)?);
            }
        }
        Command::Mc {
            counts,
            n,
            trials,
            seed,
        } => {
            let est = mc_mode_probability(&counts, n, trials, seed)?;
            let exact = mode_probabilities(&CategoryCounts::new(counts.clone(), n)?);
            let rows: Vec<_> = (0..counts.len())
                .map(|l| {
                    let q = to_f64(&exact.per_category[l]);
                    json!({
                        "category": l,
                        "count": counts[l],
                        "estimate": est.estimate[l],
                        "stderr": est.stderr[l],
                        "exact": exact.per_category[l].to_string(),
                        "exact_decimal": q,
                    })
                })
                .collect();
            print_json(&json!({ "trials": trials, "seed": seed, "categories": rows }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rk-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
