//! Command-line front end: simulate, classify, bound, sample, verify,
//! and compare tabular verified-reward training runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rlvrsim_core::{
    integrate, train_sampler, verify_trajectory, Baseline, SamplerConfig, Scenario, Trajectory,
};
use rlvrsim::{
    compute_bounds, emit_csv, emit_svg, load_scenario, parse_csv, run_case_study, run_pipeline,
    BoundsDoc, ReportDoc, Result, RunnerError,
};

#[derive(Parser)]
#[command(
    name = "rlvrsim",
    version,
    about = "Tabular verified-reward training dynamics: flows, bounds, samplers, and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    /// Raw score-function estimate.
    None,
    /// Subtract the batch-mean reward.
    BatchMean,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::None => Baseline::None,
            BaselineArg::BatchMean => Baseline::BatchMean,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory to CSV.
    Simulate {
        /// Scenario document (JSON).
        scenario: PathBuf,
        /// Directory for trajectory.csv (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also render trajectory.svg with these comma-separated series
        /// (e.g. "acc,pi_1"); bare --svg plots the accuracy.
        #[arg(long, num_args = 0..=1, default_missing_value = "acc")]
        svg: Option<String>,
    },
    /// Classify the reference and print the applicable bounds, readably.
    Regime {
        scenario: PathBuf,
        /// Tolerance the concentration budgets are computed for.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Print every applicable bound as a JSON object.
    Bounds {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Run a registered case study and write its artifacts.
    Case {
        /// Case name; an unknown name lists the registered ones.
        name: String,
        /// Output directory (defaults to ./<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stochastic training; one CSV per seed plus a JSON summary.
    Sample {
        /// Scenario document with mode "sampled".
        scenario: PathBuf,
        /// Episodes per update.
        #[arg(long)]
        batch: usize,
        /// Step size of each update.
        #[arg(long)]
        lr: f64,
        /// Number of updates per run.
        #[arg(long)]
        steps: usize,
        /// Run seeds 0..K.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Variance-reduction baseline.
        #[arg(long, value_enum, default_value_t = BaselineArg::None)]
        baseline: BaselineArg,
    },
    /// Supervised warm start then reward training, against reward
    /// training alone.
    Pipeline {
        /// Reward-flow scenario whose reference is not already direct.
        scenario: PathBuf,
        /// Warm-start target distribution, comma-separated (e.g. "0.9,0.05,0.05").
        #[arg(long = "p-sft")]
        p_sft: String,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Re-check a stored trajectory against its scenario's invariants.
    Verify {
        /// Trajectory CSV produced by simulate or case.
        trajectory: PathBuf,
        /// The scenario document the trajectory came from.
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text =
        std::fs::read_to_string(path).map_err(|e| RunnerError::io(path.to_path_buf(), e))?;
    load_scenario(&text)
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| RunnerError::io(path.to_path_buf(), e))
}

/// Writes one line to stdout. A consumer that closed the pipe early
/// (`rlvrsim ... | head`) ends the process quietly with success instead
/// of panicking on the broken pipe.
fn emit_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        return Err(RunnerError::io("<stdout>", e));
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| RunnerError::Parse(e.to_string()))?;
    emit_stdout(&text)
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "n/a".to_string(),
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    csv: String,
    svg: Option<String>,
    samples: usize,
    converged: bool,
    final_time: f64,
    final_acc: f64,
}

fn cmd_simulate(scenario_path: &Path, out: &Path, svg: Option<String>) -> Result<()> {
    let scenario = read_scenario(scenario_path)?;
    let trajectory = integrate(&scenario)?;
    ensure_dir(out)?;
    let csv_path = out.join("trajectory.csv");
    emit_csv(&trajectory.samples, trajectory.k, &csv_path)?;
    let svg_path = match svg {
        Some(series_list) => {
            let series: Vec<String> = series_list
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let path = out.join("trajectory.svg");
            emit_svg(&trajectory.samples, trajectory.k, &series, &path)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let last = trajectory.last();
    print_json(&SimulateSummary {
        csv: csv_path.display().to_string(),
        svg: svg_path,
        samples: trajectory.samples.len(),
        converged: trajectory.converged,
        final_time: last.t,
        final_acc: last.acc,
    })
}

fn print_bounds_readably(bounds: &BoundsDoc) -> Result<()> {
    let mut text = format!("regime: {}\n", bounds.regime);
    if bounds.boundary_equality {
        text.push_str("  (a defining inequality holds with equality)\n");
    }
    text.push_str(&format!("Acc at reference: {}\n", bounds.acc_ref));
    text.push_str(&format!("imbalance ratio gamma: {}\n", fmt_opt(bounds.gamma)));
    match (bounds.t0, bounds.t0_overflow) {
        (Some(v), _) => text.push_str(&format!(
            "hand-over bound T0: {v:e} (log10 = {})\n",
            fmt_opt(bounds.t0_log10)
        )),
        (None, true) => text.push_str(&format!(
            "hand-over bound T0: overflows f64 (log10 = {})\n",
            fmt_opt(bounds.t0_log10)
        )),
        (None, false) => text.push_str("hand-over bound T0: n/a\n"),
    }
    text.push_str(&format!(
        "concentration budget T1(eps={}): {}{}\n",
        bounds.epsilon,
        fmt_opt(bounds.t1),
        match bounds.t1_already_satisfied {
            Some(true) => " (already satisfied at t = 0)",
            _ => "",
        }
    ));
    text.push_str(&format!("supervised budget: {}", fmt_opt(bounds.t1_sft)));
    emit_stdout(&text)
}

#[derive(Serialize)]
struct SampleRun {
    seed: u64,
    csv: String,
    final_time: f64,
    final_acc: f64,
    final_probs: Vec<f64>,
    argmax_pattern: usize,
}

#[derive(Serialize)]
struct SampleSummary {
    batch: usize,
    lr: f64,
    steps: usize,
    runs: Vec<SampleRun>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    scenario_path: &Path,
    batch: usize,
    lr: f64,
    steps: usize,
    seeds: u64,
    out: &Path,
    baseline: BaselineArg,
) -> Result<()> {
    let scenario = read_scenario(scenario_path)?;
    ensure_dir(out)?;
    let mut runs = Vec::new();
    for seed in 0..seeds {
        let config = SamplerConfig {
            batch_size: batch,
            learning_rate: lr,
            steps,
            beta: scenario.beta,
            baseline: baseline.into(),
            seed,
        };
        let trajectory = train_sampler(&scenario, &config)?;
        let csv_path = out.join(format!("sample_{seed:03}.csv"));
        emit_csv(&trajectory.samples, trajectory.k, &csv_path)?;
        let last = trajectory.last();
        let argmax = last
            .probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        runs.push(SampleRun {
            seed,
            csv: csv_path.display().to_string(),
            final_time: last.t,
            final_acc: last.acc,
            final_probs: last.probs.clone(),
            argmax_pattern: argmax,
        });
    }
    print_json(&SampleSummary {
        batch,
        lr,
        steps,
        runs,
    })
}

fn parse_distribution(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| RunnerError::Parse(format!("bad probability {s:?}: {e}")))
        })
        .collect()
}

fn cmd_verify(trajectory_path: &Path, scenario_path: &Path, epsilon: f64) -> Result<()> {
    let scenario = read_scenario(scenario_path)?;
    let (samples, k) = parse_csv(trajectory_path)?;
    if k != scenario.task.k() {
        return Err(RunnerError::Validation(format!(
            "trajectory has {k} patterns but the scenario has {}",
            scenario.task.k()
        )));
    }
    // The CSV stores samples only; rebuild the envelope from the scenario
    // it is being checked against. Convergence is not recorded either, so
    // it is conservatively assumed false, which skips end-state
    // extrapolations past the recorded horizon.
    let trajectory = Trajectory {
        samples,
        mode: scenario.mode,
        scenario_digest: scenario.digest(),
        k,
        converged: false,
    };
    let report = verify_trajectory(&scenario, &trajectory, epsilon)?;
    let doc = ReportDoc::from_report(&report);
    print_json(&doc)?;
    if !doc.all_pass {
        let failing: Vec<&str> = doc
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(RunnerError::Expectation(format!(
            "failing checks: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, out, svg } => cmd_simulate(&scenario, &out, svg),
        Command::Regime { scenario, epsilon } => {
            let s = read_scenario(&scenario)?;
            let bounds = compute_bounds(&s, epsilon)?;
            print_bounds_readably(&bounds)
        }
        Command::Bounds { scenario, epsilon } => {
            let s = read_scenario(&scenario)?;
            print_json(&compute_bounds(&s, epsilon)?)
        }
        Command::Case { name, out } => {
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&name));
            let outcome = run_case_study(&name, &out_dir)?;
            let doc = ReportDoc::from_report(&outcome.report);
            print_json(&doc)?;
            if !doc.all_pass {
                let failing: Vec<&str> = doc
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name.as_str())
                    .collect();
                return Err(RunnerError::Expectation(format!(
                    "failing checks: {}",
                    failing.join(", ")
                )));
            }
            Ok(())
        }
        Command::Sample {
            scenario,
            batch,
            lr,
            steps,
            seeds,
            out,
            baseline,
        } => cmd_sample(&scenario, batch, lr, steps, seeds, &out, baseline),
        Command::Pipeline {
            scenario,
            p_sft,
            epsilon,
        } => {
            let s = read_scenario(&scenario)?;
            let target = parse_distribution(&p_sft)?;
            print_json(&run_pipeline(&s, &target, epsilon)?)
        }
        Command::Verify {
            trajectory,
            scenario,
            epsilon,
        } => cmd_verify(&trajectory, &scenario, epsilon),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
