use annr_cli::compare::{compare, render_table};
use annr_cli::config::ExperimentConfig;
use annr_cli::experiment::run_experiment;
use annr_cli::export::{export_curve, export_hist, export_scatter};
use annr_cli::oracle_check::oracle_check;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUN: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "annr",
    about = "Active nearest neighbor regression experiment runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config (all repetitions) and write results.
    Run {
        /// TOML experiment config; see the config module docs for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path overrides, e.g. --override engine.lambda=2.5
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run several configs sharing a test set and tabulate MAE per method.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        /// Directory for comparison.csv (default: comparison).
        #[arg(long, default_value = "comparison")]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Convert traces and checkpoints into plot-ready CSVs.
    Export {
        /// Trace CSV (scatter, hist) or experiment directory (curve).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = ["scatter", "curve", "hist"])]
        kind: String,
        /// Output CSV path (default: <kind>.csv next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Histogram bin count.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Walk soundness and recall against the exact Delaunay oracle.
    OracleCheck {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0.95)]
        min_recall: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run { config, overrides } => {
            let cfg = match ExperimentConfig::load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, &format!("{e:#}")),
            };
            match run_experiment(&cfg) {
                Ok(result) => {
                    let failed = result.runs.iter().filter(|r| r.error.is_some()).count();
                    println!(
                        "{} on {}: {} runs ({} failed), mae {} ± {}, results in {}",
                        result.method,
                        result.target_label,
                        cfg.repetitions,
                        failed,
                        fmt_opt(result.mae_mean),
                        fmt_opt(result.mae_std),
                        cfg.output_dir
                    );
                    if failed == cfg.repetitions {
                        return fail(EXIT_RUN, "every repetition failed");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUN, &format!("{e:#}")),
            }
        }
        Cmd::Compare {
            configs,
            out,
            overrides,
        } => {
            let mut parsed = Vec::new();
            for path in &configs {
                match ExperimentConfig::load(path, &overrides) {
                    Ok(c) => parsed.push(c),
                    Err(e) => return fail(EXIT_CONFIG, &format!("{e:#}")),
                }
            }
            match compare(&parsed, &out) {
                Ok(rows) => {
                    print!("{}", render_table(&rows));
                    println!("written: {}", out.join("comparison.csv").display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUN, &format!("{e:#}")),
            }
        }
        Cmd::Export {
            input,
            kind,
            out,
            bins,
        } => {
            let out = out.unwrap_or_else(|| {
                let dir = input.parent().unwrap_or(std::path::Path::new("."));
                dir.join(format!("{kind}.csv"))
            });
            let res = match kind.as_str() {
                "scatter" => export_scatter(&input, &out),
                "hist" => export_hist(&input, bins, &out),
                "curve" => export_curve(&input, &out),
                _ => unreachable!("clap restricts the values"),
            };
            match res {
                Ok(()) => {
                    println!("written: {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUN, &format!("{e:#}")),
            }
        }
        Cmd::OracleCheck {
            dim,
            n,
            seeds,
            steps,
            min_recall,
        } => match oracle_check(dim, n, seeds, steps, min_recall) {
            Ok(report) => {
                for (seed, r) in report.recalls.iter().enumerate() {
                    println!("seed {seed}: recall {r:.4}");
                }
                println!(
                    "mean recall {:.4} (required {:.2}), unsound candidates: {}",
                    report.mean_recall, report.min_recall, report.unsound
                );
                if report.passed() {
                    println!("oracle-check: PASS");
                    ExitCode::SUCCESS
                } else {
                    println!("oracle-check: FAIL");
                    ExitCode::from(EXIT_ACCEPTANCE)
                }
            }
            Err(e) => fail(EXIT_CONFIG, &format!("{e:#}")),
        },
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}
