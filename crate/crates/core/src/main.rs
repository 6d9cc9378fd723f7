use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_gan::contamination::AttackKind;
use robust_gan::estimator::MinimaxConfig;
use robust_gan::generator::Task;
use robust_gan::gradcheck::check_gradients;
use robust_gan::harness::{self, EstimatorSpec, ExperimentConfig, FamilySpec, PlotKind, SweepOptions};
use robust_gan::lemma_lab::verify_lemmas;
use robust_gan::{Error, Result};

/// Robust mean, second-moment and regression estimation with GAN-style
/// adversarial projections.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed; overrides the config's seed for `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for cell-level parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory (or file, for `verify-lemmas` and `check-gradients`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip cells already complete in the output directory.
    #[arg(long, global = true)]
    resume: bool,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config.
    Sweep { config: PathBuf },
    /// Per-cell statistics of a records file.
    Summarize { records: PathBuf },
    /// SVG charts of a summary file.
    Plot {
        summary: PathBuf,
        /// eps, R, n or all.
        #[arg(long, default_value = "all")]
        kind: String,
    },
    /// Numerical checks of the mean-cross lemma and the theorem conditions.
    VerifyLemmas,
    /// Finite-difference checks of every analytic gradient.
    CheckGradients {
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Short breakdown demonstration: robust vs empirical mean as the
    /// outliers move away.
    Demo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Numerical(_) => 3,
                _ => 1,
            })
        }
    }
}

/// Returns whether every check passed.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep { config } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            sweep_and_report(&cfg, &out, cli)?;
            Ok(true)
        }
        Command::Summarize { records } => {
            let recs = harness::read_records(records)?;
            if recs.is_empty() {
                return Err(Error::Config(format!("{} holds no records", records.display())));
            }
            let rows = harness::summarize(&recs)?;
            let path = match &cli.out {
                Some(p) if p.extension().is_some() => p.clone(),
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    dir.join(harness::SUMMARY_CSV)
                }
                None => records.with_file_name(harness::SUMMARY_CSV),
            };
            harness::write_summary(&path, &rows)?;
            if !cli.quiet {
                print!("{}", harness::format_table(&rows));
            }
            log::info!("wrote {}", path.display());
            Ok(true)
        }
        Command::Plot { summary, kind } => {
            let rows = harness::read_summary(summary)?;
            let dir = cli
                .out
                .clone()
                .unwrap_or_else(|| summary.parent().unwrap_or(Path::new(".")).join("plots"));
            let kinds = if kind == "all" {
                vec![PlotKind::ErrorVsEps, PlotKind::ErrorVsR, PlotKind::ErrorVsN]
            } else {
                vec![PlotKind::parse(kind)?]
            };
            let single = kinds.len() == 1;
            for k in kinds {
                match harness::emit_plots(&rows, k, &dir) {
                    Ok(paths) => paths.iter().for_each(|p| log::info!("wrote {}", p.display())),
                    // With `all`, skip axes the summary does not cover.
                    Err(Error::Config(m)) if !single => log::warn!("{}: {m}", k.name()),
                    Err(e) => return Err(e),
                }
            }
            Ok(true)
        }
        Command::VerifyLemmas => {
            let report = verify_lemmas(cli.seed.unwrap_or(0))?;
            emit_json(cli, &report)?;
            Ok(report.passed)
        }
        Command::CheckGradients { instances } => {
            let report = check_gradients(*instances, cli.seed.unwrap_or(0))?;
            if !cli.quiet {
                for r in &report.rows {
                    println!(
                        "{:<13} layers={} {:<13} {:<18} max_rel_err={:.2e} {}",
                        r.target,
                        r.layers,
                        r.family,
                        r.readout,
                        r.max_rel_err,
                        if r.passed { "ok" } else { "FAIL" }
                    );
                }
            }
            if let Some(p) = &cli.out {
                std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
            }
            Ok(report.passed())
        }
        Command::Demo => {
            let cfg = demo_config(cli.seed.unwrap_or(0));
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs").join("demo"));
            sweep_and_report(&cfg, &out, cli)?;
            Ok(true)
        }
    }
}

fn sweep_and_report(cfg: &ExperimentConfig, out: &Path, cli: &Cli) -> Result<()> {
    let opts = SweepOptions {
        out: out.to_path_buf(),
        jobs: cli.jobs,
        resume: cli.resume,
        jsonl: cfg.jsonl,
    };
    let records = harness::run_sweep(cfg, &opts)?;
    let rows = harness::summarize(&records)?;
    harness::write_summary(&out.join(harness::SUMMARY_CSV), &rows)?;
    // Plot the axes the sweep varies; a single cell still gets one chart.
    let mut kinds: Vec<PlotKind> = [PlotKind::ErrorVsEps, PlotKind::ErrorVsR, PlotKind::ErrorVsN]
        .into_iter()
        .filter(|k| k.distinct_x(&rows) > 1)
        .collect();
    if kinds.is_empty() {
        kinds.push(PlotKind::ErrorVsEps);
    }
    for k in kinds {
        let paths = harness::emit_plots(&rows, k, &out.join("plots"))?;
        log::info!("{} {} plot(s)", paths.len(), k.name());
    }
    if !cli.quiet {
        print!("{}", harness::format_table(&rows));
    }
    log::info!("{} records in {}", records.len(), out.display());
    Ok(())
}

/// Mean estimation, d = 5, n = 1000, 10% point-mass outliers at distance
/// R in {1, 10, 100}, three trials.
fn demo_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "demo".into(),
        task: Task::Mean,
        family: FamilySpec::Gaussian { sigma: 1.0, mean: 0.0 },
        attacks: [1.0, 10.0, 100.0]
            .into_iter()
            .map(|magnitude| AttackKind::PointMass { direction: None, magnitude })
            .collect(),
        eps: vec![0.1],
        n: vec![1000],
        d: vec![5],
        estimators: ["RobustMean-A1", "EmpiricalMean", "CoordinateMedian"]
            .into_iter()
            .map(|s| EstimatorSpec::parse(s).expect("known name"))
            .collect(),
        trials: 3,
        seed,
        out: None,
        minimax: MinimaxConfig::default(),
        trim_fraction: 0.2,
        jsonl: false,
    }
}

fn emit_json<T: serde::Serialize>(cli: &Cli, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match &cli.out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}
