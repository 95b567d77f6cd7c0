//! Command-line driver: staged runs, evaluation, pilot tables, and the full
//! pipeline, all off one TOML config.

use amas::pipeline::{
    build_runner, evaluate, load_task_data, pilot, render_report, run_full, stage_build_data,
    stage_evaluate, stage_harvest, stage_optimize, stage_train_designer, BackendChoice, EvalMode,
    EvalOptions, PipelineError, RunConfig, SCORER_CALL_COST,
};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "amas", version, about = "Adaptive multi-agent graph orchestration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Path to the run configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Operate on this seed instead of the first configured one.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the configured number of candidates.
    #[arg(long)]
    k: Option<usize>,

    /// Override the configured backend ("mock" or "http").
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the edge logits and persist checkpoints.
    Optimize(CommonArgs),
    /// Score checkpoints on the dev split and keep the top K candidates.
    Harvest(CommonArgs),
    /// Build the designer training/dev records from the candidates.
    BuildData(CommonArgs),
    /// Train the designer scorer on the persisted records.
    TrainDesigner(CommonArgs),
    /// Evaluate on the test split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// One of fixed(i), amas, oracle, random; all modes when omitted.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Print a candidate-by-sample pilot score table.
    Pilot {
        /// Print the bundled pilot fixture instead of running candidates.
        #[arg(long)]
        fixture: bool,

        #[arg(long)]
        config: Option<PathBuf>,

        #[arg(long)]
        seed: Option<u64>,

        #[arg(long)]
        k: Option<usize>,

        #[arg(long)]
        backend: Option<String>,
    },
    /// Run every stage for every seed and write the aggregate report.
    RunFull(CommonArgs),
}

fn apply_overrides(
    config: &mut RunConfig,
    k: Option<usize>,
    backend: Option<&str>,
) -> anyhow::Result<()> {
    if let Some(k) = k {
        config.k = k;
    }
    match backend {
        None => {}
        Some("mock") => config.backend = BackendChoice::Mock,
        Some("http") => {
            if !matches!(config.backend, BackendChoice::Http { .. }) {
                anyhow::bail!(
                    "--backend http needs [backend] settings with kind = \"http\" in the config"
                );
            }
        }
        Some(other) => anyhow::bail!("unknown backend '{other}' (use mock or http)"),
    }
    Ok(())
}

fn load(common: &CommonArgs) -> anyhow::Result<(RunConfig, u64)> {
    let mut config = RunConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    apply_overrides(&mut config, common.k, common.backend.as_deref())?;
    let seed = common.seed.unwrap_or(config.seeds[0]);
    Ok((config, seed))
}

fn run(command: Command) -> anyhow::Result<Option<PipelineError>> {
    match command {
        Command::Optimize(common) => {
            let (config, seed) = load(&common)?;
            let data = load_task_data(&config)?;
            let runner = build_runner(&config, &data)?;
            match stage_optimize(&config, &data, runner.as_ref(), seed) {
                Ok(checkpoints) => {
                    println!(
                        "optimize: {} checkpoints under {}",
                        checkpoints.len(),
                        config.seed_dir(seed).join("checkpoints").display()
                    );
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
        Command::Harvest(common) => {
            let (config, seed) = load(&common)?;
            let data = load_task_data(&config)?;
            let runner = build_runner(&config, &data)?;
            match stage_harvest(&config, &data, runner.as_ref(), seed) {
                Ok(candidates) => {
                    println!(
                        "harvest: kept {} candidates, dev scores {:?}",
                        candidates.len(),
                        candidates.dev_scores()
                    );
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
        Command::BuildData(common) => {
            let (config, seed) = load(&common)?;
            let data = load_task_data(&config)?;
            let runner = build_runner(&config, &data)?;
            match stage_build_data(&config, &data, runner.as_ref(), seed) {
                Ok((train, dev)) => {
                    println!(
                        "build-data: {} train records, {} dev records",
                        train.len(),
                        dev.len()
                    );
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
        Command::TrainDesigner(common) => {
            let (config, seed) = load(&common)?;
            match stage_train_designer(&config, seed) {
                Ok(report) => {
                    println!(
                        "train-designer: best dev loss {:.6} at step {} ({} steps run)",
                        report.best_dev_loss, report.best_step, report.steps_run
                    );
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
        Command::Evaluate { common, mode } => {
            let (config, seed) = load(&common)?;
            let data = load_task_data(&config)?;
            let runner = build_runner(&config, &data)?;
            let result = match mode {
                None => stage_evaluate(&config, &data, runner.as_ref(), seed),
                Some(mode_text) => EvalMode::parse(&mode_text).and_then(|mode| {
                    let seed_dir = config.seed_dir(seed);
                    let candidates =
                        amas::optim::CandidateSet::load(&seed_dir.join("candidates.json"))
                            .map_err(|e| PipelineError::Evaluate(e.to_string()))?;
                    let scorer = amas::designer::FeatureScorer::load(
                        &seed_dir.join("designer").join("scorer.json"),
                    )
                    .ok();
                    let opts = EvalOptions {
                        seed,
                        scorer_call_cost: SCORER_CALL_COST,
                        select_highest: config.designer.select_highest,
                    };
                    evaluate(
                        mode,
                        &candidates,
                        scorer.as_ref().map(|s| s as &dyn amas::designer::Scorer),
                        &data.spec,
                        &data.test,
                        runner.as_ref(),
                        &opts,
                    )
                    .map(|m| vec![m])
                }),
            };
            match result {
                Ok(metrics) => {
                    for m in metrics {
                        println!(
                            "{:<12} mean {:.4}   mean latency {:.4}s over {} samples",
                            m.mode,
                            m.mean,
                            m.mean_latency,
                            m.samples.len()
                        );
                    }
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
        Command::Pilot {
            fixture,
            config,
            seed,
            k,
            backend,
        } => {
            if fixture {
                print!("{}", pilot::fixture_report());
                return Ok(None);
            }
            let Some(config_path) = config else {
                anyhow::bail!("pilot needs --fixture or --config");
            };
            let common = CommonArgs {
                config: config_path,
                seed,
                k,
                backend,
            };
            let (config, seed) = load(&common)?;
            let data = load_task_data(&config)?;
            let runner = build_runner(&config, &data)?;
            let seed_dir = config.seed_dir(seed);
            let candidates = amas::optim::CandidateSet::load(&seed_dir.join("candidates.json"))
                .map_err(|e| PipelineError::Evaluate(e.to_string()))?;
            match pilot::pilot_report(&candidates, &data.test, runner.as_ref(), seed) {
                Ok((_, table)) => {
                    print!("{table}");
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
        Command::RunFull(common) => {
            let (config, _) = load(&common)?;
            match run_full(&config) {
                Ok(report) => {
                    print!("{}", render_report(&report));
                    println!(
                        "report written to {}",
                        config.output_dir.join("report.json").display()
                    );
                    Ok(None)
                }
                Err(e) => Ok(Some(e)),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(stage_error)) => {
            eprintln!("error: {stage_error}");
            ExitCode::from(stage_error.exit_code() as u8)
        }
        Err(other) => {
            eprintln!("error: {other:#}");
            ExitCode::from(2)
        }
    }
}
