use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlasso::commands::{self, Axis, RunInputs};
use nlasso::config::Runtime;
use nlasso::{formats, CliError, ExperimentConfig};

/// Network Lasso experiments on stochastic block model data.
#[derive(Parser)]
#[command(name = "nlasso", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); the built-in two-cluster setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Derive graph, data and training seeds as s, s+1, s+2.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write graph.json, dataset.json and truth.json.
    Generate(#[command(flatten)] Common),
    /// Solve and write the report, weights and trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        runtime: Option<Runtime>,
        /// Graph file; requires --dataset.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Optional ground-truth sidecar for weight MSE.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Pooled linear regression ignoring the graph.
    Baseline(#[command(flatten)] Common),
    /// Vary one parameter and record the MSE per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, value_enum)]
        runtime: Option<Runtime>,
    },
}

fn resolve(common: &Common) -> nlasso::Result<(ExperimentConfig, PathBuf)> {
    let mut config = match &common.config {
        Some(path) => formats::read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed_override {
        config = config.with_seed(seed);
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    let out = config.output.dir.clone();
    Ok((config, out))
}

fn with_runtime(mut config: ExperimentConfig, runtime: Option<Runtime>) -> ExperimentConfig {
    if let Some(r) = runtime {
        config.solver.runtime = r;
    }
    config
}

fn written(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn execute(cli: Cli) -> nlasso::Result<()> {
    match cli.command {
        Command::Generate(common) => {
            let (config, out) = resolve(&common)?;
            commands::cmd_generate(&config, &out)?.iter().for_each(|p| written(p));
        }
        Command::Run {
            common,
            runtime,
            graph,
            dataset,
            truth,
        } => {
            let (config, out) = resolve(&common)?;
            let config = with_runtime(config, runtime);
            let inputs = RunInputs { graph, dataset, truth };
            let (output, table) = commands::cmd_run(&config, &inputs, &out)?;
            print!("{table}");
            if let Some(stats) = output.messages {
                println!(
                    "rounds {}  messages {}  bytes {}",
                    output.iterations, stats.messages, stats.bytes
                );
            }
            written(&out);
        }
        Command::Baseline(common) => {
            let (config, out) = resolve(&common)?;
            let (_, table) = commands::cmd_baseline(&config, &out)?;
            print!("{table}");
            written(&out);
        }
        Command::Sweep {
            common,
            axis,
            values,
            runtime,
        } => {
            let (config, out) = resolve(&common)?;
            let config = with_runtime(config, runtime);
            let values = commands::parse_values(&values)?;
            for row in commands::cmd_sweep(&config, axis, &values, &out)? {
                println!("{}={}  weight_mse={:.3e}", axis.name(), row.value, row.weight_mse);
            }
            written(&out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
