use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use tendon_hand::Execution;
use tendon_hand_harness::experiments::{run_experiment, Experiment};
use tendon_hand_harness::replay::replay;
use tendon_hand_harness::session::serve;
use tendon_hand_harness::Scenario;

#[derive(Parser)]
#[command(name = "tendon-hand", version, about = "Tendon hand simulator, experiments and live sessions")]
struct Cli {
    /// Run without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (A1, workspace, B1, C, D1, D2, D3).
    Run {
        experiment: String,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Start a live session.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Re-simulate a telemetry table and compare it byte for byte.
    Replay { telemetry: PathBuf },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Run {
            experiment,
            scenario,
            out,
            seed,
        } => {
            let exp: Experiment = experiment.parse()?;
            let mut s = Scenario::load(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            for p in run_experiment(exp, &s, &out, exec)? {
                println!("{}", p.display());
            }
        }
        Command::Serve { port, scenario, host } => {
            let s = Scenario::load(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            let session = serve(&format!("{host}:{port}"), &s, exec)?;
            eprintln!("listening on {}", session.local_addr());
            session.wait();
        }
        Command::Replay { telemetry } => {
            let report = replay(&telemetry, exec)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(d) = &report.divergence {
                bail!("divergence at row {}", d.row);
            }
        }
    }
    Ok(())
}
