use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dirdyk::experiment::{
    run_experiment, run_preset, ExperimentConfig, ExperimentError, GraphSpec, PRESETS,
};
use dirdyk::io::save_problem;
use dirdyk::{generate_problem, ProblemKind};

#[derive(Parser)]
#[command(version, about = "Asynchronous dual ascent over directed graphs")]
struct Cli {
    /// Check conservation and Val monotonicity after every event.
    #[arg(long, global = true)]
    debug_invariants: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a random problem and write it as JSON.
    Gen {
        /// consensus, F-S or F-NS
        #[arg(long)]
        kind: ProblemKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        m: usize,
        /// Ring size; the default is the six-node two-cycle graph.
        #[arg(long)]
        ring: Option<usize>,
    },
    /// Run a named preset over its reference seeds.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config } => {
            let exp = ExperimentConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let s = run_experiment(&exp, base, cli.debug_invariants)?;
            println!(
                "{}: gap {:e}, wdist {:e}, spread {:e}, liveness {}",
                s.trace_csv.display(),
                s.final_gap,
                s.final_wdist,
                s.final_spread,
                s.trace.liveness
            );
        }
        Command::Gen {
            kind,
            seed,
            out,
            m,
            ring,
        } => {
            let graph = match ring {
                Some(nodes) => GraphSpec::Ring { nodes },
                None => GraphSpec::TwoCycles,
            }
            .build()?;
            let problem = generate_problem(kind, m, graph, seed)?;
            save_problem(&problem, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Preset { name, out_dir } => {
            for s in run_preset(&name, &out_dir, cli.debug_invariants)? {
                println!(
                    "{}: gap {:e}, wdist {:e}, spread {:e}",
                    s.trace_csv.display(),
                    s.final_gap,
                    s.final_wdist,
                    s.final_spread
                );
            }
        }
    }
    Ok(())
}
