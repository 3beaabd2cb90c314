use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rvfuzz::driver::{commands, parse_config, DriverError, RunConfig};

/// Model-guided differential fuzzer for an RV32IM behavioral simulator.
#[derive(Parser)]
#[command(name = "rvfuzz", version, about)]
struct Cli {
    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; deterministically re-derives every stage seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for checkpoints, logs, and reports.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Simulation worker threads for the fuzz loop.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Comma-separated bug toggles to enable ("" disables all).
    #[arg(long, global = true, value_name = "LIST")]
    toggles: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic assembly corpus and its manifest.
    SynthCorpus,
    /// Stage 1: next-token pretraining on the corpus.
    Pretrain,
    /// Stage 2: policy optimization against the disassembler reward.
    Refine,
    /// Stage 3: policy optimization against the coverage reward.
    Optimize,
    /// Run the model-guided differential fuzz loop.
    Fuzz,
    /// Run the random-program baseline at the same budget.
    Baseline,
    /// Re-run one assembly program under each enabled bug toggle.
    Replay { program_file: PathBuf },
    /// Re-derive CSV summaries and a comparison from saved reports.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here too; only real usage
            // errors go to stderr and fail.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), DriverError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                DriverError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.apply_master_seed(seed);
    }
    if let Some(workers) = cli.workers {
        cfg.fuzz.workers = workers;
    }
    if let Some(toggles) = cli.toggles {
        cfg.fuzz.toggles = toggles;
    }
    cfg.validate()?;

    let out = &cli.out;
    let written = match cli.command {
        Command::SynthCorpus => commands::synth_corpus(&cfg, out)?,
        Command::Pretrain => commands::pretrain(&cfg, out)?,
        Command::Refine => commands::refine(&cfg, out)?,
        Command::Optimize => commands::optimize(&cfg, out)?,
        Command::Fuzz => commands::fuzz(&cfg, out)?,
        Command::Baseline => commands::baseline(&cfg, out)?,
        Command::Replay { program_file } => {
            print!("{}", commands::replay(&cfg, &program_file)?);
            return Ok(());
        }
        Command::Report => commands::report(out)?,
    };
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
