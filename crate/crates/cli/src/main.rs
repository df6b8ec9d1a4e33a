use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use secrecy_region_cli::commands::{self, Expect, Failure, Output};

/// Secret-key / secret-message rate regions and protocol simulation.
#[derive(Parser)]
#[command(name = "secrecy-region", version)]
struct Cli {
    /// Worker threads for the engines.
    #[arg(long, global = true, env = "SECRECY_REGION_THREADS")]
    threads: Option<usize>,
    /// What goes to standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the CSV table here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Rate region of a scenario: inner bound, or the tight region when
    /// parallel degraded components are declared.
    Region {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Weight directions swept by the search.
        #[arg(long)]
        directions: Option<usize>,
    },
    /// Boundary of the scalar Gaussian region.
    Gaussian {
        /// SNR of Bob's view of Alice's source.
        #[arg(long)]
        snr_src: f64,
        /// SNR of Bob's channel output.
        #[arg(long)]
        snr_bob: f64,
        /// SNR of Eve's channel output.
        #[arg(long)]
        snr_eve: f64,
        /// Number of boundary points.
        #[arg(long, default_value_t = 33)]
        samples: usize,
        /// Check dominance against the same scenario at this Eve SNR.
        #[arg(long)]
        compare_snr_eve: Option<f64>,
    },
    /// Degradation verdicts for the channel and source legs.
    Degrade {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Monte Carlo run of the separation protocol.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Dump Eve's (Z^n, SE^n) per trial as flat binary records.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Containment of two region or boundary CSVs.
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Slack allowed in each coordinate.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Exit with code 3 unless this relation holds.
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
}

fn dispatch(command: &Command) -> Result<Output, Failure> {
    match command {
        Command::Region { scenario, seed, directions } => commands::region(scenario, *seed, *directions),
        Command::Gaussian { snr_src, snr_bob, snr_eve, samples, compare_snr_eve } => {
            commands::gaussian(*snr_src, *snr_bob, *snr_eve, *samples, *compare_snr_eve)
        }
        Command::Degrade { scenario } => commands::degrade(scenario),
        Command::Simulate { scenario, seed, transcripts } => commands::simulate(scenario, *seed, transcripts.as_ref()),
        Command::Compare { first, second, tolerance, expect } => commands::compare(first, second, *tolerance, *expect),
    }
}

fn emit(cli: &Cli, output: &Output) -> Result<(), Failure> {
    if let Some(path) = &cli.out {
        std::fs::write(path, &output.csv)
            .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))?;
    }
    let body = match cli.format {
        Format::Csv => &output.csv,
        Format::Text => &output.text,
    };
    std::io::stdout()
        .write_all(body.as_bytes())
        .map_err(|e| Failure::Internal(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match dispatch(&cli.command) {
        Ok(output) => emit(cli, &output),
        Err(Failure::Threshold { output, violations }) => {
            emit(cli, &output)?;
            Err(Failure::Threshold { output, violations })
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(m) => eprintln!("error: {m}"),
                Failure::Internal(m) => eprintln!("internal error: {m}"),
                Failure::Threshold { violations, .. } => {
                    for v in violations {
                        eprintln!("threshold missed: {v}");
                    }
                }
            }
            ExitCode::from(f.code())
        }
    }
}
