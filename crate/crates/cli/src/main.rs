mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chanmix::semigroupforge::ScanFamily;
use commands::{ConstructArgs, VerifyWhat};
use error::CliError;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "CHANMIX_OUT_DIR";

#[derive(Parser)]
#[command(name = "chanmix", version, about = "Mixtures of generalized Pauli channels: rates, semigroups, divisibility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the mixture described by a config file; writes trajectory CSV and classification JSON.
    Analyze {
        config: PathBuf,
        /// Directory for relative output paths (default: $CHANMIX_OUT_DIR or the working directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Emit a config for a semigroup-yielding mixture, with the input invertibility forecast.
    #[command(allow_negative_numbers = true)]
    Construct {
        /// Prime dimension.
        d: usize,
        /// Target rate: every mixture eigenvalue is exp(-c t).
        c: f64,
        /// Weights x_1..x_{d+1} for the all-channel construction.
        #[arg(required_unless_present = "same", conflicts_with = "same")]
        weights: Vec<f64>,
        /// Same-channel construction with mixing parameter a in (0, 1).
        #[arg(long, requires = "q")]
        same: Option<f64>,
        /// Arbitrary partner function q(t) for --same.
        #[arg(long, requires = "same")]
        q: Option<String>,
        /// Basis label for --same.
        #[arg(long, default_value_t = 1)]
        basis: usize,
        /// Write the config here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a check; exits 0 iff it passes.
    Verify {
        what: What,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// JSON report path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify mixtures over a grid of weights on the simplex.
    Scan {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, value_enum, default_value_t = FamilyArg::Semigroup)]
        family: FamilyArg,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// CSV path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary JSON path.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write the MUB vectors and their unitaries as CSV.
    DumpMub {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Mub,
    Theorem1,
    Theorem2,
    Cptp,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Semigroup,
    Forced,
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { config, out_dir } => {
            commands::analyze(&config, &out_dir.unwrap_or_else(default_out_dir)).map(|_| ())
        }
        Command::Construct {
            d,
            c,
            weights,
            same,
            q,
            basis,
            out,
        } => {
            let args = match (same, q) {
                (Some(a), Some(q)) => ConstructArgs::SameChannel { a, q, basis },
                _ => ConstructArgs::AllChannels { weights },
            };
            commands::construct(d, c, args, out.as_deref()).map(|_| ())
        }
        Command::Verify {
            what,
            d,
            trials,
            seed,
            out,
        } => {
            let (what, d_default, trials_default) = match what {
                What::Mub => (VerifyWhat::Mub, 2, 0),
                What::Theorem1 => (VerifyWhat::Theorem1, 2, 1000),
                What::Theorem2 => (VerifyWhat::Theorem2, 3, 500),
                What::Cptp => (VerifyWhat::Cptp, 2, 200),
            };
            let pass = commands::verify(
                what,
                d.unwrap_or(d_default),
                trials.unwrap_or(trials_default),
                seed,
                out.as_deref(),
            )?;
            if pass {
                Ok(())
            } else {
                Err(CliError::VerifyFailed)
            }
        }
        Command::Scan {
            d,
            step,
            family,
            rate,
            out,
            summary,
        } => {
            let family = match family {
                FamilyArg::Semigroup => ScanFamily::Semigroup,
                FamilyArg::Forced => ScanFamily::Forced,
            };
            commands::scan(d, step, family, rate, out.as_deref(), summary.as_deref())
        }
        Command::DumpMub { d, out_dir } => commands::dump_mub(d, out_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chanmix: {e}");
            e.exit_code()
        }
    }
}
