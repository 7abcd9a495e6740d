use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use divwitness::divisibility::{Route, WitnessMode};
use divwitness::dynamics::FamilyDescriptor;
use divwitness_cli::{
    cmd_divide, cmd_pguess, cmd_simulate, cmd_validate, cmd_witness, load_descriptor, resolve_seed, CliError,
    CliResult, DivideOptions, Outcome, WitnessCmdOptions,
};

#[derive(Parser)]
#[command(name = "divwitness", version, about = "Divisibility certificates and information-backflow witnesses for quantum dynamical mappings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Auto,
    Exact,
    Sdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Entangled,
    Separable,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a channel or mapping file is CPTP
    Validate { input: PathBuf },
    /// Certify each step of a mapping as divisible or not
    Divide {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        route: RouteArg,
        #[arg(long, default_value_t = divwitness::sdp::DEFAULT_TOL)]
        tol: f64,
        /// Exit 1 on a non-divisible verdict and 3 on an undecided one
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Witness search budget per non-divisible step (0 disables)
        #[arg(long, default_value_t = 2000)]
        witness_budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for an ensemble whose guessing probability grows at a step
    Witness {
        input: PathBuf,
        /// Step k compares N^(k-1) with N^k; all steps when omitted
        #[arg(long)]
        step: Option<usize>,
        #[arg(long, value_enum, default_value = "entangled")]
        mode: ModeArg,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        /// Number of equiprobable states (2 to 4)
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace_csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Guessing probability of an ensemble, optionally along a mapping
    Pguess {
        ensemble: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Ensemble lives on ancilla ⊗ system and the mapping acts as id ⊗ N
        #[arg(long)]
        extended: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a mapping from a family descriptor file or inline flags
    Simulate {
        descriptor: Option<PathBuf>,
        #[arg(long, conflicts_with = "descriptor")]
        family: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long)]
        memory: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<(Outcome, Option<PathBuf>)> {
    match cli.command {
        Command::Validate { input } => Ok((cmd_validate(&input)?, None)),
        Command::Divide { input, route, tol, strict, seed, witness_budget, out } => {
            let route = match route {
                RouteArg::Auto => Route::Auto,
                RouteArg::Exact => Route::Exact,
                RouteArg::Sdp => Route::Sdp,
            };
            let opts = DivideOptions { route, tol, strict, seed: resolve_seed(seed)?, witness_budget };
            Ok((cmd_divide(&input, &opts)?, out))
        }
        Command::Witness { input, step, mode, budget, states, seed, trace_csv, out } => {
            let mode = match mode {
                ModeArg::Entangled => WitnessMode::Entangled,
                ModeArg::Separable => WitnessMode::Separable,
            };
            let opts = WitnessCmdOptions { step, mode, budget, ensemble_size: states, seed: resolve_seed(seed)? };
            Ok((cmd_witness(&input, &opts, trace_csv.as_deref())?, out))
        }
        Command::Pguess { ensemble, mapping, extended, format, out } => {
            Ok((cmd_pguess(&ensemble, mapping.as_deref(), extended, matches!(format, Format::Csv))?, out))
        }
        Command::Simulate { descriptor, family, params, memory, seed, out } => {
            let mut desc = match (descriptor, family) {
                (Some(path), _) => load_descriptor(&path)?,
                (None, Some(family)) => FamilyDescriptor { family, params, seed: None, memory },
                (None, None) => return Err(CliError::Input("simulate needs a descriptor file or --family".into())),
            };
            if seed.is_some() {
                desc.seed = seed;
            }
            let fallback = resolve_seed(None)?;
            Ok((cmd_simulate(&desc, fallback)?, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((outcome, out)) => {
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &outcome.output) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(divwitness_cli::EXIT_INPUT);
                    }
                }
                None => print!("{}", outcome.output),
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
