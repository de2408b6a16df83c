//! `weakval` — run weak-measurement simulations from a TOML configuration.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse error (config, flags or
//! `WEAKVAL_SEED`), 3 validation error, 4 empty postselection (output is
//! still written), 5 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weakval::config::{self, CouplingName, RescaleName};
use weakval::{dispatch, CliError, Format, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "weakval", version, about, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one configuration.
    Run(Common),
    /// Execute the cartesian grid of the config's [sweep] table.
    Sweep(Common),
    /// Parse and validate only; the exit code reports the result.
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the file, which overrides WEAKVAL_SEED).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Number of shots.
    #[arg(long, value_name = "N")]
    shots: Option<u64>,
    /// Output file; without it the document goes to stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Experiment variant, e.g. WeakPostselect.
    #[arg(long, value_name = "NAME")]
    variant: Option<String>,
    /// Anomaly-pair weak value.
    #[arg(long)]
    z: Option<f64>,
    /// Initial system amplitudes as re0,im0,re1,im1.
    #[arg(long, value_delimiter = ',')]
    initial: Option<Vec<f64>>,
    /// Final (postselected) amplitudes as re0,im0,re1,im1.
    #[arg(long = "final", value_delimiter = ',')]
    final_state: Option<Vec<f64>>,
    #[arg(long)]
    epsilon1: Option<f64>,
    #[arg(long)]
    epsilon2: Option<f64>,
    /// First meter angle θ (instead of epsilon1).
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    delta_t: Option<f64>,
    #[arg(long, value_enum)]
    coupling_mode: Option<CouplingName>,
    #[arg(long, value_enum)]
    rescale: Option<RescaleName>,
    /// Comma-separated, strictly decreasing ε list for ConvergenceSweep.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

impl Common {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let amps = |flag: &str, v: &Option<Vec<f64>>| {
            v.as_deref()
                .map(|v| {
                    config::amplitudes_from_list(v).ok_or_else(|| CliError::Argument {
                        source_name: format!("--{flag}"),
                        message: format!(
                            "expected 4 comma-separated numbers re0,im0,re1,im1, got {}",
                            v.len()
                        ),
                    })
                })
                .transpose()
        };
        Ok(Overrides {
            variant: self.variant.clone(),
            z: self.z,
            initial: amps("initial", &self.initial)?,
            final_state: amps("final", &self.final_state)?,
            epsilon1: self.epsilon1,
            epsilon2: self.epsilon2,
            theta1: self.theta1,
            delta_t: self.delta_t,
            coupling_mode: self.coupling_mode,
            rescale: self.rescale,
            n_shots: self.shots,
            seed: self.seed,
            epsilons: self.epsilons.clone(),
            out: self.out.clone(),
            format: self.format,
        })
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?,
            None => String::new(),
        };
        let env = std::env::var(config::SEED_ENV).ok();
        weakval::load(&text, &self.overrides()?, config::env_seed(env.as_deref())?)
    }
}

fn write_output(path: Option<&str>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: Path::new(p).to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let (args, sweep) = match command {
        Command::Run(a) => (a, false),
        Command::Sweep(a) => (a, true),
        Command::Validate(a) => {
            let cfg = a.load()?;
            match &cfg.sweep {
                Some(_) => {
                    for p in cfg.sweep_points()? {
                        p.to_spec()?;
                    }
                }
                None => {
                    cfg.to_spec()?;
                }
            }
            println!("valid");
            return Ok(());
        }
    };
    let cfg = args.load()?;
    if !sweep && cfg.sweep.is_some() {
        eprintln!("note: [sweep] table ignored by `run`; use `sweep` to execute the grid");
    }
    let exec = if sweep {
        dispatch::execute_sweep(&cfg)?
    } else {
        dispatch::execute(&cfg)?
    };
    for w in &exec.warnings {
        eprintln!("warning: {w}");
    }
    let path = cfg.output_path();
    write_output(path, &exec.render())?;
    // Keep stdout clean when it carries the document.
    if path.is_some() {
        print!("{}", exec.summary());
    } else {
        eprint!("{}", exec.summary());
    }
    exec.status()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
