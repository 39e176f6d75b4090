use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use blockjacobi::coeffs::DEFAULT_HORIZON;
use blockjacobi::error::Error;
use blockjacobi::opcore::{Vector, DEFAULT_DEFINITENESS_EPS};
use blockjacobi::pipeline::{emit, fixture, parse_config, resolve_family, run, OutputFormat, Status, FIXTURES};
use blockjacobi::recurrence::{l2_tail_diagnostic, propagate, write_trajectory_csv};
use blockjacobi::turan::{extract_periodic_limits, lambda_scan_window};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

#[derive(Parser)]
#[command(name = "bjm", version, about = "Spectral diagnostics for block Jacobi matrices")]
struct Cli {
    /// Number of recurrence steps (overrides the configuration or fixture default).
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Seed for random initial conditions.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and traces; output goes to stdout when omitted.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis listed in a JSON configuration file.
    Analyze { config: PathBuf },
    /// Scan λ for strict definiteness of the limit form F(λ).
    Scan {
        /// Fixture name or path to a JSON family (or full configuration) file.
        #[arg(long)]
        family: String,
        /// Scan range as `a,b`.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_DEFINITENESS_EPS)]
        eps: f64,
        /// Residue class at which the limit-form window starts.
        #[arg(long, default_value_t = 0)]
        window: usize,
    },
    /// Propagate one generalized eigenvector.
    Trajectory {
        #[arg(long)]
        family: String,
        /// Spectral parameter as `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// Initial condition (u_0, u_1): comma-separated entries, each `re` or `re:im`.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
    },
    /// Built-in fixtures.
    Fixtures {
        #[command(subcommand)]
        action: FixtureAction,
    },
}

#[derive(Subcommand)]
enum FixtureAction {
    /// List fixture names with a one-line summary.
    List,
    /// Print the configuration of a fixture.
    Show { name: String },
}

/// Failure classes mapped to process exit codes.
enum Failure {
    Validation(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(msg) => Self::Io(msg),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Failure::Validation(format!("{what}: cannot parse `{s}`"))))
        .collect()
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64), Failure> {
    match parse_floats(text, what)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Failure::Validation(format!("{what}: expected two comma-separated numbers"))),
    }
}

fn parse_complex_entry(text: &str) -> Result<Complex64, Failure> {
    let bad = || Failure::Validation(format!("alpha: cannot parse entry `{text}`"));
    let mut parts = text.trim().splitn(2, ':');
    let re = parts.next().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
    let im = match parts.next() {
        Some(s) => s.parse::<f64>().map_err(|_| bad())?,
        None => 0.0,
    };
    Ok(Complex64::new(re, im))
}

fn default_horizon(family: &str) -> usize {
    fixture(family).map_or(DEFAULT_HORIZON, |c| c.horizon)
}

fn write_output(cli: &Cli, file_name: &str, text: &str) -> Result<(), Failure> {
    match &cli.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(file_name);
            fs::write(&path, text)?;
            println!("{}", path.display());
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Analyze { config } => {
            let text = fs::read(config).map_err(|e| Failure::Io(format!("{}: {e}", config.display())))?;
            let mut config = parse_config(&text)?;
            if let Some(h) = cli.horizon {
                config.horizon = h;
            }
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            config.validate()?;
            let report = run(&config)?;
            let dir = cli.out_dir.clone().or_else(|| config.out_dir.as_ref().map(PathBuf::from));
            match dir {
                Some(dir) => {
                    for path in emit(&report, &dir, cli.format.into())? {
                        println!("{}", path.display());
                    }
                }
                None => match cli.format {
                    Format::Json => {
                        let text = serde_json::to_string_pretty(&report).expect("report serializes");
                        println!("{text}");
                    }
                    Format::Csv => {
                        return Err(Failure::Validation("csv output needs --out-dir".into()));
                    }
                },
            }
            for outcome in &report.results {
                if outcome.status == Status::Failed {
                    eprintln!(
                        "warning: {} failed: {}",
                        outcome.analysis,
                        outcome.error.as_deref().unwrap_or("unknown error")
                    );
                }
            }
            Ok(())
        }
        Command::Scan { family, range, grid, eps, window } => {
            let spec = resolve_family(family)?;
            let range = parse_pair(range, "range")?;
            let fam = spec.build()?;
            let horizon = cli.horizon.unwrap_or_else(|| default_horizon(family));
            let lim = extract_periodic_limits(&fam, spec.period, horizon)?;
            lim.require_converged()?;
            let set = lambda_scan_window(&lim, *window, range, *grid, *eps)?;
            match cli.format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&set).expect("scan serializes") + "\n";
                    write_output(cli, "scan.json", &text)
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    set.write_csv(&mut buf)?;
                    write_output(cli, "scan.csv", &String::from_utf8_lossy(&buf))
                }
            }
        }
        Command::Trajectory { family, z, alpha } => {
            let spec = resolve_family(family)?;
            let fam = spec.build()?;
            let (re, im) = parse_pair(z, "z")?;
            let z = Complex64::new(re, im);
            let entries = alpha.split(',').map(parse_complex_entry).collect::<Result<Vec<_>, _>>()?;
            if entries.len() != 2 * fam.dim() {
                return Err(Failure::Validation(format!(
                    "alpha: expected {} entries (u_0, u_1), got {}",
                    2 * fam.dim(),
                    entries.len()
                )));
            }
            let alpha = Vector::from_vec(entries);
            let horizon = cli.horizon.unwrap_or_else(|| default_horizon(family).min(DEFAULT_HORIZON));
            let traj = propagate(&fam, z, &alpha, horizon)?;
            match cli.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_trajectory_csv(&fam, &traj, &mut buf)?;
                    write_output(cli, "trajectory.csv", &String::from_utf8_lossy(&buf))
                }
                Format::Json => {
                    let u: Vec<Vec<[f64; 2]>> =
                        traj.u.iter().map(|v| v.iter().map(|c| [c.re, c.im]).collect()).collect();
                    let value = json!({
                        "z": [z.re, z.im],
                        "horizon": traj.horizon(),
                        "overflow": traj.overflow,
                        "max_residual": traj.max_residual(),
                        "l2": l2_tail_diagnostic(&traj),
                        "u": u,
                    });
                    let text = serde_json::to_string_pretty(&value).expect("trajectory serializes") + "\n";
                    write_output(cli, "trajectory.json", &text)
                }
            }
        }
        Command::Fixtures { action: FixtureAction::List } => {
            for (name, summary) in FIXTURES {
                println!("{name}\t{summary}");
            }
            Ok(())
        }
        Command::Fixtures { action: FixtureAction::Show { name } } => {
            let config =
                fixture(name).ok_or_else(|| Failure::Validation(format!("unknown fixture `{name}`")))?;
            println!("{}", config.to_json());
            Ok(())
        }
    }
}
