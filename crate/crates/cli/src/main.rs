mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "bichroma", version, about = "Bands, Dirac fits, Wannier functions and Klein tunneling in a bichromatic optical lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bloch bands over the zone for each phase
    Bands(Common),
    /// Effective mass and speed of light against the phase
    FitSweep(Common),
    /// Wannier functions and their localization report
    Wannier(Common),
    /// Linear-potential matrix elements over a lattice-depth sweep
    MatrixElements(Common),
    /// Klein tunneling out of a tilted dipole trap, lattice and Dirac runs
    Klein(Common),
    /// Effective-operator check on coarse-grained envelopes
    SlaterCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (a subdirectory per command is created)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    v1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    v2: Option<String>,
    /// Phase or comma-separated phases; `pi` suffix allowed (`0.8pi`)
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Plane-wave cutoff
    #[arg(long)]
    cutoff: Option<String>,
    /// Time step
    #[arg(long)]
    dt: Option<String>,
    /// Spatial samples per lattice period
    #[arg(long)]
    grid_per_period: Option<String>,
    /// Further `--key value` overrides of command keys
    #[arg(allow_hyphen_values = true, num_args = 0.., trailing_var_arg = true)]
    rest: Vec<String>,
}

enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<bichroma::Error> for Failure {
    fn from(e: bichroma::Error) -> Self {
        match e {
            bichroma::Error::Io(io) => Failure::Io(io.to_string()),
            e if e.is_numeric() => Failure::Numeric(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Pulls `--name value` / `--name=value` out of the trailing overrides; the last one wins.
fn take_flag(rest: &mut Vec<String>, name: &str) -> Result<Option<String>, Failure> {
    let flag = format!("--{name}");
    let mut found = None;
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == flag {
            let value = rest
                .get(i + 1)
                .cloned()
                .ok_or_else(|| Failure::Config(format!("missing value for {flag}")))?;
            found = Some(value);
            rest.drain(i..i + 2);
        } else if let Some(v) = rest[i].strip_prefix(&format!("{flag}=")) {
            found = Some(v.to_string());
            rest.remove(i);
        } else {
            i += if rest[i].contains('=') { 1 } else { 2 };
        }
    }
    Ok(found)
}

fn resolve(name: &str, common: &mut Common) -> Result<RunConfig, Failure> {
    if let Some(v) = take_flag(&mut common.rest, "out")? {
        common.out = v.into();
    }
    if let Some(v) = take_flag(&mut common.rest, "config")? {
        common.config = Some(v.into());
    }
    let mut cfg = RunConfig::new(name);
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        cfg.load_str(&text)?;
    }
    let flags = [
        ("v1", &common.v1),
        ("v2", &common.v2),
        ("phi", &common.phi),
        ("cutoff", &common.cutoff),
        ("dt", &common.dt),
        ("grid_per_period", &common.grid_per_period),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.apply_overrides(&common.rest)?;
    Ok(cfg)
}

fn run(mut cli: Cli) -> Result<(), Failure> {
    let (name, common) = match &mut cli.command {
        Command::Bands(c) => ("bands", c),
        Command::FitSweep(c) => ("fit-sweep", c),
        Command::Wannier(c) => ("wannier", c),
        Command::MatrixElements(c) => ("matrix-elements", c),
        Command::Klein(c) => ("klein", c),
        Command::SlaterCheck(c) => ("slater-check", c),
    };
    let cfg = resolve(name, common)?;
    let out = common.out.join(name);
    std::fs::create_dir_all(&out)?;
    let report = match name {
        "bands" => commands::bands(&cfg, &out)?,
        "fit-sweep" => commands::fit_sweep(&cfg, &out)?,
        "wannier" => commands::wannier(&cfg, &out)?,
        "matrix-elements" => commands::matrix_elements(&cfg, &out)?,
        "klein" => commands::klein(&cfg, &out)?,
        _ => commands::slater_check(&cfg, &out)?,
    };
    commands::write_report(&cfg, &out, &report)?;
    for line in &report {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(4)
        }
    }
}
