use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use singeig::commands::{self, Command};
use singeig::RawConfig;

#[derive(Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    Eig,
    Verify,
    Sweep,
}

/// Dirichlet solves, principal eigenvalues and property checks for singular
/// fully nonlinear elliptic operators.
#[derive(Parser)]
#[command(name = "singeig", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// Flat `section.key = value` configuration file.
    config: PathBuf,
    /// Override a configuration key, e.g. `--set grid.n=128`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, replacing `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.command {
        Sub::Solve => Command::Solve,
        Sub::Eig => Command::Eig,
        Sub::Verify => Command::Verify,
        Sub::Sweep => Command::Sweep,
    };
    let raw = RawConfig::load(&args.config).and_then(|mut raw| {
        for s in &args.set {
            raw.set(s)?;
        }
        Ok(raw)
    });
    let result = raw.map_err(Into::into).and_then(|raw| commands::run(cmd, &raw, args.out.as_deref()));
    match result {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("singeig {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
