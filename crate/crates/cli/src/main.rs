use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use radial_dichotomy_cli::{parse_config, run, CliError, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Evolve,
    Dichotomy,
    EigenScan,
    Nonlinear,
    LiouvilleDemo,
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Evolve => Command::Evolve,
            Cmd::Dichotomy => Command::Dichotomy,
            Cmd::EigenScan => Command::EigenScan,
            Cmd::Nonlinear => Command::Nonlinear,
            Cmd::LiouvilleDemo => Command::LiouvilleDemo,
            Cmd::Verify => Command::Verify,
        }
    }
}

/// Exponential dichotomies for elliptic problems on radial domains.
#[derive(Debug, Parser)]
#[command(name = "radial-dichotomy", version)]
struct Args {
    command: Cmd,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: &Args) -> Result<Vec<String>, CliError> {
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Threads(e.to_string()))?;
    }
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let mut cfg = parse_config(&text)?;
    let requested = Command::from(args.command);
    if cfg.command != requested {
        return Err(CliError::Validation(vec![format!(
            "command line asks for '{}' but the config is for '{}'",
            requested.name(),
            cfg.command.name()
        )]));
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    Ok(run(&cfg)?.summary)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
