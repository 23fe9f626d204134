mod commands;
mod config;
mod output;
mod svg;

use clap::{Parser, Subcommand};
use config::{
    DistArgs, FileConfig, FlowArgs, Global, SelftestArgs, Settings, SpectrumArgs, StableArgs, TransformArgs,
    WalkArgs,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or input data: exit code 2.
    Config(String),
    /// A numerical routine failed: exit code 3.
    Numeric(String),
    /// The run finished but some check failed: exit code 1.
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<levy_rg::Error> for CliError {
    fn from(e: levy_rg::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "levy-rg", version, about = "Renormalization-group map on 1-d densities")]
struct Cli {
    #[command(flatten)]
    global: Global,
    /// TOML file: global keys at top level, `[transform]`, `[flow]`, ... tables
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply T_a to a builtin or CSV density
    Transform {
        #[command(flatten)]
        args: TransformArgs,
        #[command(flatten)]
        dist: DistArgs,
    },
    /// Iterate the map in k-space and classify the limit
    Flow {
        #[command(flatten)]
        args: FlowArgs,
        #[command(flatten)]
        dist: DistArgs,
    },
    /// Stable density and cf for (alpha, A)
    Stable(StableArgs),
    /// Eigen-perturbations of a stable law
    Spectrum(SpectrumArgs),
    /// Random-walk fluid limit
    Walk(WalkArgs),
    /// Run the acceptance criteria
    Selftest(SelftestArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let settings = Settings::resolve(cli.global.merge(file.global.clone()))?;
    let mut failed = 0;
    let out = match cli.command {
        Command::Transform { args, dist } => {
            let keys = [TransformArgs::KEYS, DistArgs::KEYS];
            let args = args.merge(file.section("transform", &keys)?);
            let dist = dist.merge(file.section("transform", &keys)?);
            commands::transform(&settings, args, dist)?
        }
        Command::Flow { args, dist } => {
            let keys = [FlowArgs::KEYS, DistArgs::KEYS];
            let args = args.merge(file.section("flow", &keys)?);
            let dist = dist.merge(file.section("flow", &keys)?);
            commands::flow(&settings, args, dist)?
        }
        Command::Stable(args) => commands::stable_cmd(&settings, args.merge(file.section("stable", &[StableArgs::KEYS])?))?,
        Command::Spectrum(args) => {
            commands::spectrum(&settings, args.merge(file.section("spectrum", &[SpectrumArgs::KEYS])?))?
        }
        Command::Walk(args) => commands::walk(&settings, args.merge(file.section("walk", &[WalkArgs::KEYS])?))?,
        Command::Selftest(args) => {
            let (out, f) = commands::selftest(&settings, args.merge(file.section("selftest", &[SelftestArgs::KEYS])?))?;
            failed = f;
            out
        }
    };
    for p in out.finish()? {
        println!("wrote {}", p.display());
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} criteria failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levy-rg: {e}");
            ExitCode::from(e.code())
        }
    }
}
