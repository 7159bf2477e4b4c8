//! `bifree`: command-line front end for the bifree toolkit.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use bifree::Vec2;
use clap::{Parser, Subcommand};

use commands::{FullnessMethod, IdMode};
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "bifree", version, about = "Bi-free convolution, infinitely divisible laws, limit theorems and fullness tests")]
struct Cli {
    /// TOML file with run settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Smoothing height for Stieltjes inversion.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Density grid as "smin:smax:n,tmin:tmax:n".
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Probe preset (tensor, cone) or a JSON file of {"z":[re,im],"w":[re,im]} points.
    #[arg(long, global = true)]
    probes: Option<String>,
    /// Seed for probe jitter.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bi-free convolution of measure and triplet files.
    Convolve {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Extra deterministic shift "s,t".
        #[arg(long, value_parser = parse_vec2, default_value = "0,0", allow_hyphen_values = true)]
        shift: Vec2,
    },
    /// Transforms of an infinitely divisible law given by its triplet.
    Idlaw {
        triplet: PathBuf,
        #[arg(long, value_enum, default_value = "phi")]
        mode: IdMode,
    },
    /// Limit-theorem conditions and convergence runs for a triangular array.
    Limit { array: PathBuf },
    /// Stability check of a stable law.
    Stable {
        spec: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        /// Stability index used to predict the scale instead of the law's own.
        #[arg(long)]
        index: Option<f64>,
        /// Also locate the best-fitting scale by search.
        #[arg(long)]
        scan: bool,
    },
    /// Domain-of-attraction run towards a stable law in both worlds.
    Doa {
        measure: PathBuf,
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
        ns: Vec<u64>,
    },
    /// Fullness test with a line report.
    Fullness {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "g")]
        method: FullnessMethod,
    },
}

fn parse_vec2(s: &str) -> Result<Vec2, String> {
    let (a, b) = s.split_once(',').ok_or("expected \"s,t\"")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(Vec2::new(p(a)?, p(b)?))
}

fn settings(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = &cli.grid {
        cfg.grid = v.clone();
    }
    if let Some(v) = &cli.probes {
        cfg.probes = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BIFREE_NUM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("BIFREE_NUM_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    init_threads()?;
    let cfg = settings(&cli)?;
    io::ensure_dir(&cfg.out)?;
    match &cli.command {
        Command::Convolve { inputs, shift } => commands::convolve(&cfg, inputs, *shift),
        Command::Idlaw { triplet, mode } => commands::idlaw(&cfg, triplet, *mode),
        Command::Limit { array } => commands::limit(&cfg, array),
        Command::Stable {
            spec,
            a,
            b,
            index,
            scan,
        } => commands::stable(&cfg, spec, *a, *b, *index, *scan),
        Command::Doa { measure, spec, ns } => commands::doa(&cfg, measure, spec, ns),
        Command::Fullness { input, method } => commands::fullness(&cfg, input, *method),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
