use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use kdesign::estimator::write_ensemble;
use kdesign::experiments::{self, ExperimentConfig, ResultTable};
use kdesign::metrics::{delta_k, EnsembleSource};
use kdesign::sampler::Dataset;
use kdesign::Error;

#[derive(Parser)]
#[command(name = "kdesign", version, about = "Projected-ensemble k-design experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    skip_crbm: bool,
    /// Estimator: freq, maxlk or crbm
    #[arg(long, global = true)]
    method: Option<EnsembleSource>,
    /// Dataset size
    #[arg(long, global = true)]
    size: Option<usize>,
    /// Subsystem size
    #[arg(long, global = true)]
    na: Option<usize>,
    /// Chain length (largest chain for `scaling`)
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Record the wall-clock time in the table metadata
    #[arg(long, global = true)]
    timestamp: bool,
}

#[derive(Subcommand, Clone, PartialEq, Eq)]
enum Command {
    /// Conditional marginal and rescaled moments versus time
    Dynamics,
    /// Mean relative error of estimated δ_k versus dataset size
    Mre,
    /// Exact and estimated δ_k versus time
    Trdist,
    /// Steady-state δ_k versus bath size with power-law fits
    Scaling,
    /// Simulate a measurement dataset
    Sample,
    /// Reconstruct an ensemble from a dataset file
    Estimate {
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> kdesign::Result<ExperimentConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.skip_crbm |= c.skip_crbm;
    let scaling = matches!(cli.command, Command::Scaling);
    if let Some(n) = c.n {
        if scaling {
            cfg.scaling_n_max = n;
        } else {
            cfg.n_sites = n;
        }
    }
    if let Some(na) = c.na {
        if scaling {
            cfg.scaling_n_a = vec![na];
        } else {
            cfg.n_a = na;
        }
    }
    match (&cli.command, c.method) {
        (Command::Mre | Command::Trdist, Some(EnsembleSource::Exact)) => {
            return Err(Error::Config("--method must name an estimator".into()));
        }
        (Command::Mre | Command::Trdist, Some(m)) => cfg.methods = vec![m],
        _ => {}
    }
    if let Some(size) = c.size {
        match &cli.command {
            Command::Mre => cfg.ladder = vec![size],
            _ => {
                cfg.size_freq = size;
                cfg.size_maxlk = size;
                cfg.size_crbm = size;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> kdesign::Result<()>) -> kdesign::Result<()> {
    match out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn emit_table(cli: &Cli, mut table: ResultTable) -> kdesign::Result<()> {
    if cli.common.timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        table.meta("timestamp", secs);
    }
    emit(cli.common.out.as_deref(), |w| table.write_csv(w))
}

fn run(cli: &Cli) -> kdesign::Result<()> {
    let cfg = load_config(cli)?;
    let method = cli.common.method.unwrap_or(EnsembleSource::MaxLk);
    match &cli.command {
        Command::Dynamics => emit_table(cli, experiments::run_dynamics(&cfg)?),
        Command::Mre => emit_table(cli, experiments::run_mre(&cfg)?),
        Command::Trdist => emit_table(cli, experiments::run_trdist(&cfg)?),
        Command::Scaling => emit_table(cli, experiments::run_scaling(&cfg)?),
        Command::Sample => {
            let data = experiments::sample_dataset(&cfg, method)?;
            emit(cli.common.out.as_deref(), |w| data.write_to(w))
        }
        Command::Estimate { input } => {
            let data = Dataset::read_from(BufReader::new(fs::File::open(input)?))?;
            let ensemble = experiments::estimate_dataset(&data, method, &cfg)?;
            for &k in &cfg.k_values {
                log::info!("delta_{k} = {}", delta_k(&ensemble, k, method)?.value);
            }
            emit(cli.common.out.as_deref(), |w| write_ensemble(&ensemble, w))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
