use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use streamflow_api::ApiConfig;
use streamflow_core::runtime::RuntimeConfig;
use streamflow_core::topo::{
    compute_metrics, emit_report, format_table, generate_random, run_family, BenchConfig, BenchMode, Family,
    GeneratorKnobs, Injection, OperandDistribution, TopologySpec,
};

#[derive(Parser)]
#[command(name = "streamflow", version, about = "Multi-tenant pub/sub stream processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the REST API.
    Serve(ServeArgs),
    /// Generate a random topology as JSON.
    Topogen(TopogenArgs),
    /// Print graph metrics of a topology file.
    Metrics {
        /// Topology JSON as written by `topogen`.
        spec: PathBuf,
    },
    /// Deploy topology families and measure dispatch latency.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "SF_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, env = "SF_WORKERS")]
    workers: Option<usize>,
    #[arg(long, env = "SF_QUEUE_CAPACITY", default_value_t = 65536)]
    queue_capacity: usize,
    /// Directory of the file-backed store, or `mem`.
    #[arg(long, env = "SF_STORE", default_value = "mem")]
    store: String,
    #[arg(long, env = "SF_CALLBACK_TIMEOUT_MS", default_value_t = 2000)]
    callback_timeout_ms: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Skewed,
}

#[derive(Args)]
struct TopogenArgs {
    #[arg(long, env = "SF_STREAMS")]
    streams: usize,
    #[arg(long, env = "SF_COMPOSITE")]
    composite: usize,
    /// Upper bound on operands per composite.
    #[arg(long, env = "SF_OPERANDS", default_value_t = 2)]
    operands: usize,
    #[arg(long, env = "SF_DIST", value_enum, default_value = "uniform")]
    dist: Dist,
    /// Exponent of the skewed distribution.
    #[arg(long, env = "SF_SKEW", default_value_t = 1.0)]
    skew: f64,
    #[arg(long, env = "SF_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "SF_CYCLES")]
    cycles: bool,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Paced,
    Serial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inject {
    /// One source per injection, cycling through the sources.
    One,
    /// Every source per injection.
    All,
}

#[derive(Args)]
struct BenchArgs {
    /// Families to sweep (length, in, out, random).
    #[arg(long, env = "SF_FAMILY", value_delimiter = ',', default_value = "length,in,out")]
    family: Vec<Family>,
    /// Family sizes to sweep.
    #[arg(long, env = "SF_SIZE", value_delimiter = ',', default_value = "1,5,10,20,50")]
    size: Vec<usize>,
    #[arg(long, env = "SF_INJECTIONS", default_value_t = 10)]
    injections: usize,
    /// Injections per second in paced mode.
    #[arg(long, env = "SF_RATE", default_value_t = 20.0)]
    rate: f64,
    #[arg(long, env = "SF_WORKERS")]
    workers: Option<usize>,
    #[arg(long, env = "SF_MODE", value_enum, default_value = "paced")]
    mode: Mode,
    #[arg(long, env = "SF_INJECT", value_enum, default_value = "one")]
    inject: Inject,
    /// Per-injection completion deadline.
    #[arg(long, env = "SF_DEADLINE_MS", default_value_t = 10_000)]
    deadline_ms: u64,
    /// Directory for the CSV reports.
    #[arg(short, long, default_value = "bench-out")]
    output: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve(a) => serve(a),
        Command::Topogen(a) => topogen(a),
        Command::Metrics { spec } => metrics(spec),
        Command::Bench(a) => bench(a),
    }
}

fn default_workers() -> usize {
    RuntimeConfig::default().workers
}

fn serve(a: ServeArgs) -> Result<()> {
    let cfg = ApiConfig {
        bind_address: a.bind,
        workers: a.workers.unwrap_or_else(default_workers),
        queue_capacity: a.queue_capacity,
        store_root: (a.store != "mem").then(|| PathBuf::from(&a.store)),
        callback_timeout: Duration::from_millis(a.callback_timeout_ms),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(streamflow_api::serve(cfg, async {
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
    }))?;
    Ok(())
}

fn topogen(a: TopogenArgs) -> Result<()> {
    let knobs = GeneratorKnobs {
        num_streams: a.streams,
        num_composite: a.composite,
        operands: a.operands,
        distribution: match a.dist {
            Dist::Uniform => OperandDistribution::Uniform,
            Dist::Skewed => OperandDistribution::Skewed { exponent: a.skew },
        },
        allow_cycles: a.cycles,
        seed: a.seed,
    };
    let spec = generate_random(&knobs)?;
    let json = serde_json::to_string_pretty(&spec)?;
    match a.output {
        Some(path) => std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(std::io::stdout(), "{json}")?,
    }
    Ok(())
}

fn metrics(path: PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let spec: TopologySpec = serde_json::from_str(&text).context("parsing topology")?;
    spec.validate()?;
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&compute_metrics(&spec))?)?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.injections == 0 {
        bail!("--injections must be at least 1");
    }
    let mode = match a.mode {
        Mode::Paced if !(a.rate > 0.0 && a.rate.is_finite()) => bail!("--rate must be positive"),
        Mode::Paced => BenchMode::Paced { per_second: a.rate },
        Mode::Serial => BenchMode::Serial,
    };
    let runtime = RuntimeConfig {
        workers: a.workers.unwrap_or_else(default_workers),
        ..RuntimeConfig::default()
    };
    let mut reports = Vec::new();
    for &family in &a.family {
        for &size in &a.size {
            let cfg = BenchConfig {
                family: family.as_str().to_owned(),
                size,
                injections: a.injections,
                mode,
                injection: match a.inject {
                    Inject::One => Injection::RoundRobin,
                    Inject::All => Injection::AllSources,
                },
                deadline: Duration::from_millis(a.deadline_ms),
            };
            log::info!("running {} size {size}", family.as_str());
            let report = run_family(family, size, runtime.clone(), &cfg)?;
            for v in &report.violations {
                log::error!("{} size {size}: {v}", family.as_str());
            }
            reports.push(report);
        }
    }
    emit_report(&reports, &a.output)?;
    write!(std::io::stdout(), "{}", format_table(&reports))?;
    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    if violations > 0 {
        bail!("{violations} consistency violations");
    }
    Ok(())
}
