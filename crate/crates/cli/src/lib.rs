//! Command implementations behind the `butler-mimo` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use butler_mimo::array::{pattern_table, theta_grid, FrontEndKind};
use butler_mimo::experiment::{
    load_trace, synthesize_trace, write_aggregates, ChannelSource, Mode, ResultsWriter, ScenarioConfig,
    SkippedRealization,
};
use butler_mimo::metrics::QUARTILE_METHOD;
use butler_mimo::{parse_config, run_campaign, SimConfig};
use clap::{ArgAction, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Campaigns with more skipped (singular) realization units fail.
pub const MAX_SKIP_RATE: f64 = 0.01;

/// Exit status when outputs were written but too many units were skipped.
pub const EXIT_SKIP_RATE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "butler-mimo", version, about = "mmWave multi-user MIMO link-level simulator")]
pub struct Cli {
    /// JSON config; missing keys take the reference values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// -v for progress, -vv for debug output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export beam patterns and a per-beam summary.
    Patterns {
        #[arg(long, default_value = "butler")]
        frontend: FrontEndKind,
        /// Azimuth step in degrees.
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
    },
    /// Run a single user count.
    Simulate {
        #[arg(long)]
        users: usize,
        /// Restrict to one front end.
        #[arg(long)]
        frontend: Option<FrontEndKind>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Run the full configured sweep.
    Campaign {
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Run the sweep with true channels taken from a recorded trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Write a synthetic measurement trace.
    Trace {
        #[arg(long, default_value_t = 150)]
        angles: usize,
        #[arg(long, default_value_t = 100)]
        estimations: usize,
        /// Scale of the measurement noise relative to the estimation noise.
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long, default_value = "butler")]
        frontend: FrontEndKind,
    },
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path).with_context(|| format!("loading config {}", path.display()))?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;

    pool.install(|| match cli.command {
        Command::Patterns { frontend, resolution } => cmd_patterns(&cfg, frontend, resolution, &cli.out),
        Command::Simulate { users, frontend, realizations } => {
            cfg.users = butler_mimo::config::UserSweep::One(users);
            if let Some(f) = frontend {
                cfg.frontends = vec![f];
            }
            if let Some(n) = realizations {
                cfg.realizations = n;
            }
            cmd_campaign(&cfg, None, "simulate", &cli.out, cli.threads)
        }
        Command::Campaign { realizations } => {
            if let Some(n) = realizations {
                cfg.realizations = n;
            }
            cmd_campaign(&cfg, None, "campaign", &cli.out, cli.threads)
        }
        Command::Replay { trace, realizations } => {
            cfg.mode = Mode::Replay;
            if let Some(n) = realizations {
                cfg.realizations = n;
            }
            cmd_campaign(&cfg, Some(&trace), "replay", &cli.out, cli.threads)
        }
        Command::Trace { angles, estimations, noise_scale, frontend } => {
            cmd_trace(&cfg, angles, estimations, noise_scale, frontend, &cli.out)
        }
    })
}

fn cmd_patterns(cfg: &SimConfig, frontend: FrontEndKind, resolution: f64, out: &Path) -> Result<ExitCode> {
    let front = cfg.arrays().transmitter(frontend)?;
    let table = pattern_table(&front, &theta_grid(resolution)?)?;

    let csv_path = out.join(format!("patterns_{frontend}.csv"));
    let mut w = BufWriter::new(create(&csv_path)?);
    table.write_csv(&mut w)?;
    w.flush()?;

    let summary_path = out.join(format!("patterns_{frontend}_summary.json"));
    let summary = table.beam_summaries();
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;
    log::info!("wrote {} and {}", csv_path.display(), summary_path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config_sha256: String,
    config: &'a SimConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<TraceInfo>,
    threads: usize,
    wall_time_s: f64,
    realization_units: usize,
    skipped: usize,
    skip_rate: f64,
    skipped_realizations: &'a [SkippedRealization],
    quartile_method: &'static str,
}

#[derive(Serialize)]
struct TraceInfo {
    path: String,
    sha256: String,
}

fn cmd_campaign(
    cfg: &SimConfig,
    trace_path: Option<&Path>,
    command: &str,
    out: &Path,
    threads: Option<usize>,
) -> Result<ExitCode> {
    let started = Instant::now();
    let trace =
        trace_path.map(|p| load_trace(p).with_context(|| format!("loading trace {}", p.display()))).transpose()?;
    let source = match &trace {
        Some(t) => ChannelSource::Replay(t),
        None => ChannelSource::Synthesize,
    };
    let sweep: Vec<ScenarioConfig> = cfg.scenarios();

    let results_path = out.join("results.csv");
    let mut results = ResultsWriter::new(BufWriter::new(create(&results_path)?))?;
    let report = run_campaign(&sweep, source, |r| results.write(r))?;
    results.finish()?.flush()?;

    let aggregate_path = out.join("aggregate.csv");
    let mut agg = BufWriter::new(create(&aggregate_path)?);
    write_aggregates(&report.aggregates, &mut agg)?;
    agg.flush()?;

    let trace_info = match trace_path {
        Some(p) => Some(TraceInfo { path: p.display().to_string(), sha256: sha256_hex(&fs::read(p)?) }),
        None => None,
    };
    let meta = Metadata {
        tool: "butler-mimo",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        config_sha256: sha256_hex(&serde_json::to_vec(cfg)?),
        config: cfg,
        trace: trace_info,
        threads: threads.unwrap_or_else(rayon::current_num_threads),
        wall_time_s: started.elapsed().as_secs_f64(),
        realization_units: report.total_units,
        skipped: report.skipped.len(),
        skip_rate: report.skip_rate(),
        skipped_realizations: &report.skipped,
        quartile_method: QUARTILE_METHOD,
    };
    let meta_path = out.join("metadata.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", meta_path.display()))?;

    log::info!("{} aggregate rows, {} skipped", report.aggregates.len(), report.skipped.len());
    if report.skip_rate() > MAX_SKIP_RATE {
        log::error!(
            "{} of {} realization units skipped ({:.2}%), above the {:.0}% limit",
            report.skipped.len(),
            report.total_units,
            100.0 * report.skip_rate(),
            100.0 * MAX_SKIP_RATE
        );
        return Ok(ExitCode::from(EXIT_SKIP_RATE));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(
    cfg: &SimConfig,
    angles: usize,
    estimations: usize,
    noise_scale: f64,
    frontend: FrontEndKind,
    out: &Path,
) -> Result<ExitCode> {
    let mut scenario = cfg.scenarios().into_iter().next().context("config has no scenarios")?;
    scenario.frontend = frontend;
    let trace = synthesize_trace(&scenario, angles, estimations, noise_scale)?;
    let path = out.join("trace.csv");
    let mut w = BufWriter::new(create(&path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    log::info!("wrote {} angles to {}", trace.num_angles(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
