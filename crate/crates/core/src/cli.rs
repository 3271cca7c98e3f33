//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::market::{generate_from, GbmParams, PricePath};
use crate::metrics::AggregateReport;
use crate::runner::{run_scenario, write_atomic, RunError, RunOptions};
use crate::scenario::{load_scenario, preset, ConfigError, ScenarioConfig, PRESETS};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "AMMSIM_OUT";
const DEFAULT_OUT_DIR: &str = "results";

const EXIT_FAILURE: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ammsim", version, about = "Agent-based AMM simulator: block-time, fee and auction-slot experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Master seed (overrides the scenario's).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of repetitions.
    #[arg(long)]
    reps: Option<u32>,
    /// Output directory [default: $AMMSIM_OUT or ./results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write per-transaction execution records.
    #[arg(long)]
    records: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset or a scenario file.
    Run {
        /// Preset name or path to a TOML scenario.
        scenario: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Generate a reference-market price path as CSV.
    GenMarket {
        #[arg(long, default_value_t = 1000.0)]
        s0: f64,
        #[arg(long, default_value_t = 0.008)]
        mu: f64,
        #[arg(long, default_value_t = 0.077)]
        sigma: f64,
        #[arg(long, default_value_t = 1000)]
        points_per_day: u32,
        #[arg(long, default_value_t = 5)]
        days: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario against a previously exported price path.
    Replay {
        #[arg(long)]
        market: PathBuf,
        /// Preset name or path to a TOML scenario.
        #[arg(long, default_value = "test1")]
        scenario: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// List the built-in scenarios.
    ListPresets,
    /// Print a preset as a TOML scenario file.
    ShowPreset { name: String },
}

fn fail(msg: impl std::fmt::Display, code: i32) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn run_error_code(e: &RunError) -> i32 {
    match e {
        RunError::Config(ConfigError::UnknownPreset(_)) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn print_summary(cfg: &ScenarioConfig, report: &AggregateReport) {
    println!("scenario {} ({} repetitions, seed {})", cfg.name, cfg.repetitions, cfg.master_seed);
    println!(
        "{:<12} {:>10} {:>10} {:>10} {:>14} {:>10} {:>14}",
        "amm", "mean_dev", "p80_dev", "p80_slip", "arb_net_usdc", "realized", "lp_ret_usdc"
    );
    for v in &report.variants {
        let g = |k| v.get(k).unwrap_or(f64::NAN);
        println!(
            "{:<12} {:>10.5} {:>10.5} {:>10.5} {:>14.2} {:>10.4} {:>14.2}",
            v.label,
            g("mean_deviation"),
            g("p80_deviation"),
            g("p80_slippage"),
            g("arb_net_profit_usdc"),
            g("arb_realized_fraction"),
            g("lp_total_returns_usdc")
        );
    }
    for w in &report.deviation_wins {
        println!("{} deviation below {} in {:.0}% of repetitions", w.better, w.than, 100.0 * w.fraction);
    }
}

fn run(mut cfg: ScenarioConfig, args: RunArgs, market: Option<PricePath>) -> i32 {
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.repetitions = reps;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let out_dir = args
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let opts = RunOptions { out_dir: Some(out_dir.clone()), keep_records: args.records, market };
    match run_scenario(&cfg, &opts) {
        Ok(outcome) => {
            print_summary(&cfg, &outcome.report);
            let n = outcome.manifest.map(|m| m.files.len() + 1).unwrap_or(0);
            println!("wrote {n} files to {}", out_dir.display());
            0
        }
        Err(e) => {
            let code = run_error_code(&e);
            fail(e, code)
        }
    }
}

fn load(spec: &str) -> Result<ScenarioConfig, i32> {
    load_scenario(spec).map_err(|e| match e {
        ConfigError::UnknownPreset(_) => fail(e, EXIT_USAGE),
        other => fail(other, EXIT_FAILURE),
    })
}

/// Parses `argv` (program name first) and runs the command; returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Run { scenario, args } => match load(&scenario) {
            Ok(cfg) => run(cfg, args, None),
            Err(code) => code,
        },
        Command::Replay { market, scenario, args } => {
            let path = match std::fs::File::open(&market).map_err(Into::into).and_then(PricePath::read_csv) {
                Ok(p) => p,
                Err(e) => return fail(format!("{}: {e}", market.display()), EXIT_FAILURE),
            };
            match load(&scenario) {
                Ok(cfg) => run(cfg, args, Some(path)),
                Err(code) => code,
            }
        }
        Command::GenMarket { s0, mu, sigma, points_per_day, days, seed, out } => {
            let params = GbmParams { s0, mu, sigma, points_per_day, days };
            if points_per_day == 0 || days == 0 {
                return fail("points-per-day and days must be positive", EXIT_USAGE);
            }
            let path = match generate_from(&params, seed) {
                Ok(p) => p,
                Err(e) => return fail(e, EXIT_USAGE),
            };
            match write_atomic(&out, path.to_csv().as_bytes()) {
                Ok(()) => {
                    println!("wrote {} points to {}", path.points.len(), out.display());
                    0
                }
                Err(e) => fail(e, EXIT_FAILURE),
            }
        }
        Command::ListPresets => {
            for name in PRESETS {
                let cfg = preset(name).expect("catalog entries resolve");
                let variants: Vec<String> = cfg
                    .variants
                    .iter()
                    .map(|v| format!("{} {}s/{}", v.amm.label(), v.block_interval_s, v.network_fee))
                    .collect();
                println!("{name:<14} mu={} sigma={}  {}", cfg.gbm.mu, cfg.gbm.sigma, variants.join(", "));
            }
            0
        }
        Command::ShowPreset { name } => match preset(&name) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                0
            }
            Err(e) => fail(e, EXIT_USAGE),
        },
    }
}
