//! Repetition orchestration and result files.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::BidLimit;
use crate::chain::records_csv;
use crate::market::{generate_from, generate_history_prefix, GbmParams, MarketError, PricePath, RNG_ID};
use crate::metrics::{aggregate, AggregateReport, MetricsError, RunMetrics};
use crate::scenario::{derive_seed, history_seed, market_seed, repetition_seed, AmmVariant, ConfigError, ScenarioConfig};
use crate::sim::{bid_limit, simulate, user_orders, RunOutput, SimError, SimInputs};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("repetition {rep} of {variant}: {source}")]
    Sim { variant: &'static str, rep: u32, source: SimError },
    #[error(transparent)]
    Setup(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub keep_records: bool,
    /// Replay this reference market instead of generating one.
    pub market: Option<PricePath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config_digest: String,
    pub rng: String,
    pub master_seed: u64,
    pub market_seed: u64,
    pub history_seed: u64,
    pub repetition_seeds: Vec<u64>,
    pub software_version: String,
    pub files: Vec<String>,
    pub created_unix_s: u64,
}

#[derive(Debug, Clone, Serialize)]
struct AggregateDocument<'a> {
    scenario: &'a str,
    config_digest: String,
    rng: &'a str,
    repetitions: u32,
    report: &'a AggregateReport,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: AggregateReport,
    pub path: PricePath,
    pub bid_limit: Option<BidLimit>,
    /// Per variant, in config order, one output per repetition.
    pub runs: Vec<(AmmVariant, Vec<RunOutput>)>,
    pub manifest: Option<RunManifest>,
}

impl ScenarioOutcome {
    pub fn metrics(&self, amm: AmmVariant) -> Option<Vec<&RunMetrics>> {
        self.runs.iter().find(|(v, _)| *v == amm).map(|(_, runs)| runs.iter().map(|r| &r.metrics).collect())
    }
}

fn history_params(cfg: &ScenarioConfig, path: &PricePath) -> GbmParams {
    GbmParams { s0: path.s0, ..cfg.gbm.params() }
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioOutcome, RunError> {
    cfg.validate()?;
    let master = cfg.master_seed;
    let path = match &opts.market {
        Some(p) => p.clone(),
        None => generate_from(&cfg.gbm.params(), market_seed(master))?,
    };
    let needed = crate::sim::duration_s(cfg) as f64;
    if path.end_time() + 1e-6 < needed {
        return Err(MarketError::OutOfRange { time: needed, end: path.end_time() }.into());
    }
    let limit = match cfg.variant(AmmVariant::XrplCamA) {
        Some(v) => {
            let history = generate_history_prefix(&history_params(cfg, &path), cfg.gbm.history_days, history_seed(master))?;
            Some(bid_limit(cfg, &history, v.network_fee)?)
        }
        None => None,
    };

    let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| repetition_seed(master, r)).collect();
    let one_rep = |rep: u32| -> Result<Vec<RunOutput>, RunError> {
        let seed = seeds[rep as usize];
        let orders = user_orders(cfg, derive_seed(seed, "users", 0)).map_err(SimError::from)?;
        cfg.variants
            .iter()
            .map(|v| {
                simulate(&SimInputs {
                    config: cfg,
                    variant: v,
                    path: &path,
                    orders: &orders,
                    bid_limit: limit.as_ref(),
                    shuffle_seed: derive_seed(seed, v.amm.label(), 0),
                    keep_records: opts.keep_records,
                })
                .map_err(|source| RunError::Sim { variant: v.amm.label(), rep, source })
            })
            .collect()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        builder = builder.num_threads(cfg.workers);
    }
    let workers = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let per_rep: Vec<Vec<RunOutput>> = workers.install(|| (0..cfg.repetitions).into_par_iter().map(one_rep).collect::<Result<_, _>>())?;

    let mut runs: Vec<(AmmVariant, Vec<RunOutput>)> = cfg.variants.iter().map(|v| (v.amm, Vec::new())).collect();
    for rep in per_rep {
        for (slot, output) in runs.iter_mut().zip(rep) {
            slot.1.push(output);
        }
    }
    let groups: Vec<(String, Vec<RunMetrics>)> = runs
        .iter()
        .map(|(v, outs)| (v.label().to_string(), outs.iter().map(|o| o.metrics.clone()).collect()))
        .collect();
    let report = aggregate(&groups)?;

    let mut outcome = ScenarioOutcome { report, path, bid_limit: limit, runs, manifest: None };
    if let Some(dir) = &opts.out_dir {
        outcome.manifest = Some(write_outputs(cfg, &outcome, dir, &seeds)?);
    }
    Ok(outcome)
}

/// Writes `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let io = |source| RunError::Io { path: path.display().to_string(), source };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn write_outputs(cfg: &ScenarioConfig, outcome: &ScenarioOutcome, dir: &Path, seeds: &[u64]) -> Result<RunManifest, RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
    let name = &cfg.name;
    let mut files = Vec::new();
    let mut put = |file: String, body: &[u8]| -> Result<(), RunError> {
        write_atomic(&dir.join(&file), body)?;
        files.push(file);
        Ok(())
    };
    put(format!("{name}_market.csv"), outcome.path.to_csv().as_bytes())?;
    for (amm, outs) in &outcome.runs {
        let label = amm.label();
        for (rep, o) in outs.iter().enumerate() {
            put(format!("{name}_{label}_{rep}.csv"), o.metrics.to_csv().as_bytes())?;
            put(format!("{name}_{label}_{rep}_deviation.csv"), o.metrics.deviation_csv().as_bytes())?;
            if !o.records.is_empty() {
                put(format!("{name}_{label}_{rep}_records.csv"), records_csv(&o.records).as_bytes())?;
            }
        }
    }
    let doc = AggregateDocument {
        scenario: name,
        config_digest: cfg.digest(),
        rng: RNG_ID,
        repetitions: cfg.repetitions,
        report: &outcome.report,
    };
    let json = serde_json::to_string_pretty(&doc).expect("report serializes");
    put(format!("{name}_aggregate.json"), json.as_bytes())?;

    let manifest = RunManifest {
        scenario: name.clone(),
        config_digest: cfg.digest(),
        rng: RNG_ID.to_string(),
        master_seed: cfg.master_seed,
        market_seed: market_seed(cfg.master_seed),
        history_seed: history_seed(cfg.master_seed),
        repetition_seeds: seeds.to_vec(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        files,
        created_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(format!("{name}_manifest.json")), json.as_bytes())?;
    Ok(manifest)
}
