//! Scenario configuration, the preset catalog and seed derivation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::amm::MAX_TRADING_FEE;
use crate::market::GbmParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset `{0}` (see `list-presets`)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmmVariant {
    XrplAmm,
    XrplCamA,
    XrplCamB,
    GAmm,
}

impl AmmVariant {
    pub fn label(self) -> &'static str {
        match self {
            AmmVariant::XrplAmm => "xrpl_amm",
            AmmVariant::XrplCamA => "xrpl_cam_a",
            AmmVariant::XrplCamB => "xrpl_cam_b",
            AmmVariant::GAmm => "g_amm",
        }
    }

    pub fn has_auction(self) -> bool {
        matches!(self, AmmVariant::XrplCamA | AmmVariant::XrplCamB)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub amm: AmmVariant,
    pub block_interval_s: u64,
    pub network_fee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub reserve_a: f64,
    pub reserve_b: f64,
    pub trading_fee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmConfig {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub points_per_day: u32,
    pub days: u32,
    pub history_days: u32,
}

impl GbmConfig {
    pub fn params(&self) -> GbmParams {
        GbmParams { s0: self.s0, mu: self.mu, sigma: self.sigma, points_per_day: self.points_per_day, days: self.days }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub safe_profit_margin: f64,
    pub max_slippage: f64,
    pub smoothing_alpha: f64,
    pub arbitrageurs: u32,
    /// Seconds between arbitrage opportunity checks.
    pub arb_check_interval_s: u64,
    /// Seconds between exchange-user decisions.
    pub user_interval_s: u64,
    pub user_trade_probability: f64,
    pub user_mimic_probability: f64,
    pub order_min_eth: f64,
    pub order_max_eth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub repetitions: u32,
    pub master_seed: u64,
    /// Seconds between price-deviation samples.
    pub sample_interval_s: u64,
    /// Worker threads for repetitions; 0 uses every core.
    pub workers: usize,
    pub pool: PoolConfig,
    pub gbm: GbmConfig,
    pub agents: AgentConfig,
    pub variants: Vec<VariantConfig>,
}

fn check(ok: bool, field: &str, why: &str, errors: &mut Vec<String>) {
    if !ok {
        errors.push(format!("{field} {why}"));
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        check(!self.name.is_empty(), "name", "must not be empty", &mut e);
        check(self.repetitions > 0, "repetitions", "must be positive", &mut e);
        check(self.sample_interval_s > 0, "sample_interval_s", "must be positive", &mut e);
        let p = &self.pool;
        check(p.reserve_a > 0.0 && p.reserve_a.is_finite(), "pool.reserve_a", "must be positive", &mut e);
        check(p.reserve_b > 0.0 && p.reserve_b.is_finite(), "pool.reserve_b", "must be positive", &mut e);
        check((0.0..=MAX_TRADING_FEE).contains(&p.trading_fee), "pool.trading_fee", "must be in [0, 0.01]", &mut e);
        let g = &self.gbm;
        check(g.s0 > 0.0 && g.s0.is_finite(), "gbm.s0", "must be positive", &mut e);
        check(g.mu.is_finite(), "gbm.mu", "must be finite", &mut e);
        check(g.sigma >= 0.0 && g.sigma.is_finite(), "gbm.sigma", "must be nonnegative", &mut e);
        check(g.points_per_day > 0, "gbm.points_per_day", "must be positive", &mut e);
        check(g.days > 0, "gbm.days", "must be positive", &mut e);
        check(g.history_days > 0, "gbm.history_days", "must be positive", &mut e);
        let a = &self.agents;
        check(a.safe_profit_margin >= 0.0, "agents.safe_profit_margin", "must be nonnegative", &mut e);
        check(a.max_slippage >= 0.0, "agents.max_slippage", "must be nonnegative", &mut e);
        check(a.smoothing_alpha > 0.0 && a.smoothing_alpha <= 1.0, "agents.smoothing_alpha", "must be in (0, 1]", &mut e);
        check(a.arbitrageurs > 0, "agents.arbitrageurs", "must be positive", &mut e);
        check(a.arb_check_interval_s > 0, "agents.arb_check_interval_s", "must be positive", &mut e);
        check(a.user_interval_s > 0, "agents.user_interval_s", "must be positive", &mut e);
        for (f, v) in [("agents.user_trade_probability", a.user_trade_probability), ("agents.user_mimic_probability", a.user_mimic_probability)] {
            check((0.0..=1.0).contains(&v), f, "must be in [0, 1]", &mut e);
        }
        check(a.order_min_eth > 0.0 && a.order_max_eth >= a.order_min_eth, "agents.order_min_eth/order_max_eth", "must form a positive range", &mut e);
        check(!self.variants.is_empty(), "variants", "must not be empty", &mut e);
        for (i, v) in self.variants.iter().enumerate() {
            check(v.block_interval_s > 0, &format!("variants[{i}].block_interval_s"), "must be positive", &mut e);
            check(v.network_fee >= 0.0 && v.network_fee.is_finite(), &format!("variants[{i}].network_fee"), "must be nonnegative", &mut e);
            if self.variants[..i].iter().any(|w| w.amm == v.amm) {
                e.push(format!("variants[{i}].amm `{}` listed twice", v.amm.label()));
            }
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e.join("; ")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn variant(&self, amm: AmmVariant) -> Option<&VariantConfig> {
        self.variants.iter().find(|v| v.amm == amm)
    }
}

/// 64-bit seed from SHA-256 of `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}

pub fn market_seed(master: u64) -> u64 {
    derive_seed(master, "market", 0)
}

pub fn history_seed(master: u64) -> u64 {
    derive_seed(master, "history", 0)
}

pub fn repetition_seed(master: u64, rep: u32) -> u64 {
    derive_seed(master, "repetition", u64::from(rep))
}

pub const PRESETS: [&str; 7] = ["test1", "test2", "cam-vol-5", "cam-vol-12.5", "cam-vol-20", "cam-test1", "cam-test2"];

fn base(name: &str, mu: f64, sigma: f64, variants: Vec<VariantConfig>) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        repetitions: 10,
        master_seed: 42,
        sample_interval_s: 4,
        workers: 0,
        pool: PoolConfig { reserve_a: 50_000.0, reserve_b: 49_850_000.0, trading_fee: 0.003 },
        gbm: GbmConfig { s0: 1000.0, mu, sigma, points_per_day: 1000, days: 5, history_days: 3 },
        agents: AgentConfig {
            safe_profit_margin: 0.015,
            max_slippage: 0.04,
            smoothing_alpha: 0.5,
            arbitrageurs: 2,
            arb_check_interval_s: 1,
            user_interval_s: 4,
            user_trade_probability: 0.8,
            user_mimic_probability: 0.6,
            order_min_eth: 0.01,
            order_max_eth: 2.0,
        },
        variants,
    }
}

fn variant(amm: AmmVariant, block_interval_s: u64, network_fee: f64) -> VariantConfig {
    VariantConfig { amm, block_interval_s, network_fee }
}

pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    use AmmVariant::*;
    let cam = || vec![variant(XrplCamA, 4, 0.00001), variant(XrplCamB, 4, 0.00001), variant(GAmm, 12, 4.0)];
    Ok(match name {
        "test1" => base(name, 0.008, 0.077, vec![variant(XrplAmm, 4, 1.0), variant(GAmm, 12, 1.0)]),
        "test2" => base(name, 0.008, 0.077, vec![variant(XrplAmm, 8, 0.00001), variant(GAmm, 8, 4.0)]),
        "cam-vol-5" => base(name, 0.01, 0.05, cam()),
        "cam-vol-12.5" => base(name, 0.01, 0.125, cam()),
        "cam-vol-20" => base(name, 0.01, 0.20, cam()),
        "cam-test1" => base(
            name,
            0.008,
            0.077,
            vec![variant(XrplCamA, 4, 1.0), variant(XrplCamB, 4, 1.0), variant(GAmm, 12, 1.0)],
        ),
        "cam-test2" => base(
            name,
            0.008,
            0.077,
            vec![variant(XrplCamA, 8, 0.00001), variant(XrplCamB, 8, 0.00001), variant(GAmm, 8, 4.0)],
        ),
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    })
}

/// A preset name, or a path to a scenario file.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig, ConfigError> {
    if PRESETS.contains(&spec) {
        return preset(spec);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(ConfigError::UnknownPreset(spec.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: spec.to_string(), source })?;
    ScenarioConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(matches!(preset("nosuch"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn test1_chain_parameters() {
        let cfg = preset("test1").unwrap();
        let x = cfg.variant(AmmVariant::XrplAmm).unwrap();
        let g = cfg.variant(AmmVariant::GAmm).unwrap();
        assert_eq!((x.network_fee, x.block_interval_s), (1.0, 4));
        assert_eq!((g.network_fee, g.block_interval_s), (1.0, 12));
        assert_eq!(cfg.agents.safe_profit_margin, 0.015);
        assert_eq!(cfg.agents.max_slippage, 0.04);
    }

    #[test]
    fn cam_vol_20_parameters() {
        let cfg = preset("cam-vol-20").unwrap();
        assert_eq!((cfg.gbm.mu, cfg.gbm.sigma), (0.01, 0.20));
        assert_eq!(cfg.variant(AmmVariant::XrplCamA).unwrap().block_interval_s, 4);
        assert_eq!(cfg.variant(AmmVariant::XrplCamA).unwrap().network_fee, 0.00001);
        assert_eq!(cfg.variant(AmmVariant::GAmm).unwrap().block_interval_s, 12);
        assert_eq!(cfg.variant(AmmVariant::GAmm).unwrap().network_fee, 4.0);
    }

    #[test]
    fn toml_roundtrip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn missing_field_is_named() {
        let text = preset("test1").unwrap().to_toml().replace("reserve_a = 50000.0\n", "");
        let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("reserve_a"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = preset("test1").unwrap().to_toml().replace("[pool]\n", "[pool]\ncolour = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn range_errors_list_fields() {
        let mut cfg = preset("test2").unwrap();
        cfg.pool.trading_fee = 0.5;
        cfg.agents.smoothing_alpha = 0.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("pool.trading_fee") && err.contains("agents.smoothing_alpha"), "{err}");
    }

    #[test]
    fn digest_tracks_every_field() {
        let cfg = preset("test1").unwrap();
        let mut other = cfg.clone();
        assert_eq!(cfg.digest(), other.digest());
        other.variants[1].network_fee = 1.5;
        assert_ne!(cfg.digest(), other.digest());
        let mut other = cfg.clone();
        other.master_seed += 1;
        assert_ne!(cfg.digest(), other.digest());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(repetition_seed(42, 3), repetition_seed(42, 3));
        let seeds: std::collections::HashSet<u64> = (0..100).map(|r| repetition_seed(42, r)).collect();
        assert_eq!(seeds.len(), 100);
        assert_ne!(market_seed(42), history_seed(42));
    }
}
