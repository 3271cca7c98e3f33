//! Per-run measurements and cross-run aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no samples")]
    Empty,
}

/// Relative distance of the executed price from the quoted spot price.
pub fn slippage(effective_price: f64, spe_pre: f64) -> Result<f64, MetricsError> {
    if !(spe_pre > 0.0) {
        return Err(MetricsError::Domain(format!("spot price {spe_pre} must be positive")));
    }
    Ok(effective_price / spe_pre - 1.0)
}

pub fn price_impact(spe_post: f64, spe_pre: f64) -> Result<f64, MetricsError> {
    if !(spe_pre > 0.0) {
        return Err(MetricsError::Domain(format!("spot price {spe_pre} must be positive")));
    }
    Ok(spe_post / spe_pre - 1.0)
}

/// LP position value relative to simply holding the deposit, minus one.
pub fn divergence_loss(lp_value: f64, hold_value: f64) -> Result<f64, MetricsError> {
    if !(hold_value > 0.0) {
        return Err(MetricsError::Domain(format!("hold value {hold_value} must be positive")));
    }
    Ok(lp_value / hold_value - 1.0)
}

pub fn deviation(spe: f64, ext: f64) -> Result<f64, MetricsError> {
    if !(ext > 0.0) {
        return Err(MetricsError::Domain(format!("reference price {ext} must be positive")));
    }
    Ok((spe - ext).abs() / ext)
}

/// Pairs pool and reference prices sampled at the same instants.
pub fn deviation_series(times: &[f64], spe: &[f64], ext: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if times.len() != spe.len() || spe.len() != ext.len() {
        return Err(MetricsError::Domain("series lengths differ".into()));
    }
    times.iter().zip(spe).zip(ext).map(|((t, s), e)| Ok((*t, deviation(*s, *e)?))).collect()
}

/// Trailing moving average, emitted from index `window - 1` onward; empty
/// when the window is longer than the series.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    if window > values.len() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(values.len() + 1 - window);
    let mut sum: f64 = values[..window].iter().sum();
    out.push(sum / window as f64);
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum / window as f64);
    }
    out
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Linear-interpolation percentile, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(MetricsError::Domain(format!("quantile {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Empirical CDF as sorted `(x, F(x))` steps.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, x)| (*x, (i + 1) as f64 / n)).collect()
}

pub fn cdf_at(values: &[f64], x: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| **v <= x).count() as f64 / values.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpReturns {
    pub trading_fees_usdc: f64,
    pub cam_bids_usdc: f64,
}

impl LpReturns {
    pub fn total(&self) -> f64 {
        self.trading_fees_usdc + self.cam_bids_usdc
    }
}

/// Everything measured in one repetition of one AMM variant. Arbitrage
/// statistics cover arbitrageur swaps only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(skip)]
    pub deviation_series: Vec<(f64, f64)>,
    #[serde(skip)]
    pub slippage_samples: Vec<f64>,
    #[serde(skip)]
    pub price_impact_samples: Vec<f64>,
    pub trading_volume_usdc: f64,
    pub arb_volume_usdc: f64,
    /// Gross trading profit of arbitrage swaps at the reference price.
    pub arb_gross_profit_usdc: f64,
    pub arb_network_fees_usdc: f64,
    pub arb_bid_cost_usdc: f64,
    pub arb_realized: u64,
    pub arb_unrealized: u64,
    pub arb_discounted: u64,
    pub bids_submitted: u64,
    pub bids_won: u64,
    pub user_realized: u64,
    pub user_unrealized: u64,
    pub lp_returns: LpReturns,
    pub divergence_loss: f64,
    pub final_pool_price: f64,
    pub final_reference_price: f64,
}

impl RunMetrics {
    pub fn arb_net_profit(&self) -> f64 {
        self.arb_gross_profit_usdc - self.arb_network_fees_usdc - self.arb_bid_cost_usdc
    }

    pub fn arb_realized_fraction(&self) -> f64 {
        let total = self.arb_realized + self.arb_unrealized;
        if total == 0 {
            0.0
        } else {
            self.arb_realized as f64 / total as f64
        }
    }

    /// Share of realized arbitrage swaps that ran at the zero fee.
    pub fn discounted_fraction(&self) -> f64 {
        if self.arb_realized == 0 {
            0.0
        } else {
            self.arb_discounted as f64 / self.arb_realized as f64
        }
    }

    pub fn deviations(&self) -> Vec<f64> {
        self.deviation_series.iter().map(|(_, d)| *d).collect()
    }

    pub fn mean_deviation(&self) -> f64 {
        mean(&self.deviations()).unwrap_or(0.0)
    }

    pub fn p80_deviation(&self) -> f64 {
        percentile(&self.deviations(), 0.8).unwrap_or(0.0)
    }

    pub fn p80_slippage(&self) -> f64 {
        percentile(&self.slippage_samples, 0.8).unwrap_or(0.0)
    }

    pub fn p80_price_impact(&self) -> f64 {
        percentile(&self.price_impact_samples, 0.8).unwrap_or(0.0)
    }

    /// Flat `(metric, value)` view used for the per-run CSV and aggregation.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("trading_volume_usdc", self.trading_volume_usdc),
            ("arb_volume_usdc", self.arb_volume_usdc),
            ("arb_gross_profit_usdc", self.arb_gross_profit_usdc),
            ("arb_network_fees_usdc", self.arb_network_fees_usdc),
            ("arb_bid_cost_usdc", self.arb_bid_cost_usdc),
            ("arb_net_profit_usdc", self.arb_net_profit()),
            ("arb_realized", self.arb_realized as f64),
            ("arb_unrealized", self.arb_unrealized as f64),
            ("arb_realized_fraction", self.arb_realized_fraction()),
            ("arb_discounted", self.arb_discounted as f64),
            ("arb_discounted_fraction", self.discounted_fraction()),
            ("bids_submitted", self.bids_submitted as f64),
            ("bids_won", self.bids_won as f64),
            ("user_realized", self.user_realized as f64),
            ("user_unrealized", self.user_unrealized as f64),
            ("lp_trading_fees_usdc", self.lp_returns.trading_fees_usdc),
            ("lp_cam_bids_usdc", self.lp_returns.cam_bids_usdc),
            ("lp_total_returns_usdc", self.lp_returns.total()),
            ("divergence_loss", self.divergence_loss),
            ("mean_deviation", self.mean_deviation()),
            ("p80_deviation", self.p80_deviation()),
            ("p80_slippage", self.p80_slippage()),
            ("p80_price_impact", self.p80_price_impact()),
            ("final_pool_price", self.final_pool_price),
            ("final_reference_price", self.final_reference_price),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.scalars() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn deviation_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.deviation_series.len() + 1));
        out.push_str("time_s,value\n");
        for (t, d) in &self.deviation_series {
            let _ = writeln!(out, "{t},{d}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub label: String,
    pub runs: usize,
    /// Mean over runs of every scalar metric, in `RunMetrics::scalars` order.
    pub means: Vec<(String, f64)>,
}

impl VariantSummary {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.means.iter().find(|(k, _)| k == metric).map(|(_, v)| *v)
    }
}

/// Fraction of repetitions in which `better` had a strictly lower mean
/// deviation than `than`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinFraction {
    pub better: String,
    pub than: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub variants: Vec<VariantSummary>,
    pub deviation_wins: Vec<WinFraction>,
}

impl AggregateReport {
    pub fn variant(&self, label: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.label == label)
    }
}

pub fn summarize(label: &str, runs: &[RunMetrics]) -> Result<VariantSummary, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let table: Vec<Vec<(&'static str, f64)>> = runs.iter().map(RunMetrics::scalars).collect();
    let means = (0..table[0].len())
        .map(|i| {
            let vals: Vec<f64> = table.iter().map(|row| row[i].1).collect();
            (table[0][i].0.to_string(), mean(&vals).unwrap_or(0.0))
        })
        .collect();
    Ok(VariantSummary { label: label.to_string(), runs: runs.len(), means })
}

/// Per-variant means plus pairwise deviation win fractions. Runs are
/// paired by position, so every variant must have the same count.
pub fn aggregate(groups: &[(String, Vec<RunMetrics>)]) -> Result<AggregateReport, MetricsError> {
    if groups.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = groups[0].1.len();
    if groups.iter().any(|(_, runs)| runs.len() != n) {
        return Err(MetricsError::Domain("variants have different repetition counts".into()));
    }
    let variants = groups.iter().map(|(label, runs)| summarize(label, runs)).collect::<Result<Vec<_>, _>>()?;
    let devs: Vec<Vec<f64>> = groups.iter().map(|(_, runs)| runs.iter().map(RunMetrics::mean_deviation).collect()).collect();
    let mut deviation_wins = Vec::new();
    for (i, (a, _)) in groups.iter().enumerate() {
        for (j, (b, _)) in groups.iter().enumerate() {
            if i == j {
                continue;
            }
            let wins = (0..n).filter(|&k| devs[i][k] < devs[j][k]).count();
            deviation_wins.push(WinFraction { better: a.clone(), than: b.clone(), fraction: wins as f64 / n as f64 });
        }
    }
    Ok(AggregateReport { variants, deviation_wins })
}
