//! Reference market: a seeded geometric Brownian motion price path.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// Identifier of the generator family used for every random draw.
pub const RNG_ID: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("time {time} s outside the path [0, {end}]")]
    OutOfRange { time: f64, end: f64 },
    #[error("malformed price CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub time_s: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Spacing between points in seconds.
    pub dt_s: f64,
    pub points: Vec<PricePoint>,
}

/// Parameters of a GBM path in daily units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub points_per_day: u32,
    pub days: u32,
}

impl GbmParams {
    pub fn dt_days(&self) -> f64 {
        1.0 / f64::from(self.points_per_day)
    }

    pub fn steps(&self) -> usize {
        self.points_per_day as usize * self.days as usize
    }
}

/// Exact GBM sampling: `S_k = S_{k-1} exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z_k)`.
///
/// The path holds `n_steps + 1` points; the first is `s0` at time zero.
pub fn generate_gbm(s0: f64, mu: f64, sigma: f64, n_steps: usize, dt_days: f64, seed: u64) -> Result<PricePath, MarketError> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(MarketError::Domain(format!("initial price {s0} must be positive")));
    }
    if !(sigma >= 0.0) || !mu.is_finite() {
        return Err(MarketError::Domain(format!("invalid drift/volatility {mu}/{sigma}")));
    }
    if !(dt_days > 0.0) {
        return Err(MarketError::Domain("time step must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift = (mu - 0.5 * sigma * sigma) * dt_days;
    let vol = sigma * dt_days.sqrt();
    let dt_s = dt_days * SECONDS_PER_DAY;
    let mut points = Vec::with_capacity(n_steps + 1);
    let mut log_return = 0.0;
    points.push(PricePoint { time_s: 0.0, price: s0 });
    for k in 1..=n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        log_return += drift + vol * z;
        points.push(PricePoint { time_s: k as f64 * dt_s, price: s0 * log_return.exp() });
    }
    Ok(PricePath { s0, mu, sigma, dt_s, points })
}

pub fn generate_from(params: &GbmParams, seed: u64) -> Result<PricePath, MarketError> {
    generate_gbm(params.s0, params.mu, params.sigma, params.steps(), params.dt_days(), seed)
}

/// History that ends exactly at `params.s0`: a forward path rescaled by
/// `s0 / final`, which leaves every log return untouched.
pub fn generate_history_prefix(params: &GbmParams, history_days: u32, seed: u64) -> Result<PricePath, MarketError> {
    let steps = params.points_per_day as usize * history_days as usize;
    let mut path = generate_gbm(params.s0, params.mu, params.sigma, steps, params.dt_days(), seed)?;
    let scale = params.s0 / path.points.last().map(|p| p.price).unwrap_or(params.s0);
    for p in &mut path.points {
        p.price *= scale;
    }
    if let Some(last) = path.points.last_mut() {
        last.price = params.s0;
    }
    path.s0 = path.points[0].price;
    Ok(path)
}

impl PricePath {
    pub fn end_time(&self) -> f64 {
        self.points.last().map(|p| p.time_s).unwrap_or(0.0)
    }

    /// Index of the latest point at or before `time_s`.
    pub fn index_at(&self, time_s: f64) -> Result<usize, MarketError> {
        let end = self.end_time();
        let tol = 1e-9 * end.max(1.0);
        if !(time_s >= -tol && time_s <= end + tol) {
            return Err(MarketError::OutOfRange { time: time_s, end });
        }
        let mut k = ((time_s / self.dt_s).floor().max(0.0) as usize).min(self.points.len() - 1);
        if k + 1 < self.points.len() && self.points[k + 1].time_s <= time_s + tol {
            k += 1;
        }
        while k > 0 && self.points[k].time_s > time_s + tol {
            k -= 1;
        }
        Ok(k)
    }

    /// Step-function price: no interpolation and no lookahead.
    pub fn price_at(&self, time_s: f64) -> Result<f64, MarketError> {
        Ok(self.points[self.index_at(time_s)?].price)
    }

    pub fn final_price(&self) -> f64 {
        self.points.last().map(|p| p.price).unwrap_or(self.s0)
    }

    pub fn log_returns(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1].price / w[0].price).ln()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.points.len());
        out.push_str("time_s,price\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.time_s, p.price);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), MarketError> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Reads a `time_s,price` CSV. Drift and volatility are not stored in the
    /// file and come back as the sample estimates of the log returns.
    pub fn read_csv<R: Read>(r: R) -> Result<PricePath, MarketError> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "time_s,price" {
            return Err(MarketError::Csv { line: 1, reason: format!("expected header `time_s,price`, got `{header}`") });
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let (t, p) = line
                .split_once(',')
                .ok_or_else(|| MarketError::Csv { line: line_no, reason: "expected two columns".into() })?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| MarketError::Csv { line: line_no, reason: e.to_string() })
            };
            let point = PricePoint { time_s: parse(t)?, price: parse(p)? };
            if !(point.price > 0.0) {
                return Err(MarketError::Csv { line: line_no, reason: "price must be positive".into() });
            }
            if let Some(prev) = points.last().map(|p: &PricePoint| p.time_s) {
                if !(point.time_s > prev) {
                    return Err(MarketError::Csv { line: line_no, reason: "timestamps must increase".into() });
                }
            }
            points.push(point);
        }
        if points.is_empty() {
            return Err(MarketError::Csv { line: 2, reason: "no price rows".into() });
        }
        let dt_s = if points.len() > 1 { points[1].time_s - points[0].time_s } else { SECONDS_PER_DAY };
        let mut path = PricePath { s0: points[0].price, mu: 0.0, sigma: 0.0, dt_s, points };
        let r = path.log_returns();
        if r.len() > 1 {
            let dt_days = dt_s / SECONDS_PER_DAY;
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            path.sigma = (var / dt_days).sqrt();
            path.mu = mean / dt_days + 0.5 * path.sigma * path.sigma;
        }
        Ok(path)
    }
}
