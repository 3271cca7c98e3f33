//! Weighted geometric-mean pool math.
//!
//! Token A is the priced asset (ETH) and token B the numeraire (USDC). The
//! swap formulas are written for the B-in / A-out direction; the opposite
//! direction is obtained by swapping the roles of the two reserves, which is
//! what [`Direction`] encodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_TRADING_FEE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmmError {
    #[error("degenerate pool: reserve of the priced asset is zero")]
    DegeneratePool,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient liquidity: requested {requested} out of reserve {available}")]
    InsufficientLiquidity { requested: f64, available: f64 },
    #[error("stale swap result: pool reserves changed since the quote")]
    StaleResult,
}

/// Which asset enters the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// B (USDC) in, A (ETH) out.
    BuyA,
    /// A (ETH) in, B (USDC) out.
    SellA,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::BuyA => Direction::SellA,
            Direction::SellA => Direction::BuyA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub reserve_a: f64,
    pub reserve_b: f64,
    pub weight_a: f64,
    pub weight_b: f64,
    pub trading_fee: f64,
    pub lptokens_outstanding: f64,
}

/// Reserves and weights seen from one swap direction: `in` is the asset
/// entering the pool, `out` the one leaving it.
#[derive(Debug, Clone, Copy)]
struct Oriented {
    reserve_in: f64,
    reserve_out: f64,
    weight_in: f64,
    weight_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapResult {
    pub direction: Direction,
    pub amount_in: f64,
    pub amount_out: f64,
    /// Input per unit of output, in the direction's own frame.
    pub effective_price: f64,
    pub spe_before: f64,
    pub spe_after: f64,
    /// Portion of the input retained by the pool as trading fee.
    pub fee_paid: f64,
    pub fee_rate: f64,
    reserves_before: (f64, f64),
}

fn check_fee(fee: f64) -> Result<(), AmmError> {
    if !(0.0..1.0).contains(&fee) {
        return Err(AmmError::Domain(format!("fee {fee} outside [0, 1)")));
    }
    Ok(())
}

fn check_amount(amount: f64, what: &str) -> Result<(), AmmError> {
    if !amount.is_finite() || amount < 0.0 {
        return Err(AmmError::Domain(format!("{what} must be a finite nonnegative amount, got {amount}")));
    }
    Ok(())
}

impl Pool {
    /// Equal-weight pool, the only configuration the simulator runs.
    pub fn new(reserve_a: f64, reserve_b: f64, trading_fee: f64) -> Result<Self, AmmError> {
        let lp = initial_lptokens(reserve_a, reserve_b)?;
        Self::with_weights(reserve_a, reserve_b, 0.5, 0.5, trading_fee, lp)
    }

    pub fn with_weights(
        reserve_a: f64,
        reserve_b: f64,
        weight_a: f64,
        weight_b: f64,
        trading_fee: f64,
        lptokens_outstanding: f64,
    ) -> Result<Self, AmmError> {
        if !(reserve_a > 0.0 && reserve_b > 0.0 && reserve_a.is_finite() && reserve_b.is_finite()) {
            return Err(AmmError::Domain("reserves must be positive and finite".into()));
        }
        if !(weight_a > 0.0 && weight_b > 0.0) || ((weight_a + weight_b) - 1.0).abs() > 1e-12 {
            return Err(AmmError::Domain(format!("weights {weight_a}/{weight_b} must be positive and sum to 1")));
        }
        if !(0.0..=MAX_TRADING_FEE).contains(&trading_fee) {
            return Err(AmmError::Domain(format!("trading fee {trading_fee} outside [0, {MAX_TRADING_FEE}]")));
        }
        if !(lptokens_outstanding >= 0.0) {
            return Err(AmmError::Domain("LPToken supply must be nonnegative".into()));
        }
        Ok(Self { reserve_a, reserve_b, weight_a, weight_b, trading_fee, lptokens_outstanding })
    }

    fn oriented(&self, direction: Direction) -> Oriented {
        match direction {
            Direction::BuyA => Oriented {
                reserve_in: self.reserve_b,
                reserve_out: self.reserve_a,
                weight_in: self.weight_b,
                weight_out: self.weight_a,
            },
            Direction::SellA => Oriented {
                reserve_in: self.reserve_a,
                reserve_out: self.reserve_b,
                weight_in: self.weight_a,
                weight_out: self.weight_b,
            },
        }
    }

    fn effective_fee(&self, fee_override: Option<f64>) -> f64 {
        fee_override.unwrap_or(self.trading_fee)
    }

    /// Spot exchange price of A in units of B, including the fee factor.
    pub fn spot_exchange_rate(&self, fee_override: Option<f64>) -> Result<f64, AmmError> {
        self.spot_rate(Direction::BuyA, self.effective_fee(fee_override))
    }

    /// Spot price of the outgoing asset in units of the incoming one.
    pub fn spot_rate(&self, direction: Direction, fee: f64) -> Result<f64, AmmError> {
        check_fee(fee)?;
        let o = self.oriented(direction);
        if o.reserve_out <= 0.0 {
            return Err(AmmError::DegeneratePool);
        }
        Ok((o.reserve_in / o.weight_in) / (o.reserve_out / o.weight_out) / (1.0 - fee))
    }

    /// Output for a given input (Eq. 1 in the B-in frame).
    pub fn swap_given_in(&self, direction: Direction, amount_in: f64, fee: f64) -> Result<SwapResult, AmmError> {
        check_fee(fee)?;
        check_amount(amount_in, "swap input")?;
        let o = self.oriented(direction);
        let effective_in = amount_in * (1.0 - fee);
        // 1 - (R_in / (R_in + d))^(w_in/w_out), kept accurate for small d.
        let log_ratio = -(effective_in / o.reserve_in).ln_1p();
        let amount_out = o.reserve_out * -((o.weight_in / o.weight_out) * log_ratio).exp_m1();
        self.finish(direction, amount_in, amount_out, fee)
    }

    /// Input required for a given output (Eq. 2 in the B-in frame).
    pub fn swap_given_out(&self, direction: Direction, amount_out: f64, fee: f64) -> Result<SwapResult, AmmError> {
        check_fee(fee)?;
        check_amount(amount_out, "swap output")?;
        let o = self.oriented(direction);
        if amount_out >= o.reserve_out {
            return Err(AmmError::InsufficientLiquidity { requested: amount_out, available: o.reserve_out });
        }
        let log_ratio = -(-amount_out / o.reserve_out).ln_1p();
        let amount_in = o.reserve_in * ((o.weight_out / o.weight_in) * log_ratio).exp_m1() / (1.0 - fee);
        self.finish(direction, amount_in, amount_out, fee)
    }

    fn finish(&self, direction: Direction, amount_in: f64, amount_out: f64, fee: f64) -> Result<SwapResult, AmmError> {
        let spe_before = self.spot_rate(direction, fee)?;
        let mut after = *self;
        after.shift(direction, amount_in, amount_out);
        let spe_after = after.spot_rate(direction, fee)?;
        let effective_price = if amount_out > 0.0 { amount_in / amount_out } else { spe_before };
        Ok(SwapResult {
            direction,
            amount_in,
            amount_out,
            effective_price,
            spe_before,
            spe_after,
            fee_paid: amount_in * fee,
            fee_rate: fee,
            reserves_before: (self.reserve_a, self.reserve_b),
        })
    }

    fn shift(&mut self, direction: Direction, amount_in: f64, amount_out: f64) {
        match direction {
            Direction::BuyA => {
                self.reserve_b += amount_in;
                self.reserve_a -= amount_out;
            }
            Direction::SellA => {
                self.reserve_a += amount_in;
                self.reserve_b -= amount_out;
            }
        }
    }

    /// Input that moves the direction's spot price to `target_spe` once the
    /// swap is applied with the whole input (fee included) left in reserves.
    ///
    /// At zero fee this is exactly Eq. 3, `R_in * ((SPE'/SPE)^(w_out/(w_in+w_out)) - 1)`.
    /// With a fee the retained portion lifts the post-swap price slightly
    /// above the Eq. 3 target, so the equal-weight case uses the exact root of
    /// `(R_in + d)(R_in + d(1-f)) = (SPE'/SPE) R_in^2` and other weights refine
    /// the Eq. 3 seed by bisection on the post-swap price.
    pub fn amount_in_for_target_rate(&self, direction: Direction, target_spe: f64, fee: f64) -> Result<f64, AmmError> {
        check_fee(fee)?;
        if !(target_spe > 0.0 && target_spe.is_finite()) {
            return Err(AmmError::Domain(format!("target price {target_spe} must be positive")));
        }
        let current = self.spot_rate(direction, fee)?;
        if target_spe <= current {
            return Ok(0.0);
        }
        let ratio = target_spe / current;
        let o = self.oriented(direction);
        if fee == 0.0 {
            return Ok(eq3_amount_in(o.reserve_in, ratio, o.weight_in, o.weight_out));
        }
        if (o.weight_in - o.weight_out).abs() < 1e-15 {
            // (1-f) d^2 + R(2-f) d + R^2 (1 - ratio) = 0, positive root written
            // in the cancellation-free form 2c / (-b - sqrt(b^2 - 4ac)).
            let a = 1.0 - fee;
            let b = o.reserve_in * (2.0 - fee);
            let c = o.reserve_in * o.reserve_in * (1.0 - ratio);
            let disc = (b * b - 4.0 * a * c).sqrt();
            return Ok(-2.0 * c / (b + disc));
        }
        let post_ratio = |d: f64| -> f64 {
            match self.swap_given_in(direction, d, fee) {
                Ok(r) => r.spe_after / current,
                Err(_) => f64::INFINITY,
            }
        };
        let mut lo = 0.0;
        let mut hi = eq3_amount_in(o.reserve_in, ratio, o.weight_in, o.weight_out).max(f64::MIN_POSITIVE);
        while post_ratio(hi) < ratio {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if post_ratio(mid) < ratio {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Applies a swap computed against this exact pool state.
    pub fn apply_swap(&self, result: &SwapResult) -> Result<Pool, AmmError> {
        if result.reserves_before != (self.reserve_a, self.reserve_b) {
            return Err(AmmError::StaleResult);
        }
        let mut next = *self;
        next.shift(result.direction, result.amount_in, result.amount_out);
        Ok(next)
    }

    /// Constant-product value `reserve_a * reserve_b`.
    pub fn product(&self) -> f64 {
        self.reserve_a * self.reserve_b
    }

    /// Burns LPTokens from the outstanding supply.
    pub fn burn_lptokens(&mut self, amount: f64) {
        self.lptokens_outstanding = (self.lptokens_outstanding - amount).max(0.0);
    }
}

/// Eq. 3 closed form. `ratio` is the requested SPE'/SPE.
pub fn eq3_amount_in(reserve_in: f64, ratio: f64, weight_in: f64, weight_out: f64) -> f64 {
    let exponent = weight_out / (weight_out + weight_in);
    reserve_in * (exponent * ratio.ln()).exp_m1()
}

/// LPTokens issued for the first deposit: the weighted geometric mean of the
/// reserves at equal weights.
pub fn initial_lptokens(reserve_a: f64, reserve_b: f64) -> Result<f64, AmmError> {
    if !(reserve_a > 0.0 && reserve_b > 0.0) {
        return Err(AmmError::Domain("initial reserves must be positive".into()));
    }
    Ok(reserve_a.sqrt() * reserve_b.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_pool() -> Pool {
        Pool::new(50_000.0, 49_850_000.0, 0.003).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn spot_rate_examples() {
        let pool = paper_pool();
        assert!(rel(pool.spot_exchange_rate(None).unwrap(), 1000.0) < 1e-12);
        assert!(rel(pool.spot_exchange_rate(Some(0.0)).unwrap(), 997.0) < 1e-12);
        let sym = Pool::new(100.0, 100.0, 0.0).unwrap();
        assert_eq!(sym.spot_exchange_rate(None).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_pool_is_rejected() {
        let mut pool = paper_pool();
        pool.reserve_a = 0.0;
        assert_eq!(pool.spot_exchange_rate(None), Err(AmmError::DegeneratePool));
    }

    #[test]
    fn swap_given_in_matches_oracle() {
        // mpmath, 50 digits.
        let r = paper_pool().swap_given_in(Direction::BuyA, 1000.0, 0.003).unwrap();
        assert!(rel(r.amount_out, 0.999_980_000_399_992) < 1e-12);
        assert!(rel(r.effective_price, 1000.0 / 0.999_980_000_399_992) < 1e-12);
        assert!(rel(r.fee_paid, 3.0) < 1e-12);
    }

    #[test]
    fn zero_amounts_are_identity() {
        let pool = paper_pool();
        let r = pool.swap_given_in(Direction::BuyA, 0.0, 0.003).unwrap();
        assert_eq!(r.amount_out, 0.0);
        assert_eq!(pool.apply_swap(&r).unwrap(), pool);
        let r = pool.swap_given_out(Direction::BuyA, 0.0, 0.003).unwrap();
        assert_eq!(r.amount_in, 0.0);
    }

    #[test]
    fn negative_input_is_domain_error() {
        assert!(matches!(
            paper_pool().swap_given_in(Direction::BuyA, -1.0, 0.003),
            Err(AmmError::Domain(_))
        ));
    }

    #[test]
    fn swap_given_out_inverts_given_in() {
        let pool = paper_pool();
        let out = pool.swap_given_in(Direction::BuyA, 1000.0, 0.003).unwrap().amount_out;
        let back = pool.swap_given_out(Direction::BuyA, out, 0.003).unwrap();
        assert!(rel(back.amount_in, 1000.0) < 1e-9);
    }

    #[test]
    fn swap_given_out_rejects_draining() {
        let pool = paper_pool();
        assert!(matches!(
            pool.swap_given_out(Direction::BuyA, 50_000.0, 0.003),
            Err(AmmError::InsufficientLiquidity { .. })
        ));
    }

    #[test]
    fn target_rate_examples() {
        let pool = paper_pool();
        assert_eq!(pool.amount_in_for_target_rate(Direction::BuyA, 1000.0, 0.003).unwrap(), 0.0);
        assert_eq!(pool.amount_in_for_target_rate(Direction::BuyA, 900.0, 0.003).unwrap(), 0.0);
        // Eq. 3 closed form at ratio 1.05 (mpmath): 1,231,049.5683086.
        let closed = eq3_amount_in(pool.reserve_b, 1.05, 0.5, 0.5);
        assert!(rel(closed, 1_231_049.568_308_598) < 1e-12);
        // Fee-retaining root, cross-checked by 300-step bisection in mpmath.
        let d = pool.amount_in_for_target_rate(Direction::BuyA, 1050.0, 0.003).unwrap();
        assert!(rel(d, 1_232_898.950_211_003) < 1e-10);
        let after = pool.apply_swap(&pool.swap_given_in(Direction::BuyA, d, 0.003).unwrap()).unwrap();
        assert!(rel(after.spot_exchange_rate(None).unwrap(), 1050.0) < 1e-9);
    }

    #[test]
    fn target_rate_zero_fee_is_eq3() {
        let pool = Pool::new(50_000.0, 50_000_000.0, 0.0).unwrap();
        let d = pool.amount_in_for_target_rate(Direction::BuyA, 1050.0, 0.0).unwrap();
        assert_eq!(d, eq3_amount_in(pool.reserve_b, 1.05, 0.5, 0.5));
    }

    #[test]
    fn target_rate_unequal_weights_bisects() {
        let pool = Pool::with_weights(1_000.0, 4_000.0, 0.2, 0.8, 0.005, 1.0).unwrap();
        let spe = pool.spot_rate(Direction::BuyA, 0.005).unwrap();
        let d = pool.amount_in_for_target_rate(Direction::BuyA, spe * 1.2, 0.005).unwrap();
        let after = pool.apply_swap(&pool.swap_given_in(Direction::BuyA, d, 0.005).unwrap()).unwrap();
        assert!(rel(after.spot_rate(Direction::BuyA, 0.005).unwrap(), spe * 1.2) < 1e-9);
    }

    #[test]
    fn sell_direction_mirrors_roles() {
        let pool = paper_pool();
        let r = pool.swap_given_in(Direction::SellA, 1.0, 0.003).unwrap();
        // Reserve ratio 997 USDC/ETH less the 0.3% fee and curve; mpmath value.
        assert!((r.amount_out - 993.989_179_855_754).abs() < 1e-9);
        let after = pool.apply_swap(&r).unwrap();
        assert!(after.spot_exchange_rate(None).unwrap() < 1000.0);
    }

    #[test]
    fn apply_swap_detects_stale_result() {
        let pool = paper_pool();
        let a = pool.swap_given_in(Direction::BuyA, 10_000.0, 0.003).unwrap();
        let b = pool.swap_given_in(Direction::BuyA, 5_000.0, 0.003).unwrap();
        let next = pool.apply_swap(&a).unwrap();
        assert_eq!(next.apply_swap(&b), Err(AmmError::StaleResult));
    }

    #[test]
    fn initial_lptokens_examples() {
        assert!(rel(initial_lptokens(50_000.0, 49_850_000.0).unwrap(), 1_578_765.340_384_694) < 1e-12);
        assert_eq!(initial_lptokens(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(initial_lptokens(4.0, 9.0).unwrap(), 6.0);
        assert!(initial_lptokens(0.0, 1.0).is_err());
    }

    #[test]
    fn pool_rejects_fee_above_one_percent() {
        assert!(Pool::new(1.0, 1.0, 0.011).is_err());
        assert!(Pool::new(1.0, 1.0, 0.01).is_ok());
    }
}
