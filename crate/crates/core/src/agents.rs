//! Exchange users, arbitrageurs and the two auction-slot bidding strategies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amm::{AmmError, Direction, Pool};
use crate::cam::{min_slot_price, slot_price, AuctionSlot, SlotState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Amm(#[from] AmmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    fn opposite(self) -> Self {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserOrder {
    pub side: Side,
    pub size_eth: f64,
}

/// The exchange-user population. Each decision either abstains or trades,
/// copying the previous trade's direction with `mimic_probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeUserState {
    pub last_action: Option<Side>,
    pub trade_probability: f64,
    pub mimic_probability: f64,
    pub order_min_eth: f64,
    pub order_max_eth: f64,
}

impl Default for ExchangeUserState {
    fn default() -> Self {
        Self { last_action: None, trade_probability: 0.8, mimic_probability: 0.6, order_min_eth: 0.01, order_max_eth: 2.0 }
    }
}

impl ExchangeUserState {
    pub fn new(trade_probability: f64, mimic_probability: f64, order_min_eth: f64, order_max_eth: f64) -> Result<Self, AgentError> {
        let probs_ok = (0.0..=1.0).contains(&trade_probability) && (0.0..=1.0).contains(&mimic_probability);
        if !probs_ok || !(order_min_eth > 0.0 && order_max_eth >= order_min_eth) {
            return Err(AgentError::Domain("invalid exchange-user parameters".into()));
        }
        Ok(Self { last_action: None, trade_probability, mimic_probability, order_min_eth, order_max_eth })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<UserOrder> {
        if rng.random::<f64>() >= self.trade_probability {
            return None;
        }
        let side = match self.last_action {
            None if rng.random_bool(0.5) => Side::Buy,
            None => Side::Sell,
            Some(prev) if rng.random::<f64>() < self.mimic_probability => prev,
            Some(prev) => prev.opposite(),
        };
        let size_eth = rng.random_range(self.order_min_eth..=self.order_max_eth);
        self.last_action = Some(side);
        Some(UserOrder { side, size_eth })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbParams {
    pub safe_profit_margin: f64,
    pub max_slippage: f64,
    /// Network fee per transaction, USDC.
    pub network_fee: f64,
}

/// A trade that closes the gap between the pool and the external market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbPlan {
    pub direction: Direction,
    pub amount_in: f64,
    pub expected_out: f64,
    /// Spot price in the trade's own frame at decision time.
    pub quoted_spe: f64,
    pub fee: f64,
    pub profit_usdc: f64,
    pub profit_percent: f64,
}

/// USDC value of the input and output legs of a swap at external price `ext`.
pub fn usdc_legs(direction: Direction, amount_in: f64, amount_out: f64, ext: f64) -> (f64, f64) {
    match direction {
        Direction::BuyA => (amount_in, amount_out * ext),
        Direction::SellA => (amount_in * ext, amount_out),
    }
}

/// Looks for a trade that moves the pool price (at `fee`) onto `ext_price`
/// and keeps it iff its profit percentage beats the safe margin.
pub fn find_arbitrage(pool: &Pool, fee: f64, ext_price: f64, params: &ArbParams) -> Result<Option<ArbPlan>, AgentError> {
    if !(ext_price > 0.0 && ext_price.is_finite()) {
        return Err(AgentError::Domain(format!("external price {ext_price} must be positive")));
    }
    let buy_spe = pool.spot_rate(Direction::BuyA, fee)?;
    let (direction, target) = if buy_spe < ext_price {
        (Direction::BuyA, ext_price)
    } else {
        (Direction::SellA, 1.0 / ext_price)
    };
    let quoted_spe = pool.spot_rate(direction, fee)?;
    if quoted_spe >= target {
        return Ok(None);
    }
    let amount_in = pool.amount_in_for_target_rate(direction, target, fee)?;
    if amount_in <= 0.0 {
        return Ok(None);
    }
    let swap = pool.swap_given_in(direction, amount_in, fee)?;
    let (value_in, value_out) = usdc_legs(direction, amount_in, swap.amount_out, ext_price);
    let profit_usdc = value_out - value_in - params.network_fee;
    let profit_percent = profit_usdc / value_in;
    if profit_percent > params.safe_profit_margin {
        Ok(Some(ArbPlan { direction, amount_in, expected_out: swap.amount_out, quoted_spe, fee, profit_usdc, profit_percent }))
    } else {
        Ok(None)
    }
}

/// USDC value of one LPToken: `(SPE * reserve_a + reserve_b) / LPTokens`.
pub fn lptoken_relative_price(pool: &Pool) -> Result<f64, AgentError> {
    if !(pool.lptokens_outstanding > 0.0) {
        return Err(AgentError::Domain("no LPTokens outstanding".into()));
    }
    let spe = pool.spot_exchange_rate(None)?;
    Ok((spe * pool.reserve_a + pool.reserve_b) / pool.lptokens_outstanding)
}

/// Exponentially smoothed average with the newest value weighted heaviest:
/// weights `(1 - alpha)^(n - 1 - i)`.
pub fn strategy_a_bid_limit(daily_profits: &[f64], alpha: f64) -> Result<f64, AgentError> {
    if daily_profits.is_empty() {
        return Err(AgentError::Domain("empty profit history".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AgentError::Domain(format!("smoothing constant {alpha} outside (0, 1]")));
    }
    let n = daily_profits.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, x) in daily_profits.iter().enumerate() {
        let w = (1.0 - alpha).powi((n - 1 - i) as i32);
        num += w * x;
        den += w;
    }
    Ok(num / den)
}

const TREND_CLAMP: (f64, f64) = (0.5, 2.0);

/// Strategy A's bid cap `P` (USDC) and the profit history it is fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidLimit {
    pub p_usdc: f64,
    pub history: Vec<f64>,
    pub alpha: f64,
}

impl BidLimit {
    pub fn from_history(daily_profits: Vec<f64>, alpha: f64) -> Result<Self, AgentError> {
        let p_usdc = strategy_a_bid_limit(&daily_profits, alpha)?;
        Ok(Self { p_usdc, history: daily_profits, alpha })
    }

    /// Daily trend update: scale `P` by the latest profit over the smoothed
    /// average, clamped to [0.5, 2].
    pub fn end_of_day(&mut self, realized_profit: f64) {
        let smoothed = strategy_a_bid_limit(&self.history, self.alpha).unwrap_or(self.p_usdc);
        let ratio = if smoothed > 0.0 { realized_profit / smoothed } else { 1.0 };
        self.p_usdc *= ratio.clamp(TREND_CLAMP.0, TREND_CLAMP.1);
        self.history.push(realized_profit);
    }
}

/// Strategy A: keep outbidding at the schedule price while it stays within
/// the cap `P`, and stop for good once the floor price exceeds `P`.
pub fn strategy_a_step(limit: &BidLimit, slot: &AuctionSlot, pool: &Pool, bidder: AgentId, now: f64) -> Result<Option<f64>, AgentError> {
    if slot.holds(bidder) {
        return Ok(None);
    }
    let cap_lp = limit.p_usdc / lptoken_relative_price(pool)?;
    if min_slot_price(pool) > cap_lp {
        return Ok(None);
    }
    let t = slot.elapsed_fraction(now);
    let price = slot_price(slot, pool, t).map_err(|e| AgentError::Domain(e.to_string()))?;
    Ok((price <= cap_lp).then_some(price.min(cap_lp)))
}

/// Strategy B: take an empty slot at the floor price and never outbid.
pub fn strategy_b_step(slot: &AuctionSlot, pool: &Pool) -> Option<f64> {
    (slot.state == SlotState::Empty).then(|| min_slot_price(pool))
}
