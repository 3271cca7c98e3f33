//! One repetition of one AMM variant against the shared reference market.
//!
//! The clock ticks in whole seconds. Exchange users act on a fixed cadence
//! from a pre-generated order stream shared by every variant. The
//! arbitrage desk checks the committed pool state every
//! `arb_check_interval_s` seconds and submits through one of its
//! identities; everything waits in the mempool for the next block.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    find_arbitrage, lptoken_relative_price, strategy_a_step, strategy_b_step, usdc_legs, AgentError, AgentId,
    ArbParams, BidLimit, ExchangeUserState, Side, UserOrder,
};
use crate::amm::{AmmError, Direction, Pool};
use crate::cam::AuctionSlot;
use crate::chain::{execute_block, ExecutionRecord, Mempool, Outcome, PendingTransaction, TxKind};
use crate::market::{MarketError, PricePath, SECONDS_PER_DAY};
use crate::metrics::{deviation, divergence_loss, MetricsError, RunMetrics};
use crate::scenario::{AmmVariant, ScenarioConfig, VariantConfig};

pub const USERS: AgentId = AgentId(0);

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invariant violated at t={time_s}s: {what}")]
    Invariant { time_s: u64, what: String },
    #[error("strategy-A variant needs a bid limit")]
    MissingBidLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidEvent {
    pub time_s: u64,
    pub agent: AgentId,
    pub amount: f64,
    pub won: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub records: Vec<ExecutionRecord>,
    pub bids: Vec<BidEvent>,
}

pub fn duration_s(cfg: &ScenarioConfig) -> u64 {
    u64::from(cfg.gbm.days) * SECONDS_PER_DAY as u64
}

pub fn initial_pool(cfg: &ScenarioConfig) -> Result<Pool, AmmError> {
    Pool::new(cfg.pool.reserve_a, cfg.pool.reserve_b, cfg.pool.trading_fee)
}

/// Exchange-user orders keyed by submission second, one decision every
/// `user_interval_s`.
pub fn user_orders(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<(u64, UserOrder)>, AgentError> {
    let a = &cfg.agents;
    let mut state = ExchangeUserState::new(a.user_trade_probability, a.user_mimic_probability, a.order_min_eth, a.order_max_eth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = duration_s(cfg);
    Ok((1..=end / a.user_interval_s)
        .map(|k| k * a.user_interval_s)
        .filter_map(|t| state.step(&mut rng).map(|o| (t, o)))
        .collect())
}

/// Daily arbitrage profit over a history path at zero trading fee, on a
/// fresh pool priced at the first history point. Trades settle instantly.
pub fn history_daily_profits(cfg: &ScenarioConfig, history: &PricePath, network_fee: f64) -> Result<Vec<f64>, SimError> {
    let p0 = history.points.first().map(|p| p.price).unwrap_or(cfg.gbm.s0);
    let mut pool = Pool::new(cfg.pool.reserve_a, cfg.pool.reserve_a * p0, 0.0)?;
    let params = ArbParams { safe_profit_margin: cfg.agents.safe_profit_margin, max_slippage: cfg.agents.max_slippage, network_fee };
    let per_day = cfg.gbm.points_per_day as usize;
    let mut days = vec![0.0; cfg.gbm.history_days as usize];
    for (k, point) in history.points.iter().enumerate().skip(1) {
        if let Some(plan) = find_arbitrage(&pool, 0.0, point.price, &params)? {
            let res = pool.swap_given_in(plan.direction, plan.amount_in, 0.0)?;
            pool = pool.apply_swap(&res)?;
            let (vin, vout) = usdc_legs(plan.direction, res.amount_in, res.amount_out, point.price);
            let day = ((k - 1) / per_day).min(days.len() - 1);
            days[day] += vout - vin - network_fee;
        }
    }
    Ok(days)
}

pub fn bid_limit(cfg: &ScenarioConfig, history: &PricePath, network_fee: f64) -> Result<BidLimit, SimError> {
    Ok(BidLimit::from_history(history_daily_profits(cfg, history, network_fee)?, cfg.agents.smoothing_alpha)?)
}

pub struct SimInputs<'a> {
    pub config: &'a ScenarioConfig,
    pub variant: &'a VariantConfig,
    pub path: &'a PricePath,
    pub orders: &'a [(u64, UserOrder)],
    pub bid_limit: Option<&'a BidLimit>,
    pub shuffle_seed: u64,
    pub keep_records: bool,
}

/// Identity rotation of the arbitrage desk. Swaps go out under the slot
/// holder's identity when the desk holds the slot; bids always come from
/// an identity that does not hold it.
struct Desk {
    n: u32,
    next: u32,
}

impl Desk {
    fn id(k: u32) -> AgentId {
        AgentId(k + 1)
    }

    fn owns(&self, agent: AgentId) -> bool {
        agent.0 >= 1 && agent.0 <= self.n
    }

    fn rotate(&mut self, avoid: Option<AgentId>) -> AgentId {
        for _ in 0..self.n {
            let id = Self::id(self.next);
            self.next = (self.next + 1) % self.n;
            if Some(id) != avoid {
                return id;
            }
        }
        Self::id(self.next)
    }
}

#[derive(Default)]
struct Ledger {
    lp_balance: f64,
    lp_sale_proceeds: f64,
    day_profit: f64,
    bid_pending: bool,
}

fn invariant(time_s: u64, what: impl Into<String>) -> SimError {
    SimError::Invariant { time_s, what: what.into() }
}

pub fn simulate(inputs: &SimInputs<'_>) -> Result<RunOutput, SimError> {
    let cfg = inputs.config;
    let variant = inputs.variant;
    let path = inputs.path;
    let amm = variant.amm;
    let fee = cfg.pool.trading_fee;
    let max_slip = cfg.agents.max_slippage;
    let params = ArbParams { safe_profit_margin: cfg.agents.safe_profit_margin, max_slippage: max_slip, network_fee: variant.network_fee };

    let mut pool = initial_pool(cfg)?;
    let start = pool;
    let mut slot = amm.has_auction().then(AuctionSlot::empty);
    let mut limit = match amm {
        AmmVariant::XrplCamA => Some(inputs.bid_limit.ok_or(SimError::MissingBidLimit)?.clone()),
        _ => None,
    };
    let mut mempool = Mempool::new(variant.block_interval_s);
    let mut rng = ChaCha8Rng::seed_from_u64(inputs.shuffle_seed);
    let mut desk = Desk { n: cfg.agents.arbitrageurs, next: 0 };
    let mut ledger = Ledger::default();
    let mut out = RunOutput::default();
    let m = &mut out.metrics;

    let end = duration_s(cfg);
    let block_s = variant.block_interval_s;
    let check_s = cfg.agents.arb_check_interval_s;
    let sample_s = cfg.sample_interval_s;
    let mut next_order = 0usize;
    let mut submitted = 0u64;
    let mut executed = 0u64;
    let mut block = 0u64;

    for t in 1..=end {
        let now = t as f64;
        let ext = path.price_at(now)?;

        while next_order < inputs.orders.len() && inputs.orders[next_order].0 <= t {
            let order = inputs.orders[next_order].1;
            next_order += 1;
            let (kind, dir) = match order.side {
                Side::Buy => (TxKind::SwapOut(Direction::BuyA), Direction::BuyA),
                Side::Sell => (TxKind::SwapIn(Direction::SellA), Direction::SellA),
            };
            mempool.submit(PendingTransaction {
                id: 0,
                agent: USERS,
                kind,
                amount: order.size_eth,
                quoted_spe: pool.spot_rate(dir, fee)?,
                max_slippage: max_slip,
                wants_discount: false,
                submitted_at: t,
                executes_at: 0,
            });
            submitted += 1;
        }

        if t % check_s == 0 {
            let mut view = slot;
            if let Some(s) = view.as_mut() {
                s.advance(now);
            }
            let holder = view.and_then(|s| s.holder).filter(|h| desk.owns(*h));

            if let Some(s) = view.as_ref().filter(|_| !ledger.bid_pending) {
                let bidder = desk.rotate(holder);
                let bid = match amm {
                    AmmVariant::XrplCamA => strategy_a_step(limit.as_ref().expect("strategy A has a limit"), s, &pool, bidder, now)?,
                    _ if holder.is_none() => strategy_b_step(s, &pool),
                    _ => None,
                };
                if let Some(amount) = bid {
                    mempool.submit(PendingTransaction {
                        id: 0,
                        agent: bidder,
                        kind: TxKind::Bid,
                        amount,
                        quoted_spe: amount,
                        max_slippage: 0.0,
                        wants_discount: false,
                        submitted_at: t,
                        executes_at: 0,
                    });
                    submitted += 1;
                    ledger.bid_pending = true;
                    m.bids_submitted += 1;
                }
            }

            let swap_fee = if holder.is_some() { 0.0 } else { fee };
            if let Some(plan) = find_arbitrage(&pool, swap_fee, ext, &params)? {
                let agent = holder.unwrap_or_else(|| desk.rotate(None));
                mempool.submit(PendingTransaction {
                    id: 0,
                    agent,
                    kind: TxKind::SwapIn(plan.direction),
                    amount: plan.amount_in,
                    quoted_spe: plan.quoted_spe,
                    max_slippage: max_slip,
                    wants_discount: holder.is_some(),
                    submitted_at: t,
                    executes_at: 0,
                });
                submitted += 1;
            }
        }

        if t % block_s == 0 {
            block += 1;
            let lp_price = lptoken_relative_price(&pool)?;
            let records = execute_block(&mut mempool, &mut pool, slot.as_mut(), &mut rng, t, block, variant.network_fee);
            executed += records.len() as u64;
            for rec in &records {
                let is_arb = desk.owns(rec.tx.agent);
                match rec.outcome {
                    Outcome::Swapped { amount_in, amount_out, fee_paid, fee_rate, spe_before, spe_after } => {
                        let dir = match rec.tx.kind {
                            TxKind::SwapIn(d) | TxKind::SwapOut(d) => d,
                            TxKind::Bid => unreachable!("bids never swap"),
                        };
                        let slip = rec.slippage.unwrap_or(0.0);
                        if slip > rec.tx.max_slippage + 1e-12 {
                            return Err(invariant(t, format!("realized slippage {slip} above tolerance")));
                        }
                        let (vin, vout) = usdc_legs(dir, amount_in, amount_out, ext);
                        m.trading_volume_usdc += vin;
                        m.lp_returns.trading_fees_usdc += match dir {
                            Direction::BuyA => fee_paid,
                            Direction::SellA => fee_paid * ext,
                        };
                        if is_arb {
                            m.arb_realized += 1;
                            m.arb_discounted += u64::from(fee_rate == 0.0);
                            m.arb_volume_usdc += vin;
                            m.arb_gross_profit_usdc += vout - vin;
                            m.arb_network_fees_usdc += rec.network_fee_paid;
                            ledger.day_profit += vout - vin - rec.network_fee_paid;
                            m.slippage_samples.push(slip);
                            m.price_impact_samples.push(spe_after / spe_before - 1.0);
                        } else {
                            m.user_realized += 1;
                        }
                    }
                    Outcome::BidWon(bid) => {
                        ledger.bid_pending = false;
                        m.bids_won += 1;
                        m.arb_network_fees_usdc += rec.network_fee_paid;
                        ledger.day_profit -= rec.network_fee_paid;
                        let shortfall = (bid.price_paid - ledger.lp_balance).max(0.0);
                        ledger.lp_sale_proceeds += shortfall * lp_price;
                        ledger.lp_balance += shortfall - bid.price_paid + bid.refund_to_previous;
                        let cost = bid.burned * lp_price;
                        m.arb_bid_cost_usdc += cost;
                        m.lp_returns.cam_bids_usdc += cost;
                        out.bids.push(BidEvent { time_s: t, agent: rec.tx.agent, amount: bid.price_paid, won: true });
                    }
                    Outcome::BidTooLow { .. } | Outcome::NoAuction => {
                        ledger.bid_pending = false;
                        out.bids.push(BidEvent { time_s: t, agent: rec.tx.agent, amount: rec.tx.amount, won: false });
                    }
                    Outcome::SlippageExceeded | Outcome::InsufficientLiquidity => {
                        if is_arb {
                            m.arb_unrealized += 1;
                        } else {
                            m.user_unrealized += 1;
                        }
                    }
                }
            }
            if !(pool.reserve_a > 0.0 && pool.reserve_b > 0.0 && pool.lptokens_outstanding > 0.0) {
                return Err(invariant(t, "pool reserves or LPToken supply left the positive orthant"));
            }
            if inputs.keep_records {
                out.records.extend(records);
            }
        }

        if t % SECONDS_PER_DAY as u64 == 0 {
            if let Some(l) = limit.as_mut() {
                l.end_of_day(ledger.day_profit);
            }
            ledger.day_profit = 0.0;
        }

        if t % sample_s == 0 {
            m.deviation_series.push((now, deviation(pool.spot_exchange_rate(None)?, ext)?));
        }
    }

    if executed + mempool.len() as u64 != submitted {
        return Err(invariant(end, format!("{submitted} submitted, {executed} executed, {} pending", mempool.len())));
    }

    let ext_end = path.price_at(end as f64)?;
    let pool_value = pool.reserve_a * ext_end + pool.reserve_b;
    let cohort_share = (pool.lptokens_outstanding - ledger.lp_balance) / pool.lptokens_outstanding;
    let cohort_value = pool_value * cohort_share + ledger.lp_sale_proceeds;
    let hold_value = start.reserve_a * ext_end + start.reserve_b;
    m.divergence_loss = divergence_loss(cohort_value, hold_value)?;
    m.final_pool_price = pool.spot_exchange_rate(None)?;
    m.final_reference_price = ext_end;
    Ok(out)
}
