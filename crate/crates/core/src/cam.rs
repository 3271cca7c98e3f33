//! Continuous auction mechanism for the discounted-fee slot.
//!
//! A slot lasts 24 hours from the moment it is bought and is divided into
//! twenty intervals of 5% each. Prices are denominated in LPTokens; the
//! non-refunded part of every winning bid is burned from the pool's
//! outstanding supply.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentId;
use crate::amm::Pool;

pub const SLOT_DURATION_S: f64 = 86_400.0;
pub const INTERVALS: u32 = 20;
const INTERVAL_WIDTH: f64 = 0.05;
/// Elapsed fraction after which the holder is in the final interval.
pub const TAILING_FROM: f64 = 0.95;
const MIN_PRICE_DIVISOR: f64 = 25.0;
const OUTBID_PREMIUM: f64 = 1.05;
const DECAY_EXPONENT: i32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CamError {
    #[error("elapsed fraction {0} outside [0, 1]")]
    Domain(f64),
    #[error("bid {bid} below the schedule price {price}")]
    BidTooLow { bid: f64, price: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotState {
    Empty,
    Occupied,
    Tailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionSlot {
    pub state: SlotState,
    pub holder: Option<AgentId>,
    /// Price paid by the current holder (the B of the schedule).
    pub purchase_price: f64,
    pub acquired_at: f64,
    pub slot_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidOutcome {
    pub price_paid: f64,
    pub refund_to_previous: f64,
    pub burned: f64,
    pub previous_holder: Option<AgentId>,
}

impl Default for AuctionSlot {
    fn default() -> Self {
        Self::empty()
    }
}

impl AuctionSlot {
    pub fn empty() -> Self {
        Self {
            state: SlotState::Empty,
            holder: None,
            purchase_price: 0.0,
            acquired_at: 0.0,
            slot_duration: SLOT_DURATION_S,
        }
    }

    /// Fraction of the slot lifetime elapsed at `now`; zero for an empty slot.
    pub fn elapsed_fraction(&self, now: f64) -> f64 {
        if self.holder.is_none() {
            return 0.0;
        }
        ((now - self.acquired_at) / self.slot_duration).clamp(0.0, 1.0)
    }

    pub fn holds(&self, agent: AgentId) -> bool {
        self.holder == Some(agent)
    }

    /// Moves the slot through its lifecycle; time must be monotone.
    pub fn advance(&mut self, now: f64) {
        if self.holder.is_none() {
            self.state = SlotState::Empty;
            return;
        }
        let t = (now - self.acquired_at) / self.slot_duration;
        if t >= 1.0 {
            *self = AuctionSlot { slot_duration: self.slot_duration, ..AuctionSlot::empty() };
        } else if t > TAILING_FROM {
            self.state = SlotState::Tailing;
        } else {
            self.state = SlotState::Occupied;
        }
    }
}

/// Floor price `LPTokens * TFee / 25`.
pub fn min_slot_price(pool: &Pool) -> f64 {
    pool.lptokens_outstanding * pool.trading_fee / MIN_PRICE_DIVISOR
}

fn check_fraction(t: f64) -> Result<(), CamError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CamError::Domain(t));
    }
    Ok(())
}

/// Interval index 1..=20. A boundary at a multiple of 0.05 belongs to the
/// interval it closes, so interval 1 is [0, 0.05].
pub fn interval_of(t: f64) -> Result<u32, CamError> {
    check_fraction(t)?;
    let raw = (t / INTERVAL_WIDTH - 1e-9).ceil();
    Ok((raw.max(1.0) as u32).min(INTERVALS))
}

/// Schedule price at elapsed fraction `t` for a slot in `state`.
pub fn schedule_price(state: SlotState, purchase_price: f64, min_price: f64, t: f64) -> Result<f64, CamError> {
    check_fraction(t)?;
    Ok(match state {
        SlotState::Empty | SlotState::Tailing => min_price,
        SlotState::Occupied if interval_of(t)? == 1 => purchase_price * OUTBID_PREMIUM + min_price,
        SlotState::Occupied => purchase_price * OUTBID_PREMIUM * (1.0 - t.powi(DECAY_EXPONENT)) + min_price,
    })
}

/// Current price to take over `slot`, using the pool's floor price.
pub fn slot_price(slot: &AuctionSlot, pool: &Pool, t: f64) -> Result<f64, CamError> {
    schedule_price(slot.state, slot.purchase_price, min_slot_price(pool), t)
}

/// Pro-rata refund owed to an outbid holder: `B * (1 - t)`, nothing in the
/// final interval.
pub fn refund_amount(purchase_price: f64, t: f64) -> Result<f64, CamError> {
    check_fraction(t)?;
    if interval_of(t)? == INTERVALS {
        return Ok(0.0);
    }
    Ok(purchase_price * (1.0 - t))
}

/// Settles a bid. On success the previous holder is refunded, the remainder
/// is burned from the pool supply and the bidder takes the slot with a fresh
/// 24-hour clock. On failure nothing changes.
pub fn process_bid(
    slot: &mut AuctionSlot,
    pool: &mut Pool,
    bidder: AgentId,
    bid: f64,
    now: f64,
) -> Result<BidOutcome, CamError> {
    let mut current = *slot;
    current.advance(now);
    let t = current.elapsed_fraction(now);
    let price = slot_price(&current, pool, t)?;
    if !(bid >= price) {
        return Err(CamError::BidTooLow { bid, price });
    }
    let (refund, previous) = match current.holder {
        Some(prev) => (refund_amount(current.purchase_price, t)?.min(bid), Some(prev)),
        None => (0.0, None),
    };
    let burned = bid - refund;
    pool.burn_lptokens(burned);
    *slot = AuctionSlot {
        state: SlotState::Occupied,
        holder: Some(bidder),
        purchase_price: bid,
        acquired_at: now,
        slot_duration: current.slot_duration,
    };
    Ok(BidOutcome { price_paid: bid, refund_to_previous: refund, burned, previous_holder: previous })
}
