//! Block-based ledger: a mempool that releases transactions at block
//! boundaries in random order, with per-transaction slippage protection.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentId;
use crate::amm::{Direction, Pool};
use crate::cam::{process_bid, AuctionSlot, BidOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub block_interval_s: u64,
    /// Per-transaction fee, USDC.
    pub network_fee: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    /// Fixed input amount.
    SwapIn(Direction),
    /// Fixed output amount.
    SwapOut(Direction),
    /// Auction-slot bid, amount in LPTokens.
    Bid,
}

impl TxKind {
    pub fn label(&self) -> &'static str {
        match self {
            TxKind::SwapIn(Direction::BuyA) => "swap_in_buy",
            TxKind::SwapIn(Direction::SellA) => "swap_in_sell",
            TxKind::SwapOut(Direction::BuyA) => "swap_out_buy",
            TxKind::SwapOut(Direction::SellA) => "swap_out_sell",
            TxKind::Bid => "bid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingTransaction {
    pub id: u64,
    pub agent: AgentId,
    pub kind: TxKind,
    pub amount: f64,
    /// Spot price (trade frame) the sender saw; slippage is measured against it.
    pub quoted_spe: f64,
    pub max_slippage: f64,
    /// Ask for the zero fee; granted only if the sender holds the slot when
    /// the transaction executes.
    pub wants_discount: bool,
    pub submitted_at: u64,
    pub executes_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Swapped {
        amount_in: f64,
        amount_out: f64,
        fee_paid: f64,
        fee_rate: f64,
        spe_before: f64,
        spe_after: f64,
    },
    BidWon(BidOutcome),
    SlippageExceeded,
    InsufficientLiquidity,
    BidTooLow { price: f64 },
    NoAuction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub block: u64,
    pub time_s: u64,
    pub tx: PendingTransaction,
    pub outcome: Outcome,
    pub slippage: Option<f64>,
    pub network_fee_paid: f64,
}

impl ExecutionRecord {
    pub fn realized(&self) -> bool {
        matches!(self.outcome, Outcome::Swapped { .. } | Outcome::BidWon(_))
    }

    /// Zero trading fee was applied to this swap.
    pub fn discounted(&self) -> bool {
        matches!(self.outcome, Outcome::Swapped { fee_rate, .. } if fee_rate == 0.0)
    }
}

/// First block boundary at or after `t`. A submission exactly on a boundary
/// makes that block.
pub fn next_boundary(t: u64, interval: u64) -> u64 {
    t.div_ceil(interval) * interval
}

/// Block boundaries in `(t0, t1]`.
pub fn blocks_between(t0: u64, t1: u64, interval: u64) -> Vec<u64> {
    if t1 <= t0 {
        return Vec::new();
    }
    let first = next_boundary(t0 + 1, interval);
    (first..=t1).step_by(interval as usize).collect()
}

#[derive(Debug, Clone, Default)]
pub struct Mempool {
    block_interval_s: u64,
    pending: Vec<PendingTransaction>,
    next_id: u64,
}

impl Mempool {
    pub fn new(block_interval_s: u64) -> Self {
        assert!(block_interval_s > 0, "block interval must be positive");
        Self { block_interval_s, pending: Vec::new(), next_id: 0 }
    }

    pub fn block_interval(&self) -> u64 {
        self.block_interval_s
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Queues a transaction for the next block; fills in `id` and
    /// `executes_at` and returns the id.
    pub fn submit(&mut self, mut tx: PendingTransaction) -> u64 {
        tx.id = self.next_id;
        self.next_id += 1;
        tx.executes_at = next_boundary(tx.submitted_at, self.block_interval_s);
        self.pending.push(tx);
        tx.id
    }

    /// Removes and returns everything due at or before `now`.
    pub fn drain_due(&mut self, now: u64) -> Vec<PendingTransaction> {
        let (due, rest): (Vec<_>, Vec<_>) = self.pending.drain(..).partition(|tx| tx.executes_at <= now);
        self.pending = rest;
        due
    }
}

/// Executes one block at `now`: the due transactions run in a uniformly
/// random order. A swap whose slippage exceeds its tolerance, or that the
/// pool cannot fill, leaves the state untouched. The network fee is charged
/// only for realized transactions.
pub fn execute_block<R: Rng + ?Sized>(
    mempool: &mut Mempool,
    pool: &mut Pool,
    mut slot: Option<&mut AuctionSlot>,
    rng: &mut R,
    now: u64,
    block: u64,
    network_fee: f64,
) -> Vec<ExecutionRecord> {
    let mut due = mempool.drain_due(now);
    due.shuffle(rng);
    if let Some(s) = slot.as_deref_mut() {
        s.advance(now as f64);
    }
    let mut records = Vec::with_capacity(due.len());
    for tx in due {
        let (outcome, slippage) = match tx.kind {
            TxKind::Bid => match slot.as_deref_mut() {
                None => (Outcome::NoAuction, None),
                Some(s) => match process_bid(s, pool, tx.agent, tx.amount, now as f64) {
                    Ok(out) => (Outcome::BidWon(out), None),
                    Err(crate::cam::CamError::BidTooLow { price, .. }) => (Outcome::BidTooLow { price }, None),
                    Err(_) => (Outcome::BidTooLow { price: f64::NAN }, None),
                },
            },
            TxKind::SwapIn(dir) | TxKind::SwapOut(dir) => {
                let holder = slot.as_deref().is_some_and(|s| s.holds(tx.agent));
                let fee = if tx.wants_discount && holder { 0.0 } else { pool.trading_fee };
                let quote = match tx.kind {
                    TxKind::SwapIn(_) => pool.swap_given_in(dir, tx.amount, fee),
                    _ => pool.swap_given_out(dir, tx.amount, fee),
                };
                match quote {
                    Err(_) => (Outcome::InsufficientLiquidity, None),
                    Ok(res) => {
                        let slip = res.effective_price / tx.quoted_spe - 1.0;
                        if slip > tx.max_slippage {
                            (Outcome::SlippageExceeded, Some(slip))
                        } else {
                            match pool.apply_swap(&res) {
                                Ok(next) => {
                                    *pool = next;
                                    let outcome = Outcome::Swapped {
                                        amount_in: res.amount_in,
                                        amount_out: res.amount_out,
                                        fee_paid: res.fee_paid,
                                        fee_rate: res.fee_rate,
                                        spe_before: res.spe_before,
                                        spe_after: res.spe_after,
                                    };
                                    (outcome, Some(slip))
                                }
                                Err(_) => (Outcome::InsufficientLiquidity, None),
                            }
                        }
                    }
                }
            }
        };
        let mut rec = ExecutionRecord { block, time_s: now, tx, outcome, slippage, network_fee_paid: 0.0 };
        if rec.realized() {
            rec.network_fee_paid = network_fee;
        }
        records.push(rec);
    }
    records
}

pub const RECORDS_HEADER: &str = "block,tx_id,agent,kind,realized,amount_in,amount_out,slippage,fee_paid_network";

pub fn records_csv(records: &[ExecutionRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let (amount_in, amount_out) = match r.outcome {
            Outcome::Swapped { amount_in, amount_out, .. } => (amount_in, amount_out),
            Outcome::BidWon(b) => (b.price_paid, 0.0),
            _ => (r.tx.amount, 0.0),
        };
        let slip = r.slippage.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.block,
            r.tx.id,
            r.tx.agent,
            r.tx.kind.label(),
            r.realized(),
            amount_in,
            amount_out,
            slip,
            r.network_fee_paid
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tx(agent: u32, kind: TxKind, amount: f64, quoted: f64, at: u64) -> PendingTransaction {
        PendingTransaction {
            id: 0,
            agent: AgentId(agent),
            kind,
            amount,
            quoted_spe: quoted,
            max_slippage: 0.04,
            wants_discount: false,
            submitted_at: at,
            executes_at: 0,
        }
    }

    fn pool() -> Pool {
        Pool::new(50_000.0, 49_850_000.0, 0.003).unwrap()
    }

    #[test]
    fn boundaries() {
        assert_eq!(blocks_between(0, 20, 4), vec![4, 8, 12, 16, 20]);
        assert_eq!(blocks_between(4, 20, 12), vec![12]);
        assert!(blocks_between(10, 11, 12).is_empty());
        assert!(blocks_between(5, 5, 1).is_empty());
        assert_eq!(next_boundary(12, 12), 12);
        assert_eq!(next_boundary(13, 12), 24);
    }

    #[test]
    fn submission_waits_for_boundary() {
        let mut mp = Mempool::new(12);
        mp.submit(tx(1, TxKind::SwapIn(Direction::BuyA), 100.0, 1000.0, 5));
        mp.submit(tx(1, TxKind::SwapIn(Direction::BuyA), 100.0, 1000.0, 12));
        assert!(mp.drain_due(11).is_empty());
        assert_eq!(mp.drain_due(12).len(), 2);
        assert!(mp.is_empty());
    }

    #[test]
    fn empty_block_is_a_no_op() {
        let mut p = pool();
        let before = p;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs = execute_block(&mut Mempool::new(4), &mut p, None, &mut rng, 4, 1, 4.0);
        assert!(recs.is_empty());
        assert_eq!(p, before);
    }

    #[test]
    fn slippage_breach_leaves_pool_unchanged() {
        let mut p = pool();
        let before = p;
        let mut mp = Mempool::new(4);
        // 20% of the USDC reserve moves the price far beyond 4%.
        mp.submit(tx(1, TxKind::SwapIn(Direction::BuyA), 10_000_000.0, 1000.0, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs = execute_block(&mut mp, &mut p, None, &mut rng, 4, 1, 4.0);
        assert_eq!(recs[0].outcome, Outcome::SlippageExceeded);
        assert_eq!(recs[0].network_fee_paid, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn every_due_transaction_gets_one_record() {
        let mut p = pool();
        let mut mp = Mempool::new(4);
        for i in 0..10 {
            mp.submit(tx(i, TxKind::SwapOut(Direction::BuyA), 1.0, 1000.0, 2));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let recs = execute_block(&mut mp, &mut p, None, &mut rng, 4, 1, 1.0);
        assert_eq!(recs.len(), 10);
        let mut ids: Vec<u64> = recs.iter().map(|r| r.tx.id).collect();
        ids.sort();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert!(recs.iter().all(|r| r.realized() && r.network_fee_paid == 1.0));
    }

    #[test]
    fn ordering_is_seeded() {
        let run = |seed| {
            let mut p = pool();
            let mut mp = Mempool::new(4);
            for i in 0..20 {
                mp.submit(tx(i, TxKind::SwapIn(Direction::SellA), 1.0, 0.000_997, 1));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            execute_block(&mut mp, &mut p, None, &mut rng, 4, 1, 0.0).iter().map(|r| r.tx.id).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn discount_requires_holding_the_slot() {
        let mut p = pool();
        let mut slot = AuctionSlot::empty();
        let mut mp = Mempool::new(4);
        let mut want = tx(1, TxKind::SwapIn(Direction::BuyA), 1000.0, 1000.0, 1);
        want.wants_discount = true;
        mp.submit(want);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs = execute_block(&mut mp, &mut p, Some(&mut slot), &mut rng, 4, 1, 0.0);
        assert!(!recs[0].discounted());

        let m = crate::cam::min_slot_price(&p);
        mp.submit(tx(1, TxKind::Bid, m, m, 5));
        let recs = execute_block(&mut mp, &mut p, Some(&mut slot), &mut rng, 8, 2, 0.0);
        assert!(matches!(recs[0].outcome, Outcome::BidWon(_)));
        want.submitted_at = 9;
        mp.submit(want);
        let recs = execute_block(&mut mp, &mut p, Some(&mut slot), &mut rng, 12, 3, 0.0);
        assert!(recs[0].discounted());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut p = pool();
        let mut mp = Mempool::new(4);
        mp.submit(tx(2, TxKind::SwapOut(Direction::BuyA), 1.0, 1000.0, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs = execute_block(&mut mp, &mut p, None, &mut rng, 4, 1, 4.0);
        let csv = records_csv(&recs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RECORDS_HEADER);
        assert!(lines[1].starts_with("1,0,2,swap_out_buy,true,"));
    }
}
