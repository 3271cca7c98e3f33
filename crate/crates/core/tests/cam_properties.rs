use ammsim::agents::AgentId;
use ammsim::amm::Pool;
use ammsim::cam::{
    min_slot_price, process_bid, refund_amount, schedule_price, AuctionSlot, SlotState, SLOT_DURATION_S,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn price_never_below_floor(b in 0.0f64..1e6, m in 0.0f64..1e4, t in 0.0f64..=1.0) {
        for state in [SlotState::Empty, SlotState::Occupied, SlotState::Tailing] {
            prop_assert!(schedule_price(state, b, m, t).unwrap() >= m);
        }
    }

    #[test]
    fn decay_is_monotone_after_first_interval(b in 0.0f64..1e6, m in 0.0f64..1e4, t1 in 0.0500001f64..1.0, t2 in 0.0500001f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let p_lo = schedule_price(SlotState::Occupied, b, m, lo).unwrap();
        let p_hi = schedule_price(SlotState::Occupied, b, m, hi).unwrap();
        prop_assert!(p_hi <= p_lo);
    }

    #[test]
    fn price_reaches_floor_at_expiry(b in 0.0f64..1e6, m in 0.0f64..1e4) {
        prop_assert_eq!(schedule_price(SlotState::Occupied, b, m, 1.0).unwrap(), m);
    }

    #[test]
    fn refund_plus_burn_is_the_bid(b in 1.0f64..1e5, t in 0.0f64..1.0, extra in 0.0f64..10.0) {
        let mut pool = Pool::with_weights(1e6, 1e9, 0.5, 0.5, 0.003, 1e7).unwrap();
        let supply = pool.lptokens_outstanding;
        let mut slot = AuctionSlot {
            state: SlotState::Occupied,
            holder: Some(AgentId(1)),
            purchase_price: b,
            acquired_at: 0.0,
            slot_duration: SLOT_DURATION_S,
        };
        slot.advance(t * SLOT_DURATION_S);
        let price = schedule_price(slot.state, b, min_slot_price(&pool), t).unwrap();
        let bid = price + extra;
        let out = process_bid(&mut slot, &mut pool, AgentId(2), bid, t * SLOT_DURATION_S).unwrap();
        prop_assert!((out.refund_to_previous + out.burned - bid).abs() <= 1e-9 * bid);
        prop_assert!(out.burned >= 0.0);
        prop_assert!((supply - pool.lptokens_outstanding - out.burned).abs() <= 1e-9 * supply);
        prop_assert!(out.refund_to_previous <= refund_amount(b, t).unwrap() + 1e-9);
    }
}
