mod common;

use dghomog::stats::{ccp_market, ccp_pooled};
use dghomog::{tau1, tau2, Grid, Panel};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn matches_reference(p in common::panel_strategy(6, 8, 4, 4)) {
        let (r1, r2) = common::reference_taus(&p);
        prop_assert!(close(tau1(&p), r1), "{} vs {}", tau1(&p), r1);
        prop_assert!(close(tau2(&p), r2), "{} vs {}", tau2(&p), r2);
    }

    #[test]
    fn nonnegative(p in common::panel_strategy(6, 8, 4, 4)) {
        prop_assert!(tau1(&p) >= 0.0);
        prop_assert!(tau2(&p) >= -1e-9);
    }

    #[test]
    fn identical_markets_give_zero(p in common::panel_strategy(1, 8, 4, 4), copies in 1usize..5) {
        let rows = |g: &Grid| -> Vec<Vec<u32>> { (0..copies).map(|_| g.row(0).to_vec()).collect() };
        let q = Panel::from_rows(&rows(p.states()), &rows(p.actions()), p.support()).unwrap();
        prop_assert!(tau1(&q).abs() < 1e-12);
        prop_assert!(tau2(&q).abs() < 1e-12);
    }

    #[test]
    fn market_order_does_not_matter(p in common::panel_strategy(6, 6, 3, 3)) {
        let rev = |g: &Grid| -> Vec<Vec<u32>> { (0..g.markets()).rev().map(|i| g.row(i).to_vec()).collect() };
        let q = Panel::from_rows(&rev(p.states()), &rev(p.actions()), p.support()).unwrap();
        prop_assert!(close(tau1(&p), tau1(&q)));
        prop_assert!(close(tau2(&p), tau2(&q)));
    }

    #[test]
    fn relabeling_states_and_actions(p in common::panel_strategy(5, 6, 3, 3)) {
        let (ns, na) = (p.support().state_count(), p.support().action_count());
        let flip = |g: &Grid, k: u32| -> Vec<Vec<u32>> {
            g.rows().map(|r| r.iter().map(|&v| k + 1 - v).collect()).collect()
        };
        let q = Panel::from_rows(&flip(p.states(), ns), &flip(p.actions(), na), p.support()).unwrap();
        prop_assert!(close(tau1(&p), tau1(&q)));
        prop_assert!(close(tau2(&p), tau2(&q)));
    }

    #[test]
    fn pooled_ccps_are_distributions(p in common::panel_strategy(5, 6, 3, 3)) {
        let pooled = ccp_pooled(&p);
        for s in 1..=p.support().state_count() {
            let total: f64 = (1..=p.support().action_count()).map(|a| pooled.prob(a, s)).sum();
            if pooled.visits(s) > 0 {
                prop_assert!((total - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(total, 0.0);
            }
            let market_visits: u64 = (0..p.markets()).map(|i| ccp_market(&p, i).unwrap().visits(s)).sum();
            prop_assert_eq!(market_visits, pooled.visits(s));
        }
    }
}
