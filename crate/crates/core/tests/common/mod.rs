#![allow(dead_code)]

use dghomog::{Grid, Panel, SupportSpec};
use proptest::prelude::*;
use rand::Rng;

/// Panel with every cell drawn uniformly from the support.
pub fn random_panel<R: Rng>(rng: &mut R, n: usize, t: usize, s: u32, a: u32) -> Panel {
    let states = (0..n * t).map(|_| rng.random_range(1..=s)).collect();
    let actions = (0..n * t).map(|_| rng.random_range(1..=a)).collect();
    Panel::new(
        Grid::new(n, t, states).unwrap(),
        Grid::new(n, t, actions).unwrap(),
        SupportSpec::new(s, a).unwrap(),
    )
    .unwrap()
}

pub fn panel_strategy(
    max_markets: usize,
    max_periods: usize,
    max_states: u32,
    max_actions: u32,
) -> impl Strategy<Value = Panel> {
    (1..=max_markets, 2..=max_periods, 1..=max_states, 1..=max_actions).prop_flat_map(
        |(n, t, s, a)| {
            (
                proptest::collection::vec(1..=s, n * t),
                proptest::collection::vec(1..=a, n * t),
            )
                .prop_map(move |(states, actions)| {
                    Panel::new(
                        Grid::new(n, t, states).unwrap(),
                        Grid::new(n, t, actions).unwrap(),
                        SupportSpec::new(s, a).unwrap(),
                    )
                    .unwrap()
                })
        },
    )
}

pub fn binary(states: &[&[u32]], actions: &[&[u32]]) -> Panel {
    let s: Vec<Vec<u32>> = states.iter().map(|r| r.to_vec()).collect();
    let a: Vec<Vec<u32>> = actions.iter().map(|r| r.to_vec()).collect();
    Panel::from_rows(&s, &a, SupportSpec::new(2, 2).unwrap()).unwrap()
}

/// Half the L1 distance between empirical frequencies and the uniform law on `m` outcomes.
pub fn tv_uniform(counts: &[u64], m: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    let u = 1.0 / m as f64;
    let seen: f64 = counts.iter().map(|&c| (c as f64 / total as f64 - u).abs()).sum();
    0.5 * (seen + (m - counts.len()) as f64 * u)
}

/// Direct transcription of the two sums, looping over markets, actions and
/// states and recounting everything from the raw cells.
pub fn reference_taus(p: &Panel) -> (f64, f64) {
    let (ns, na) = (p.support().state_count(), p.support().action_count());
    let cells = |i: usize| (0..p.periods()).map(move |t| (p.states().get(i, t), p.actions().get(i, t)));
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for s in 1..=ns {
        let pooled_visits = (0..p.markets()).flat_map(cells).filter(|c| c.0 == s).count() as f64;
        for a in 1..=na {
            let pooled_hits = (0..p.markets()).flat_map(cells).filter(|&c| c == (s, a)).count() as f64;
            if pooled_visits == 0.0 || pooled_hits == 0.0 {
                continue;
            }
            let sigma = pooled_hits / pooled_visits;
            for i in 0..p.markets() {
                let visits = cells(i).filter(|c| c.0 == s).count() as f64;
                if visits == 0.0 {
                    continue;
                }
                let sigma_i = cells(i).filter(|&c| c == (s, a)).count() as f64 / visits;
                t1 += (sigma_i - sigma).powi(2) * visits / sigma;
                if sigma_i > 0.0 {
                    t2 += 2.0 * sigma_i * (sigma_i / sigma).ln() * visits;
                }
            }
        }
    }
    (t1, t2)
}
