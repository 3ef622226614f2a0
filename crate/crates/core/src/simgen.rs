//! Simulated entry-game panels.
//!
//! Four actions (neither firm enters, only firm 2, only firm 1, both), the
//! state is last period's action, every market starts in state 1. Markets
//! `i` with `i / n <= lambda` follow the first equilibrium's CCPs and the rest
//! follow the second's.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::panel::{Grid, Panel, SupportSpec};

pub const DEFAULT_BURN_IN: usize = 100;
const SIZE: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("need at least one market and two periods (got n={markets}, T={periods})")]
    BadShape { markets: usize, periods: usize },
    #[error("lambda must lie in [0, 1], got {0}")]
    BadLambda(f64),
}

/// A `4 x 4` CCP matrix; entry `[a - 1][s - 1]` is the probability of action `a` in state `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct DgpSpec {
    ccp: [[f64; SIZE]; SIZE],
}

impl DgpSpec {
    pub fn prob(&self, action: u32, state: u32) -> f64 {
        self.ccp[action as usize - 1][state as usize - 1]
    }

    pub fn column_sum(&self, state: u32) -> f64 {
        (1..=SIZE as u32).map(|a| self.prob(a, state)).sum()
    }

    /// Inverse-CDF draw over actions `1..=4` in that order.
    fn draw_action<R: Rng + ?Sized>(&self, state: u32, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut last_positive = 1;
        for a in 1..=SIZE as u32 {
            let p = self.prob(a, state);
            if p > 0.0 {
                last_positive = a;
            }
            cumulative += p;
            if u < cumulative {
                return a;
            }
        }
        // columns can sum to 1 - ulp
        last_positive
    }
}

pub fn dgp1() -> DgpSpec {
    DgpSpec {
        ccp: [
            [0.19, 0.30, 0.12, 0.18],
            [0.08, 0.09, 0.08, 0.07],
            [0.53, 0.48, 0.46, 0.53],
            [0.20, 0.13, 0.34, 0.22],
        ],
    }
}

pub fn dgp2() -> DgpSpec {
    DgpSpec {
        ccp: [
            [0.18, 0.48, 0.03, 0.16],
            [0.20, 0.21, 0.14, 0.23],
            [0.29, 0.22, 0.13, 0.26],
            [0.33, 0.09, 0.70, 0.35],
        ],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub markets: usize,
    pub periods: usize,
    pub lambda: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(markets: usize, periods: usize, lambda: f64, seed: u64) -> Result<Self, SimError> {
        Self {
            markets,
            periods,
            lambda,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, SimError> {
        if self.markets == 0 || self.periods < 2 {
            return Err(SimError::BadShape {
                markets: self.markets,
                periods: self.periods,
            });
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(SimError::BadLambda(self.lambda));
        }
        Ok(self)
    }

    /// Whether 1-based market `i` follows the first DGP.
    pub fn uses_dgp1(&self, market: usize) -> bool {
        market as f64 / self.markets as f64 <= self.lambda
    }

    pub fn dgp1_markets(&self) -> usize {
        (1..=self.markets).filter(|&i| self.uses_dgp1(i)).count()
    }
}

/// The random stream for 0-based market `market` under `seed`.
pub fn market_rng(seed: u64, market: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(market as u64);
    rng
}

/// Simulates one market path of `burn_in + periods` steps and keeps the last `periods`.
pub fn simulate_market<R: Rng + ?Sized>(
    dgp: &DgpSpec,
    periods: usize,
    burn_in: usize,
    rng: &mut R,
    states: &mut [u32],
    actions: &mut [u32],
) {
    debug_assert!(states.len() == periods && actions.len() == periods);
    let mut state = 1;
    for t in 0..burn_in + periods {
        let action = dgp.draw_action(state, rng);
        if t >= burn_in {
            states[t - burn_in] = state;
            actions[t - burn_in] = action;
        }
        state = action;
    }
}

pub fn simulate_panel(config: &SimConfig) -> Result<Panel, SimError> {
    let config = config.validated()?;
    let (first, second) = (dgp1(), dgp2());
    let (n, periods) = (config.markets, config.periods);
    let mut states = vec![0u32; n * periods];
    let mut actions = vec![0u32; n * periods];
    for (i, (s, a)) in states
        .chunks_exact_mut(periods)
        .zip(actions.chunks_exact_mut(periods))
        .enumerate()
    {
        let dgp = if config.uses_dgp1(i + 1) { &first } else { &second };
        let mut rng = market_rng(config.seed, i);
        simulate_market(dgp, periods, config.burn_in, &mut rng, s, a);
    }
    let support = SupportSpec::new(SIZE as u32, SIZE as u32).expect("nonzero");
    Ok(Panel::new(
        Grid::new(n, periods, states).expect("shape"),
        Grid::new(n, periods, actions).expect("shape"),
        support,
    )
    .expect("simulated ids lie in 1..=4"))
}
