//! The data-transformation Markov chain.
//!
//! Each step draws an ordered market pair uniformly from the `n^2` outcomes,
//! resamples the state grid uniformly among grids that keep every market's
//! first state, the per-market transition counts outside the pair and the
//! pooled transition counts inside it, and then permutes the actions within
//! each `(s, s')` transition class and each terminal-state class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::euler::EulerSampler;
use crate::panel::{Grid, Panel};
use crate::suffstat::sufficient_stat;

mod kernel;

pub(crate) use kernel::all_grids;

pub use kernel::{
    enumerate_ra, enumerate_rs, is_enumerable, kernel_prob, kernel_prob_variant, KernelCache,
    KernelVariant, MAX_ENUMERABLE_PANELS,
};

pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum McmcError {
    #[error("chain length K must be at least 1")]
    EmptyChain,
    #[error("rejection cap must be at least 1")]
    ZeroRejectionCap,
    #[error("pair resampling rejected {0} draws in a row")]
    RejectionCapExceeded(u64),
    #[error("transition class {class} has {old} actions to place on {new} cells")]
    ClassCardinalityMismatch { class: usize, old: usize, new: usize },
    #[error("instance too large to enumerate ({0} candidate panels)")]
    TooLarge(u128),
}

/// Ordered pair of 0-based market indices; the two may coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MarketPair {
    first: usize,
    second: usize,
}

impl MarketPair {
    pub fn new(first: usize, second: usize) -> Self {
        Self { first, second }
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn second(&self) -> usize {
        self.second
    }

    pub fn is_diagonal(&self) -> bool {
        self.first == self.second
    }

    /// The distinct markets of the pair, ascending.
    pub fn markets(&self) -> Vec<usize> {
        if self.is_diagonal() {
            vec![self.first]
        } else {
            vec![self.first.min(self.second), self.first.max(self.second)]
        }
    }

    /// All `n^2` ordered pairs.
    pub fn all(n: usize) -> impl Iterator<Item = MarketPair> {
        (0..n).flat_map(move |i| (0..n).map(move |j| MarketPair::new(i, j)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainConfig {
    /// Number of chain states, counting the observed panel itself.
    pub k: usize,
    pub seed: u64,
    pub rejection_cap: u64,
}

impl ChainConfig {
    pub fn new(k: usize, seed: u64) -> Result<Self, McmcError> {
        Self {
            k,
            seed,
            rejection_cap: DEFAULT_REJECTION_CAP,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, McmcError> {
        if self.k == 0 {
            return Err(McmcError::EmptyChain);
        }
        if self.rejection_cap == 0 {
            return Err(McmcError::ZeroRejectionCap);
        }
        Ok(self)
    }
}

pub fn draw_market_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MarketPair {
    assert!(n >= 1, "need at least one market");
    let k = rng.random_range(0..n * n);
    MarketPair::new(k / n, k % n)
}

/// Scratch space for the state step.
#[derive(Debug, Default)]
pub struct StateResampler {
    euler: EulerSampler,
    joined: Vec<u32>,
    draw: Vec<u32>,
}

impl StateResampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Draws `out` uniformly from the state resampling set of `prev` for `pair`.
    pub fn resample_into<R: Rng + ?Sized>(
        &mut self,
        prev: &Grid,
        pair: MarketPair,
        rng: &mut R,
        rejection_cap: u64,
        out: &mut Grid,
    ) -> Result<(), McmcError> {
        debug_assert!(prev.same_shape(out));
        let periods = prev.periods();
        if !pair.is_diagonal() {
            let (i1, i2) = (pair.first(), pair.second());
            self.joined.clear();
            self.joined.extend_from_slice(prev.row(i1));
            self.joined.push(0);
            self.joined.extend_from_slice(prev.row(i2));
            self.joined.push(0);
            self.draw.clear();
            self.draw.resize(self.joined.len(), 0);
            let mut attempts = 0u64;
            loop {
                if attempts == rejection_cap {
                    return Err(McmcError::RejectionCapExceeded(attempts));
                }
                attempts += 1;
                self.euler.resample_into(&self.joined, rng, &mut self.draw);
                if self.draw[periods] == 0 {
                    break;
                }
            }
            out.row_mut(i1).copy_from_slice(&self.draw[..periods]);
            out.row_mut(i2)
                .copy_from_slice(&self.draw[periods + 1..2 * periods + 1]);
        }
        for i in 0..prev.markets() {
            if pair.is_diagonal() || (i != pair.first() && i != pair.second()) {
                self.euler.resample_into(prev.row(i), rng, out.row_mut(i));
            }
        }
        Ok(())
    }
}

pub fn resample_states<R: Rng + ?Sized>(
    prev: &Grid,
    pair: MarketPair,
    rng: &mut R,
    rejection_cap: u64,
) -> Result<Grid, McmcError> {
    let mut out = prev.clone();
    StateResampler::new().resample_into(prev, pair, rng, rejection_cap, &mut out)?;
    Ok(out)
}

/// Scratch space for the action step.
#[derive(Debug, Default)]
pub struct ActionResampler {
    old_start: Vec<usize>,
    new_count: Vec<usize>,
    pool: Vec<u32>,
    remaining: Vec<usize>,
}

impl ActionResampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Places the previous actions of each transition class (and terminal
    /// class) onto the cells of the same class under `new_states`, in a
    /// uniformly random order.
    pub fn resample_into<R: Rng + ?Sized>(
        &mut self,
        new_states: &Grid,
        prev: &Panel,
        rng: &mut R,
        out: &mut Grid,
    ) -> Result<(), McmcError> {
        let ns = prev.support().state_count() as usize;
        let classes = ns * ns + ns;
        let periods = prev.periods();
        let class_of = |row: &[u32], t: usize| -> usize {
            if t + 1 < periods {
                (row[t] as usize - 1) * ns + row[t + 1] as usize - 1
            } else {
                ns * ns + row[t] as usize - 1
            }
        };

        self.old_start.clear();
        self.old_start.resize(classes + 1, 0);
        self.new_count.clear();
        self.new_count.resize(classes, 0);
        let old_states = prev.states();
        for i in 0..prev.markets() {
            let (old_row, new_row) = (old_states.row(i), new_states.row(i));
            for t in 0..periods {
                self.old_start[class_of(old_row, t) + 1] += 1;
                self.new_count[class_of(new_row, t)] += 1;
            }
        }
        for c in 0..classes {
            let old = self.old_start[c + 1];
            if old != self.new_count[c] {
                return Err(McmcError::ClassCardinalityMismatch {
                    class: c,
                    old,
                    new: self.new_count[c],
                });
            }
            self.old_start[c + 1] += self.old_start[c];
        }

        self.pool.clear();
        self.pool.resize(prev.markets() * periods, 0);
        self.remaining.clear();
        self.remaining.resize(classes, 0);
        let old_actions = prev.actions();
        for i in 0..prev.markets() {
            let (s_row, a_row) = (old_states.row(i), old_actions.row(i));
            for (t, &a) in a_row.iter().enumerate() {
                let c = class_of(s_row, t);
                self.pool[self.old_start[c] + self.remaining[c]] = a;
                self.remaining[c] += 1;
            }
        }

        for i in 0..prev.markets() {
            let new_row = new_states.row(i);
            let out_row = out.row_mut(i);
            for (t, slot) in out_row.iter_mut().enumerate() {
                let c = class_of(new_row, t);
                let lo = self.old_start[c];
                let left = self.remaining[c];
                let j = lo + rng.random_range(0..left);
                *slot = self.pool[j];
                self.pool.swap(j, lo + left - 1);
                self.remaining[c] -= 1;
            }
        }
        Ok(())
    }
}

pub fn resample_actions<R: Rng + ?Sized>(
    new_states: &Grid,
    prev: &Panel,
    rng: &mut R,
) -> Result<Grid, McmcError> {
    let mut out = prev.actions().clone();
    ActionResampler::new().resample_into(new_states, prev, rng, &mut out)?;
    Ok(out)
}

/// A running chain `X^(1) = X, X^(2), ...` holding only its current state.
#[derive(Debug)]
pub struct Chain {
    current: Panel,
    index: usize,
    rng: ChaCha8Rng,
    rejection_cap: u64,
    states: StateResampler,
    actions: ActionResampler,
    next_states: Grid,
    next_actions: Grid,
}

impl Chain {
    pub fn new(panel: Panel, config: &ChainConfig) -> Self {
        Self {
            next_states: panel.states().clone(),
            next_actions: panel.actions().clone(),
            current: panel,
            index: 1,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            rejection_cap: config.rejection_cap,
            states: StateResampler::new(),
            actions: ActionResampler::new(),
        }
    }

    pub fn current(&self) -> &Panel {
        &self.current
    }

    /// 1-based index of the current state.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Advances one step and returns the pair that was drawn.
    pub fn step(&mut self) -> Result<MarketPair, McmcError> {
        let pair = draw_market_pair(self.current.markets(), &mut self.rng);
        self.states.resample_into(
            self.current.states(),
            pair,
            &mut self.rng,
            self.rejection_cap,
            &mut self.next_states,
        )?;
        self.actions.resample_into(
            &self.next_states,
            &self.current,
            &mut self.rng,
            &mut self.next_actions,
        )?;
        self.current
            .replace_grids(&mut self.next_states, &mut self.next_actions);
        self.index += 1;
        Ok(pair)
    }
}

/// Evaluates `stat` on every chain state; element 0 is `stat(panel)`.
pub fn run_chain<F>(panel: &Panel, config: &ChainConfig, stat: F) -> Result<Vec<f64>, McmcError>
where
    F: Fn(&Panel) -> f64,
{
    let mut out = run_chain_multi(panel, config, &[&stat])?;
    Ok(out.pop().expect("one statistic"))
}

/// Like [`run_chain`] for several statistics over one shared chain.
pub fn run_chain_multi(
    panel: &Panel,
    config: &ChainConfig,
    stats: &[&dyn Fn(&Panel) -> f64],
) -> Result<Vec<Vec<f64>>, McmcError> {
    let config = config.validated()?;
    let mut values: Vec<Vec<f64>> = stats
        .iter()
        .map(|f| {
            let mut v = Vec::with_capacity(config.k);
            v.push(f(panel));
            v
        })
        .collect();
    let reference = cfg!(debug_assertions).then(|| sufficient_stat(panel));
    let mut chain = Chain::new(panel.clone(), &config);
    for _ in 1..config.k {
        chain.step()?;
        if let Some(u) = &reference {
            debug_assert_eq!(&sufficient_stat(chain.current()), u, "step {}", chain.index());
        }
        for (f, v) in stats.iter().zip(values.iter_mut()) {
            v.push(f(chain.current()));
        }
    }
    Ok(values)
}
