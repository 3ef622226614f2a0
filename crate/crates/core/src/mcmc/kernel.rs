//! Exact one-step transition probabilities of the chain on tiny instances,
//! by brute-force enumeration of the state and action resampling sets.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use num::{BigInt, BigRational, One, Zero};

use super::{McmcError, MarketPair};
use crate::panel::{Grid, Panel};
use crate::suffstat::{in_ra, in_rs};

/// Largest `|S|^(nT) * |A|^(nT)` the brute-force routines accept.
pub const MAX_ENUMERABLE_PANELS: u128 = 1_000_000;

/// Size of the full panel space, or `TooLarge` past [`MAX_ENUMERABLE_PANELS`].
pub fn is_enumerable(panel: &Panel) -> Result<u128, McmcError> {
    let cells = (panel.markets() * panel.periods()) as u32;
    let support = panel.support();
    let size = (support.state_count() as u128)
        .checked_pow(cells)
        .and_then(|s| s.checked_mul((support.action_count() as u128).checked_pow(cells)?));
    match size {
        Some(s) if s <= MAX_ENUMERABLE_PANELS => Ok(s),
        Some(s) => Err(McmcError::TooLarge(s)),
        None => Err(McmcError::TooLarge(u128::MAX)),
    }
}

/// Every `markets x periods` grid over `1..=alphabet`, in odometer order.
pub(crate) fn all_grids(markets: usize, periods: usize, alphabet: u32) -> impl Iterator<Item = Grid> {
    let cells = markets * periods;
    let mut next = Some(vec![1u32; cells]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        let mut pos = cells;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if succ[pos] < alphabet {
                succ[pos] += 1;
                next = Some(succ);
                break;
            }
            succ[pos] = 1;
        }
        Some(Grid::new(markets, periods, current).expect("shape by construction"))
    })
}

/// The state resampling set of `panel`'s states for `pair`, by filtering all grids.
pub fn enumerate_rs(pair: MarketPair, panel: &Panel) -> Result<Vec<Grid>, McmcError> {
    is_enumerable(panel)?;
    let states = panel.states();
    Ok(all_grids(states.markets(), states.periods(), panel.support().state_count())
        .filter(|g| in_rs(pair, states, g).expect("same shape"))
        .collect())
}

/// The action resampling set for `new_states` given `panel`, by filtering all grids.
pub fn enumerate_ra(new_states: &Grid, panel: &Panel) -> Result<Vec<Grid>, McmcError> {
    is_enumerable(panel)?;
    Ok(all_grids(panel.markets(), panel.periods(), panel.support().action_count())
        .filter(|a| in_ra(new_states, panel, a).expect("same shape"))
        .collect())
}

/// Deliberate faults for checking that the oracle notices a broken kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelVariant {
    #[default]
    Exact,
    /// Uses `|R_A| + 1` in the denominator.
    ActionSetOffByOne,
}

/// Memoizes the enumerated sets across many kernel evaluations.
#[derive(Debug, Default)]
pub struct KernelCache {
    state_sets: HashMap<(Grid, MarketPair), Rc<HashSet<Grid>>>,
    action_set_sizes: HashMap<(Grid, Panel), u64>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn state_set(&mut self, pair: MarketPair, from: &Panel) -> Result<Rc<HashSet<Grid>>, McmcError> {
        let key = (from.states().clone(), pair);
        if let Some(set) = self.state_sets.get(&key) {
            return Ok(Rc::clone(set));
        }
        let set: Rc<HashSet<Grid>> = Rc::new(enumerate_rs(pair, from)?.into_iter().collect());
        self.state_sets.insert(key, Rc::clone(&set));
        Ok(set)
    }

    fn action_set_size(&mut self, new_states: &Grid, from: &Panel) -> Result<u64, McmcError> {
        let key = (new_states.clone(), from.clone());
        if let Some(&n) = self.action_set_sizes.get(&key) {
            return Ok(n);
        }
        let n = enumerate_ra(new_states, from)?.len() as u64;
        self.action_set_sizes.insert(key, n);
        Ok(n)
    }

    /// `P(X^(k) = to | X^(k-1) = from)` as an exact rational.
    pub fn kernel_prob(
        &mut self,
        from: &Panel,
        to: &Panel,
        variant: KernelVariant,
    ) -> Result<BigRational, McmcError> {
        is_enumerable(from)?;
        let n = from.markets();
        if to.states().markets() != n || to.periods() != from.periods() {
            return Ok(BigRational::zero());
        }
        if !in_ra(to.states(), from, to.actions()).expect("same shape") {
            return Ok(BigRational::zero());
        }
        let mut ra_size = self.action_set_size(to.states(), from)?;
        if variant == KernelVariant::ActionSetOffByOne {
            ra_size += 1;
        }
        let mut total = BigRational::zero();
        for pair in MarketPair::all(n) {
            let set = self.state_set(pair, from)?;
            if set.contains(to.states()) {
                let denom = BigInt::from(n * n) * BigInt::from(set.len()) * BigInt::from(ra_size);
                total += BigRational::new(BigInt::one(), denom);
            }
        }
        Ok(total)
    }
}

/// Exact one-step transition probability between two panels.
pub fn kernel_prob(from: &Panel, to: &Panel) -> Result<BigRational, McmcError> {
    KernelCache::new().kernel_prob(from, to, KernelVariant::Exact)
}

pub fn kernel_prob_variant(
    from: &Panel,
    to: &Panel,
    variant: KernelVariant,
) -> Result<BigRational, McmcError> {
    KernelCache::new().kernel_prob(from, to, variant)
}
