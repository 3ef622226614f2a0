//! The sufficient statistic `U(X)` and the membership predicates for the
//! state and action resampling sets.
//!
//! All comparisons here are exact integer equality.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mcmc::MarketPair;
use crate::panel::{Grid, Panel};

/// Tables with at most this many cells are stored densely.
const DENSE_LIMIT: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuffStatError {
    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Counts keyed by up to three 1-based ids, dense or sparse depending on the
/// size of the key space. Equality compares the nonzero entries only, so
/// tables built over different declared supports still compare by content.
#[derive(Clone, Debug)]
pub struct CountTable {
    dims: [u32; 3],
    repr: Repr,
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(Vec<u64>),
    Sparse(BTreeMap<[u32; 3], u64>),
}

impl CountTable {
    /// `dims` gives the size of each key component; unused trailing components are 1.
    pub fn new(dims: [u32; 3]) -> Self {
        let cells = dims.iter().map(|&d| d.max(1) as u64).product::<u64>();
        let repr = if cells <= DENSE_LIMIT {
            Repr::Dense(vec![0; cells as usize])
        } else {
            Repr::Sparse(BTreeMap::new())
        };
        Self { dims, repr }
    }

    fn flat(&self, key: [u32; 3]) -> usize {
        let [d0, d1, d2] = self.dims.map(|d| d.max(1) as usize);
        let k = key.map(|k| (k.max(1) - 1) as usize);
        debug_assert!(k[0] < d0 && k[1] < d1 && k[2] < d2, "key {key:?} outside {:?}", self.dims);
        (k[0] * d1 + k[1]) * d2 + k[2]
    }

    pub fn increment(&mut self, key: [u32; 3]) {
        match &mut self.repr {
            Repr::Dense(v) => {
                let idx = {
                    let [_, d1, d2] = self.dims.map(|d| d.max(1) as usize);
                    let k = key.map(|k| (k.max(1) - 1) as usize);
                    (k[0] * d1 + k[1]) * d2 + k[2]
                };
                v[idx] += 1;
            }
            Repr::Sparse(m) => *m.entry(key).or_insert(0) += 1,
        }
    }

    pub fn get(&self, key: [u32; 3]) -> u64 {
        match &self.repr {
            Repr::Dense(v) => v[self.flat(key)],
            Repr::Sparse(m) => m.get(&key).copied().unwrap_or(0),
        }
    }

    pub fn total(&self) -> u64 {
        match &self.repr {
            Repr::Dense(v) => v.iter().sum(),
            Repr::Sparse(m) => m.values().sum(),
        }
    }

    /// Nonzero entries in key order.
    pub fn nonzero(&self) -> Vec<([u32; 3], u64)> {
        match &self.repr {
            Repr::Dense(v) => {
                let [_, d1, d2] = self.dims.map(|d| d.max(1) as usize);
                v.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(idx, &c)| {
                        let key = [
                            (idx / (d1 * d2)) as u32 + 1,
                            ((idx / d2) % d1) as u32 + 1,
                            (idx % d2) as u32 + 1,
                        ];
                        (key, c)
                    })
                    .collect()
            }
            Repr::Sparse(m) => m
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (normalize_key(*k, self.dims), c))
                .collect(),
        }
    }
}

// Unused key components are stored as 1 so dense and sparse keys agree.
fn normalize_key(key: [u32; 3], dims: [u32; 3]) -> [u32; 3] {
    let mut out = key;
    for (k, d) in out.iter_mut().zip(dims) {
        if d <= 1 {
            *k = 1;
        }
    }
    out
}

impl PartialEq for CountTable {
    fn eq(&self, other: &Self) -> bool {
        self.nonzero() == other.nonzero()
    }
}

impl Eq for CountTable {}

/// `U(X)`: initial states, pooled `(s, a, s')` counts over `t < T`, pooled
/// terminal `(s, a)` counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SufficientStat {
    pub initial_states: Vec<u32>,
    pub triple_counts: CountTable,
    pub terminal_counts: CountTable,
}

pub fn sufficient_stat(panel: &Panel) -> SufficientStat {
    let support = panel.support();
    let (ns, na) = (support.state_count(), support.action_count());
    let states = panel.states();
    let actions = panel.actions();
    let last = panel.periods() - 1;
    let mut triple_counts = CountTable::new([ns, na, ns]);
    let mut terminal_counts = CountTable::new([ns, na, 1]);
    for i in 0..panel.markets() {
        let (s, a) = (states.row(i), actions.row(i));
        for t in 0..last {
            triple_counts.increment([s[t], a[t], s[t + 1]]);
        }
        terminal_counts.increment([s[last], a[last], 1]);
    }
    SufficientStat {
        initial_states: states.rows().map(|r| r[0]).collect(),
        triple_counts,
        terminal_counts,
    }
}

/// Per-market `(s, s')` transition counts over `t < T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketTransitionCounts(pub Vec<CountTable>);

impl MarketTransitionCounts {
    pub fn from_grid(states: &Grid, state_count: u32) -> Self {
        Self(
            states
                .rows()
                .map(|row| {
                    let mut table = CountTable::new([state_count, state_count, 1]);
                    for w in row.windows(2) {
                        table.increment([w[0], w[1], 1]);
                    }
                    table
                })
                .collect(),
        )
    }
}

fn max_id(grids: &[&Grid]) -> u32 {
    grids
        .iter()
        .flat_map(|g| g.cells().iter().copied())
        .max()
        .unwrap_or(1)
        .max(1)
}

fn pooled_transitions(states: &Grid, markets: &[usize], state_count: u32) -> CountTable {
    let mut table = CountTable::new([state_count, state_count, 1]);
    for &i in markets {
        for w in states.row(i).windows(2) {
            table.increment([w[0], w[1], 1]);
        }
    }
    table
}

fn check_shape(a: &Grid, b: &Grid) -> Result<(), SuffStatError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(SuffStatError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.markets(),
            a.periods(),
            b.markets(),
            b.periods()
        )))
    }
}

/// Whether `new` lies in the state resampling set of `old` for `pair`: same
/// first-period states, same per-market transition counts outside the pair,
/// and same pooled transition counts inside it.
pub fn in_rs(pair: MarketPair, old: &Grid, new: &Grid) -> Result<bool, SuffStatError> {
    check_shape(old, new)?;
    if pair.first() >= old.markets() || pair.second() >= old.markets() {
        return Err(SuffStatError::ShapeMismatch(format!(
            "pair {pair:?} outside {} markets",
            old.markets()
        )));
    }
    if (0..old.markets()).any(|i| old.get(i, 0) != new.get(i, 0)) {
        return Ok(false);
    }
    let state_count = max_id(&[old, new]);
    let inside = pair.markets();
    for i in (0..old.markets()).filter(|i| !inside.contains(i)) {
        if pooled_transitions(old, &[i], state_count) != pooled_transitions(new, &[i], state_count)
        {
            return Ok(false);
        }
    }
    Ok(pooled_transitions(old, &inside, state_count) == pooled_transitions(new, &inside, state_count))
}

/// Whether `(new_states, new_actions)` matches `old`'s pooled triple and
/// terminal counts.
pub fn in_ra(new_states: &Grid, old: &Panel, new_actions: &Grid) -> Result<bool, SuffStatError> {
    check_shape(old.states(), new_states)?;
    check_shape(old.actions(), new_actions)?;
    let ns = max_id(&[old.states(), new_states]);
    let na = max_id(&[old.actions(), new_actions]);
    let last = old.periods() - 1;
    let tally = |s: &Grid, a: &Grid| {
        let mut triples = CountTable::new([ns, na, ns]);
        let mut terminal = CountTable::new([ns, na, 1]);
        for i in 0..s.markets() {
            let (sr, ar) = (s.row(i), a.row(i));
            for t in 0..last {
                triples.increment([sr[t], ar[t], sr[t + 1]]);
            }
            terminal.increment([sr[last], ar[last], 1]);
        }
        (triples, terminal)
    };
    Ok(tally(new_states, new_actions) == tally(old.states(), old.actions()))
}

/// Pooled-over-pair terminal state counts agree. Always true when both grids
/// share first-period states and pooled transition counts on the pair.
pub fn terminal_counts_agree(pair: MarketPair, old: &Grid, new: &Grid) -> bool {
    debug_assert!(old.same_shape(new));
    let last = old.periods() - 1;
    let mut a: Vec<u32> = pair.markets().iter().map(|&i| old.get(i, last)).collect();
    let mut b: Vec<u32> = pair.markets().iter().map(|&i| new.get(i, last)).collect();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::SupportSpec;

    fn panel(states: &[Vec<u32>], actions: &[Vec<u32>], s: u32, a: u32) -> Panel {
        Panel::from_rows(states, actions, SupportSpec::new(s, a).unwrap()).unwrap()
    }

    #[test]
    fn single_transition() {
        let u = sufficient_stat(&panel(&[vec![1, 2]], &[vec![3, 1]], 2, 3));
        assert_eq!(u.initial_states, vec![1]);
        assert_eq!(u.triple_counts.nonzero(), vec![([1, 3, 2], 1)]);
        assert_eq!(u.terminal_counts.nonzero(), vec![([2, 1, 1], 1)]);
    }

    #[test]
    fn constant_panel() {
        let u = sufficient_stat(&panel(&[vec![1; 3], vec![1; 3]], &[vec![1; 3], vec![1; 3]], 1, 1));
        assert_eq!(u.initial_states, vec![1, 1]);
        assert_eq!(u.triple_counts.nonzero(), vec![([1, 1, 1], 4)]);
        assert_eq!(u.terminal_counts.nonzero(), vec![([1, 1, 1], 2)]);
    }

    #[test]
    fn sparse_and_dense_tables_agree() {
        let mut dense = CountTable::new([4, 4, 4]);
        let mut sparse = CountTable::new([2000, 2000, 2000]);
        for key in [[1, 2, 3], [4, 4, 4], [1, 2, 3], [2, 1, 1]] {
            dense.increment(key);
            sparse.increment(key);
        }
        assert!(matches!(sparse.repr, Repr::Sparse(_)));
        assert_eq!(dense, sparse);
        assert_eq!(sparse.get([1, 2, 3]), 2);
        assert_eq!(sparse.total(), 4);

        let mut pairs = CountTable::new([3000, 3000, 1]);
        pairs.increment([7, 9, 1]);
        assert_eq!(pairs.nonzero(), vec![([7, 9, 1], 1)]);
    }

    #[test]
    fn rs_identity_and_first_period() {
        let s = Grid::from_rows(&[vec![1, 2, 1], vec![2, 2, 1]]).unwrap();
        let pair = MarketPair::new(0, 1);
        assert!(in_rs(pair, &s, &s).unwrap());
        let moved = Grid::from_rows(&[vec![2, 2, 1], vec![1, 2, 1]]).unwrap();
        assert!(!in_rs(pair, &s, &moved).unwrap());
    }

    #[test]
    fn rs_pooled_swap() {
        // pooled transitions {1->2, 2->2, 2->1, 1->1} can be redistributed
        let old = Grid::from_rows(&[vec![1, 2, 2], vec![1, 1, 1], vec![2, 1, 2]]).unwrap();
        let new = Grid::from_rows(&[vec![1, 1, 2], vec![1, 2, 1], vec![2, 1, 2]]).unwrap();
        // old pooled over {0,1}: 12, 22, 11, 11 ; new: 11, 12, 12, 21 -> differ
        assert!(!in_rs(MarketPair::new(0, 1), &old, &new).unwrap());
        let new = Grid::from_rows(&[vec![1, 1, 1], vec![1, 2, 2], vec![2, 1, 2]]).unwrap();
        assert!(in_rs(MarketPair::new(0, 1), &old, &new).unwrap());
        assert!(in_rs(MarketPair::new(1, 0), &old, &new).unwrap());
        // market 2 untouched but pair {0,0} forbids mixing
        assert!(!in_rs(MarketPair::new(0, 0), &old, &new).unwrap());
        assert!(terminal_counts_agree(MarketPair::new(0, 1), &old, &new));
    }

    #[test]
    fn shape_mismatch() {
        let a = Grid::from_rows(&[vec![1, 1]]).unwrap();
        let b = Grid::from_rows(&[vec![1, 1, 1]]).unwrap();
        assert!(in_rs(MarketPair::new(0, 0), &a, &b).is_err());
        let p = panel(&[vec![1, 1]], &[vec![1, 1]], 1, 1);
        assert!(in_ra(&b, &p, &b).is_err());
    }

    #[test]
    fn ra_terminal_perturbation_fails() {
        let p = panel(&[vec![1, 2, 1], vec![1, 2, 2]], &[vec![1, 2, 1], vec![2, 1, 2]], 2, 3);
        assert!(in_ra(p.states(), &p, p.actions()).unwrap());
        let mut a = p.actions().clone();
        a.set(0, 2, 3);
        assert!(!in_ra(p.states(), &p, &a).unwrap());
    }
}
