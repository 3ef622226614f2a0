//! Brute-force ground truth on tiny panels: the reachable set of the chain,
//! exact kernel symmetry and row sums, and the distance of long-run visit
//! frequencies from uniform on the reachable set.

use std::collections::{HashMap, HashSet, VecDeque};

use num::{BigRational, One};
use thiserror::Error;

use crate::mcmc::{
    enumerate_rs, is_enumerable, Chain, ChainConfig, KernelCache, KernelVariant, McmcError,
    MarketPair,
};
use crate::panel::{Grid, Panel, SupportSpec};
use crate::suffstat::{in_ra, in_rs, sufficient_stat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    Chain(#[from] McmcError),
    #[error("chain reached a panel outside the enumerated orbit at step {0}")]
    LeftOrbit(usize),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// Panels reachable from a start panel through positive-probability steps.
#[derive(Clone, Debug)]
pub struct Orbit {
    members: Vec<Panel>,
    index: HashMap<Panel, usize>,
}

impl Orbit {
    pub fn members(&self) -> &[Panel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, panel: &Panel) -> Option<usize> {
        self.index.get(panel).copied()
    }

    fn push(&mut self, panel: Panel) -> bool {
        if self.index.contains_key(&panel) {
            return false;
        }
        self.index.insert(panel.clone(), self.members.len());
        self.members.push(panel);
        true
    }
}

/// Distinct permutations of a sorted slice, in lexicographic order.
fn distinct_permutations(sorted: &[u32]) -> Vec<Vec<u32>> {
    let mut current = sorted.to_vec();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (1..current.len()).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..current.len())
            .rev()
            .find(|&j| current[j] > current[i - 1])
            .expect("a larger element exists right of the pivot");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

/// Cells of one class with the distinct orderings of its actions.
type ClassOptions = Vec<(Vec<(usize, usize)>, Vec<Vec<u32>>)>;

/// Action grids obtained by permuting `from`'s actions within each transition
/// and terminal class, placed onto the classes of `new_states`.
fn class_permutations(new_states: &Grid, from: &Panel) -> Vec<Grid> {
    let periods = from.periods();
    let class_key = |g: &Grid, i: usize, t: usize| -> (u32, u32) {
        if t + 1 < periods {
            (g.get(i, t), g.get(i, t + 1))
        } else {
            (g.get(i, t), 0)
        }
    };
    let mut pools: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    let mut slots: HashMap<(u32, u32), Vec<(usize, usize)>> = HashMap::new();
    for i in 0..from.markets() {
        for t in 0..periods {
            pools
                .entry(class_key(from.states(), i, t))
                .or_default()
                .push(from.actions().get(i, t));
            slots.entry(class_key(new_states, i, t)).or_default().push((i, t));
        }
    }
    let mut classes: Vec<_> = slots.into_iter().collect();
    classes.sort();
    let mut options: ClassOptions = Vec::new();
    for (key, cells) in classes {
        let mut pool = pools.remove(&key).unwrap_or_default();
        if pool.len() != cells.len() {
            return Vec::new();
        }
        pool.sort_unstable();
        options.push((cells, distinct_permutations(&pool)));
    }

    let mut out = Vec::new();
    let mut grid = from.actions().clone();
    fn expand(
        depth: usize,
        options: &ClassOptions,
        grid: &mut Grid,
        out: &mut Vec<Grid>,
    ) {
        let Some((cells, perms)) = options.get(depth) else {
            out.push(grid.clone());
            return;
        };
        for perm in perms {
            for (&(i, t), &a) in cells.iter().zip(perm) {
                grid.set(i, t, a);
            }
            expand(depth + 1, options, grid, out);
        }
    }
    expand(0, &options, &mut grid, &mut out);
    out
}

/// One-step neighbors of `x` built from the state sets and class permutations.
fn neighbors(x: &Panel) -> Result<HashSet<Panel>, OracleError> {
    let mut out = HashSet::new();
    for pair in MarketPair::all(x.markets()) {
        for states in enumerate_rs(pair, x)? {
            for actions in class_permutations(&states, x) {
                out.insert(
                    Panel::new(states.clone(), actions, x.support()).expect("ids stay in range"),
                );
            }
        }
    }
    Ok(out)
}

/// Breadth-first closure of `{x}` under one-step transitions.
pub fn orbit_bfs(x: &Panel) -> Result<Orbit, OracleError> {
    is_enumerable(x)?;
    let mut orbit = Orbit {
        members: Vec::new(),
        index: HashMap::new(),
    };
    orbit.push(x.clone());
    let mut queue = VecDeque::from([x.clone()]);
    while let Some(current) = queue.pop_front() {
        for next in neighbors(&current)? {
            if orbit.push(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(orbit)
}

/// Every panel over `x`'s shape and support.
fn all_panels(x: &Panel) -> Vec<Panel> {
    use crate::mcmc::all_grids;
    let (n, t) = (x.markets(), x.periods());
    let support = x.support();
    let action_grids: Vec<Grid> = all_grids(n, t, support.action_count()).collect();
    all_grids(n, t, support.state_count())
        .flat_map(|s| {
            action_grids
                .iter()
                .map(move |a| Panel::new(s.clone(), a.clone(), support).expect("in range"))
        })
        .collect()
}

/// Depth-first closure that tests every panel of the space against the
/// defining predicates instead of constructing neighbors.
pub fn orbit_dfs_filter(x: &Panel) -> Result<HashSet<Panel>, OracleError> {
    is_enumerable(x)?;
    let space = all_panels(x);
    let mut seen = HashSet::from([x.clone()]);
    let mut stack = vec![x.clone()];
    while let Some(current) = stack.pop() {
        for candidate in &space {
            if seen.contains(candidate) {
                continue;
            }
            let states_ok = MarketPair::all(current.markets()).any(|pair| {
                in_rs(pair, current.states(), candidate.states()).expect("same shape")
            });
            if states_ok
                && in_ra(candidate.states(), &current, candidate.actions()).expect("same shape")
            {
                seen.insert(candidate.clone());
                stack.push(candidate.clone());
            }
        }
    }
    Ok(seen)
}

/// Number of panels in the space sharing `x`'s sufficient statistic.
pub fn same_u_count(x: &Panel) -> Result<usize, OracleError> {
    is_enumerable(x)?;
    let target = sufficient_stat(x);
    Ok(all_panels(x)
        .iter()
        .filter(|p| sufficient_stat(p) == target)
        .count())
}

/// Runs the chain for `steps` states from `x` and returns the total-variation
/// distance between visit frequencies and the uniform distribution on the orbit.
pub fn verify_uniform_stationarity(x: &Panel, steps: usize, seed: u64) -> Result<f64, OracleError> {
    let orbit = orbit_bfs(x)?;
    tv_from_uniform(&orbit, x, steps, seed)
}

pub fn tv_from_uniform(orbit: &Orbit, x: &Panel, steps: usize, seed: u64) -> Result<f64, OracleError> {
    let mut visits = vec![0u64; orbit.len()];
    let mut chain = Chain::new(x.clone(), &ChainConfig::new(steps.max(1), seed)?);
    for k in 0..steps {
        if k > 0 {
            chain.step()?;
        }
        let pos = orbit.position(chain.current()).ok_or(OracleError::LeftOrbit(k))?;
        visits[pos] += 1;
    }
    let uniform = 1.0 / orbit.len() as f64;
    Ok(0.5
        * visits
            .iter()
            .map(|&c| (c as f64 / steps as f64 - uniform).abs())
            .sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryReport {
    pub orbit_size: usize,
    pub asymmetric_pairs: usize,
    pub bad_rows: usize,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.asymmetric_pairs == 0 && self.bad_rows == 0
    }
}

/// Exact kernel matrix over the orbit of `x`.
pub fn kernel_matrix(
    orbit: &Orbit,
    variant: KernelVariant,
) -> Result<Vec<Vec<BigRational>>, OracleError> {
    let mut cache = KernelCache::new();
    orbit
        .members()
        .iter()
        .map(|from| {
            orbit
                .members()
                .iter()
                .map(|to| cache.kernel_prob(from, to, variant).map_err(OracleError::from))
                .collect()
        })
        .collect()
}

pub fn symmetry_report(x: &Panel, variant: KernelVariant) -> Result<SymmetryReport, OracleError> {
    let orbit = orbit_bfs(x)?;
    let matrix = kernel_matrix(&orbit, variant)?;
    let m = orbit.len();
    let asymmetric_pairs = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|&(a, b)| matrix[a][b] != matrix[b][a])
        .count();
    let bad_rows = matrix
        .iter()
        .filter(|row| row.iter().sum::<BigRational>() != BigRational::one())
        .count();
    Ok(SymmetryReport {
        orbit_size: m,
        asymmetric_pairs,
        bad_rows,
    })
}

/// Exact kernel symmetry over all orbit pairs and unit row sums.
pub fn exact_symmetry_check(x: &Panel) -> Result<bool, OracleError> {
    Ok(symmetry_report(x, KernelVariant::Exact)?.passed())
}

pub const PRESETS: [&str; 6] = ["tiny1", "tiny2", "tiny3", "tiny4", "small48", "small60"];

/// Small binary panels used by `dghomog verify` and the acceptance suite.
/// The `tiny` ones are `2 x 3` with orbits of size 1, 8, 2 and 12.
pub fn preset(name: &str) -> Result<Panel, OracleError> {
    let binary = SupportSpec::new(2, 2).expect("nonzero");
    let make = |s: &[&[u32]], a: &[&[u32]]| {
        let s: Vec<Vec<u32>> = s.iter().map(|r| r.to_vec()).collect();
        let a: Vec<Vec<u32>> = a.iter().map(|r| r.to_vec()).collect();
        Panel::from_rows(&s, &a, binary).expect("valid preset")
    };
    Ok(match name {
        "tiny1" => make(&[&[1, 1, 1], &[1, 1, 1]], &[&[1, 1, 1], &[1, 1, 1]]),
        "tiny2" => make(&[&[2, 2, 2], &[2, 1, 2]], &[&[2, 1, 2], &[2, 1, 1]]),
        "tiny3" => make(&[&[1, 1, 1], &[1, 1, 2]], &[&[2, 2, 1], &[2, 1, 1]]),
        "tiny4" => make(&[&[1, 1, 1], &[1, 1, 1]], &[&[2, 2, 2], &[1, 1, 1]]),
        "small48" => make(
            &[&[2, 2, 2, 2], &[2, 2, 1, 2]],
            &[&[2, 2, 1, 2], &[1, 1, 1, 1]],
        ),
        "small60" => make(
            &[&[2, 2, 2], &[2, 2, 2], &[2, 2, 1]],
            &[&[2, 2, 2], &[2, 1, 1], &[1, 1, 1]],
        ),
        other => return Err(OracleError::UnknownPreset(other.to_string())),
    })
}
