//! Empirical conditional choice probabilities and the two homogeneity
//! statistics built from them.
//!
//! Both statistics compare each market's CCPs with the pooled CCPs, weighted
//! by the market's visits to the state. `0/0` and `0 * log 0` are read as `0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::Panel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("market index {index} out of range for {markets} markets")]
    IndexOutOfRange { index: usize, markets: usize },
    #[error("unknown statistic `{0}` (expected tau1 or tau2)")]
    UnknownStatistic(String),
}

/// `sigma(a | s)` estimates with the visit counts they were formed from.
#[derive(Clone, Debug, PartialEq)]
pub struct CcpTable {
    state_count: u32,
    action_count: u32,
    probs: Vec<f64>,
    visits: Vec<u64>,
}

impl CcpTable {
    fn from_counts(state_count: u32, action_count: u32, counts: &[u64], visits: &[u64]) -> Self {
        let ns = state_count as usize;
        let probs = counts
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let v = visits[idx % ns];
                if v == 0 {
                    0.0
                } else {
                    c as f64 / v as f64
                }
            })
            .collect();
        Self {
            state_count,
            action_count,
            probs,
            visits: visits.to_vec(),
        }
    }

    /// Estimated probability of action `a` in state `s` (1-based ids).
    pub fn prob(&self, action: u32, state: u32) -> f64 {
        self.probs[(action as usize - 1) * self.state_count as usize + state as usize - 1]
    }

    pub fn visits(&self, state: u32) -> u64 {
        self.visits[state as usize - 1]
    }

    pub fn state_count(&self) -> u32 {
        self.state_count
    }

    pub fn action_count(&self) -> u32 {
        self.action_count
    }
}

/// Action-by-state counts, layout `(a - 1) * |S| + (s - 1)`.
fn tally(panel: &Panel, markets: impl Iterator<Item = usize>) -> (Vec<u64>, Vec<u64>) {
    let ns = panel.support().state_count() as usize;
    let na = panel.support().action_count() as usize;
    let mut counts = vec![0u64; ns * na];
    let mut visits = vec![0u64; ns];
    for i in markets {
        for (&s, &a) in panel.states().row(i).iter().zip(panel.actions().row(i)) {
            counts[(a as usize - 1) * ns + s as usize - 1] += 1;
            visits[s as usize - 1] += 1;
        }
    }
    (counts, visits)
}

pub fn ccp_market(panel: &Panel, market: usize) -> Result<CcpTable, StatsError> {
    if market >= panel.markets() {
        return Err(StatsError::IndexOutOfRange {
            index: market,
            markets: panel.markets(),
        });
    }
    let (counts, visits) = tally(panel, std::iter::once(market));
    let support = panel.support();
    Ok(CcpTable::from_counts(
        support.state_count(),
        support.action_count(),
        &counts,
        &visits,
    ))
}

pub fn ccp_pooled(panel: &Panel) -> CcpTable {
    let (counts, visits) = tally(panel, 0..panel.markets());
    let support = panel.support();
    CcpTable::from_counts(support.state_count(), support.action_count(), &counts, &visits)
}

/// Sums `term(market_ccp, pooled_ccp, market_visits)` over markets and
/// `(a, s)` cells where the pooled CCP is positive.
fn accumulate(panel: &Panel, term: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let ns = panel.support().state_count() as usize;
    let na = panel.support().action_count() as usize;
    let (pooled_counts, pooled_visits) = tally(panel, 0..panel.markets());
    let mut counts = vec![0u64; ns * na];
    let mut visits = vec![0u64; ns];
    let mut total = 0.0;
    for i in 0..panel.markets() {
        counts.iter_mut().for_each(|c| *c = 0);
        visits.iter_mut().for_each(|v| *v = 0);
        for (&s, &a) in panel.states().row(i).iter().zip(panel.actions().row(i)) {
            counts[(a as usize - 1) * ns + s as usize - 1] += 1;
            visits[s as usize - 1] += 1;
        }
        for a in 0..na {
            for s in 0..ns {
                let idx = a * ns + s;
                if visits[s] == 0 {
                    continue;
                }
                if pooled_counts[idx] == 0 {
                    debug_assert_eq!(counts[idx], 0, "market count exceeds pooled count");
                    continue;
                }
                let pooled = pooled_counts[idx] as f64 / pooled_visits[s] as f64;
                let market = counts[idx] as f64 / visits[s] as f64;
                total += term(market, pooled, visits[s] as f64);
            }
        }
    }
    total
}

/// Visit-weighted chi-square distance between market and pooled CCPs.
pub fn tau1(panel: &Panel) -> f64 {
    accumulate(panel, |market, pooled, visits| {
        let d = market - pooled;
        d * d * visits / pooled
    })
}

/// Visit-weighted likelihood-ratio (G) statistic between market and pooled CCPs.
pub fn tau2(panel: &Panel) -> f64 {
    2.0 * accumulate(panel, |market, pooled, visits| {
        if market == 0.0 {
            0.0
        } else {
            market * (market / pooled).ln() * visits
        }
    })
}

/// Statistic selector used by the CLI and study specs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Tau1,
    Tau2,
}

impl Statistic {
    pub fn evaluate(self, panel: &Panel) -> f64 {
        match self {
            Statistic::Tau1 => tau1(panel),
            Statistic::Tau2 => tau2(panel),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Tau1 => "tau1",
            Statistic::Tau2 => "tau2",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tau1" => Ok(Statistic::Tau1),
            "tau2" => Ok(Statistic::Tau2),
            other => Err(StatsError::UnknownStatistic(other.to_string())),
        }
    }
}
