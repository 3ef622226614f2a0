//! The MCMC p-value and the reject decision.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcmc::{run_chain_multi, ChainConfig, McmcError};
use crate::panel::Panel;
use crate::stats::Statistic;

#[derive(Debug, Error, PartialEq)]
pub enum TestError {
    #[error("no statistic draws")]
    EmptyDraws,
    #[error("first draw {first} differs from the observed statistic {observed}")]
    FirstDrawMismatch { observed: f64, first: f64 },
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Chain(#[from] McmcError),
}

/// Outcome of one test. Serialized with the keys the CLI emits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub tau_observed: f64,
    pub p_value: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub reject: bool,
    pub stat: Statistic,
    pub seed: u64,
    pub elapsed_ms: u64,
}

/// Share of chain draws at or above the observed value. The first draw is the
/// observed panel itself, so the result is at least `1 / K`.
pub fn p_value(tau_observed: f64, draws: &[f64]) -> Result<f64, TestError> {
    let first = *draws.first().ok_or(TestError::EmptyDraws)?;
    if first.to_bits() != tau_observed.to_bits() && first != tau_observed {
        return Err(TestError::FirstDrawMismatch {
            observed: tau_observed,
            first,
        });
    }
    let hits = draws.iter().filter(|&&d| d >= tau_observed).count();
    Ok(hits as f64 / draws.len() as f64)
}

fn check_alpha(alpha: f64) -> Result<(), TestError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(TestError::InvalidAlpha(alpha))
    }
}

pub fn run_test(
    panel: &Panel,
    config: &ChainConfig,
    stat: Statistic,
    alpha: f64,
) -> Result<TestResult, TestError> {
    Ok(run_tests(panel, config, &[stat], alpha)?.remove(0))
}

/// Runs one chain and evaluates each statistic on it. Each result is what
/// [`run_test`] would give for that statistic alone with the same config.
pub fn run_tests(
    panel: &Panel,
    config: &ChainConfig,
    stats: &[Statistic],
    alpha: f64,
) -> Result<Vec<TestResult>, TestError> {
    check_alpha(alpha)?;
    let started = Instant::now();
    let closures: Vec<_> = stats.iter().map(|&s| move |p: &Panel| s.evaluate(p)).collect();
    let refs: Vec<&dyn Fn(&Panel) -> f64> = closures.iter().map(|f| f as _).collect();
    let draws = run_chain_multi(panel, config, &refs)?;
    let elapsed_ms = started.elapsed().as_millis() as u64;
    stats
        .iter()
        .zip(draws)
        .map(|(&stat, values)| {
            let tau_observed = values[0];
            let p = p_value(tau_observed, &values)?;
            Ok(TestResult {
                tau_observed,
                p_value: p,
                k: config.k,
                alpha,
                reject: p <= alpha,
                stat,
                seed: config.seed,
                elapsed_ms,
            })
        })
        .collect()
}
