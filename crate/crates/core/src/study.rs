//! Monte Carlo rejection-rate studies over grids of `(n, T, lambda)` cells.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcmc::{ChainConfig, McmcError};
use crate::simgen::{simulate_panel, SimConfig, SimError, DEFAULT_BURN_IN};
use crate::stats::Statistic;
use crate::testing::{run_tests, TestError};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Test(#[from] TestError),
    #[error(transparent)]
    Chain(#[from] McmcError),
    #[error("study needs at least one cell, one statistic and one replication")]
    Empty,
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub lambda: f64,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub cells: Vec<StudyCell>,
    pub replications: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub stats: Vec<Statistic>,
    pub master_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub lambda: f64,
    pub stat: Statistic,
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    pub wall_ms: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeds for the simulated panel and its chain in one replication.
pub fn replication_seeds(master_seed: u64, cell: &StudyCell, rep: usize) -> (u64, u64) {
    let h = [cell.n as u64, cell.t as u64, cell.lambda.to_bits(), rep as u64]
        .iter()
        .fold(splitmix64(master_seed), |acc, &x| splitmix64(acc ^ x));
    (h, splitmix64(h ^ 0x5eed))
}

/// Rejection decisions per statistic for one replication.
pub fn run_replication(spec: &StudySpec, cell: &StudyCell, rep: usize) -> Result<Vec<bool>, StudyError> {
    let (sim_seed, chain_seed) = replication_seeds(spec.master_seed, cell, rep);
    let sim = SimConfig {
        burn_in: spec.burn_in,
        ..SimConfig::new(cell.n, cell.t, cell.lambda, sim_seed)?
    };
    let panel = simulate_panel(&sim)?;
    let config = ChainConfig::new(spec.k, chain_seed)?;
    Ok(run_tests(&panel, &config, &spec.stats, spec.alpha)?
        .into_iter()
        .map(|r| r.reject)
        .collect())
}

pub fn run_cell(spec: &StudySpec, cell: &StudyCell) -> Result<Vec<CellResult>, StudyError> {
    let started = Instant::now();
    let decisions: Vec<Vec<bool>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| run_replication(spec, cell, rep))
        .collect::<Result<_, _>>()?;
    let wall_ms = started.elapsed().as_millis() as u64;
    Ok(spec
        .stats
        .iter()
        .enumerate()
        .map(|(j, &stat)| {
            let rejections = decisions.iter().filter(|d| d[j]).count();
            CellResult {
                n: cell.n,
                t: cell.t,
                lambda: cell.lambda,
                stat,
                replications: spec.replications,
                rejections,
                rate: rejections as f64 / spec.replications as f64,
                wall_ms,
            }
        })
        .collect())
}

/// Runs every cell; `jobs` caps the worker threads (default: all cores).
pub fn run_study(spec: &StudySpec, jobs: Option<usize>) -> Result<Vec<CellResult>, StudyError> {
    if spec.cells.is_empty() || spec.stats.is_empty() || spec.replications == 0 {
        return Err(StudyError::Empty);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| StudyError::Pool(e.to_string()))?;
    pool.install(|| {
        let mut out = Vec::new();
        for cell in &spec.cells {
            out.extend(run_cell(spec, cell)?);
        }
        Ok(out)
    })
}

pub fn results_csv(results: &[CellResult]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["n", "T", "lambda", "stat", "replications", "rejections", "rate", "wall_ms"])
        .expect("in-memory write");
    for r in results {
        writer
            .write_record([
                r.n.to_string(),
                r.t.to_string(),
                r.lambda.to_string(),
                r.stat.to_string(),
                r.replications.to_string(),
                r.rejections.to_string(),
                r.rate.to_string(),
                r.wall_ms.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flush")).expect("utf8")
}

/// Rejection rates in percent, one row per cell and statistic.
pub fn render_table(results: &[CellResult]) -> String {
    let mut out = String::new();
    writeln!(out, "{:>5} {:>5} {:>7} {:>5} {:>9}", "n", "T", "lambda", "stat", "rate(%)").unwrap();
    for r in results {
        writeln!(
            out,
            "{:>5} {:>5} {:>7.2} {:>5} {:>9.1}",
            r.n,
            r.t,
            r.lambda,
            r.stat,
            100.0 * r.rate
        )
        .unwrap();
    }
    out
}
