//! Randomization test for homogeneity of conditional choice probabilities
//! across markets in dynamic discrete game panels.
//!
//! The test holds the panel's sufficient statistic fixed and runs a Markov
//! chain over panels with the same statistic; the p-value is the share of
//! chain draws whose homogeneity statistic is at least the observed one.

pub mod euler;
pub mod mcmc;
pub mod oracle;
pub mod panel;
pub mod simgen;
pub mod stats;
pub mod study;
pub mod suffstat;
pub mod testing;

pub use mcmc::{run_chain, Chain, ChainConfig, MarketPair};
pub use panel::{load_panel, write_panel, Grid, Panel, SupportSpec};
pub use stats::{tau1, tau2, Statistic};
pub use suffstat::{sufficient_stat, SufficientStat};
pub use testing::{p_value, run_test, TestResult};
