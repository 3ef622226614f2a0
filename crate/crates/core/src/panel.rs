//! Game panels: the observed `n x T` grids of states and actions.
//!
//! Markets and periods are 0-based inside the library; the values stored in the
//! grids are the 1-based state and action ids used on disk. The CSV layout is
//! long format with header `market,period,state,action`.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Deserialize;
use thiserror::Error;

pub const CSV_HEADER: [&str; 4] = ["market", "period", "state", "action"];

/// Default capacity bin width, in thousand tons.
pub const DEFAULT_BIN_WIDTH: f64 = 250.0;
pub const DEFAULT_NUM_BINS: u32 = 50;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("support sizes must be positive (got {state_count} states, {action_count} actions)")]
    EmptySupport { state_count: u32, action_count: u32 },
    #[error("a panel needs at least one market")]
    NoMarkets,
    #[error("a panel needs at least two periods, found {periods}")]
    TooFewPeriods { periods: usize },
    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{kind} id {value} at market {market}, period {period} is outside 1..={max}")]
    OutOfRange {
        kind: &'static str,
        market: i64,
        period: i64,
        value: i64,
        max: u32,
    },
    #[error("market {market} has no row for period {period}")]
    MissingCell { market: i64, period: i64 },
    #[error("market {market} has more than one row for period {period}")]
    DuplicateCell { market: i64, period: i64 },
    #[error("market {market}: periods must be numbered from 1, found {period}")]
    NonContiguousPeriods { market: i64, period: i64 },
    #[error("expected header `market,period,state,action`, found `{0}`")]
    BadHeader(String),
    #[error("capacity value {value} at position {index} is negative or not a number")]
    NegativeValue { index: usize, value: f64 },
    #[error("bin width must be positive and bin count at least 1")]
    InvalidBinning,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sizes of the state and action alphabets `{1..state_count}` and `{1..action_count}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SupportSpec {
    state_count: u32,
    action_count: u32,
}

impl SupportSpec {
    pub fn new(state_count: u32, action_count: u32) -> Result<Self, PanelError> {
        if state_count == 0 || action_count == 0 {
            return Err(PanelError::EmptySupport {
                state_count,
                action_count,
            });
        }
        Ok(Self {
            state_count,
            action_count,
        })
    }

    pub fn state_count(&self) -> u32 {
        self.state_count
    }

    pub fn action_count(&self) -> u32 {
        self.action_count
    }
}

/// Row-major `markets x periods` grid of ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    markets: usize,
    periods: usize,
    cells: Vec<u32>,
}

impl Grid {
    pub fn new(markets: usize, periods: usize, cells: Vec<u32>) -> Result<Self, PanelError> {
        if cells.len() != markets * periods {
            return Err(PanelError::ShapeMismatch(format!(
                "{} cells for a {markets}x{periods} grid",
                cells.len()
            )));
        }
        Ok(Self {
            markets,
            periods,
            cells,
        })
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self, PanelError> {
        let periods = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != periods) {
            return Err(PanelError::ShapeMismatch(format!(
                "ragged rows ({} vs {periods} periods)",
                bad.len()
            )));
        }
        Ok(Self {
            markets: rows.len(),
            periods,
            cells: rows.concat(),
        })
    }

    pub fn markets(&self) -> usize {
        self.markets
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    #[inline]
    pub fn get(&self, market: usize, period: usize) -> u32 {
        self.cells[market * self.periods + period]
    }

    #[inline]
    pub fn set(&mut self, market: usize, period: usize, value: u32) {
        self.cells[market * self.periods + period] = value;
    }

    #[inline]
    pub fn row(&self, market: usize) -> &[u32] {
        &self.cells[market * self.periods..(market + 1) * self.periods]
    }

    #[inline]
    pub fn row_mut(&mut self, market: usize) -> &mut [u32] {
        &mut self.cells[market * self.periods..(market + 1) * self.periods]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.cells.chunks_exact(self.periods.max(1))
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.markets == other.markets && self.periods == other.periods
    }
}

/// Observed data `X = (S, A)` over a balanced panel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Panel {
    states: Grid,
    actions: Grid,
    support: SupportSpec,
}

impl Panel {
    pub fn new(states: Grid, actions: Grid, support: SupportSpec) -> Result<Self, PanelError> {
        if !states.same_shape(&actions) {
            return Err(PanelError::ShapeMismatch(format!(
                "states are {}x{}, actions are {}x{}",
                states.markets, states.periods, actions.markets, actions.periods
            )));
        }
        if states.markets == 0 {
            return Err(PanelError::NoMarkets);
        }
        if states.periods < 2 {
            return Err(PanelError::TooFewPeriods {
                periods: states.periods,
            });
        }
        check_range(&states, "state", support.state_count)?;
        check_range(&actions, "action", support.action_count)?;
        Ok(Self {
            states,
            actions,
            support,
        })
    }

    /// Builds a panel from nested rows, one inner vector per market.
    pub fn from_rows(
        states: &[Vec<u32>],
        actions: &[Vec<u32>],
        support: SupportSpec,
    ) -> Result<Self, PanelError> {
        Self::new(Grid::from_rows(states)?, Grid::from_rows(actions)?, support)
    }

    /// Like [`Panel::new`] with the support set to the largest observed ids.
    pub fn with_observed_support(states: Grid, actions: Grid) -> Result<Self, PanelError> {
        let max_state = states.cells.iter().copied().max().unwrap_or(0);
        let max_action = actions.cells.iter().copied().max().unwrap_or(0);
        let support = SupportSpec::new(max_state.max(1), max_action.max(1))?;
        Self::new(states, actions, support)
    }

    pub fn markets(&self) -> usize {
        self.states.markets
    }

    pub fn periods(&self) -> usize {
        self.states.periods
    }

    pub fn states(&self) -> &Grid {
        &self.states
    }

    pub fn actions(&self) -> &Grid {
        &self.actions
    }

    pub fn support(&self) -> SupportSpec {
        self.support
    }

    /// Same data over a larger (or equal) declared support.
    pub fn with_support(&self, support: SupportSpec) -> Result<Self, PanelError> {
        Self::new(self.states.clone(), self.actions.clone(), support)
    }

    /// Swaps in new grids without re-validating. Callers guarantee shape and range.
    pub(crate) fn replace_grids(&mut self, states: &mut Grid, actions: &mut Grid) {
        debug_assert!(states.same_shape(&self.states) && actions.same_shape(&self.actions));
        std::mem::swap(&mut self.states, states);
        std::mem::swap(&mut self.actions, actions);
    }
}

fn check_range(grid: &Grid, kind: &'static str, max: u32) -> Result<(), PanelError> {
    for (idx, &v) in grid.cells.iter().enumerate() {
        if v == 0 || v > max {
            return Err(PanelError::OutOfRange {
                kind,
                market: (idx / grid.periods) as i64 + 1,
                period: (idx % grid.periods) as i64 + 1,
                value: v as i64,
                max,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Row {
    market: i64,
    period: i64,
    state: i64,
    action: i64,
}

/// Reads a long-format CSV panel.
///
/// Markets are renumbered in order of first appearance. When `support` is
/// `None` it is inferred from the largest observed ids.
pub fn load_panel<R: Read>(source: R, support: Option<SupportSpec>) -> Result<Panel, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() != CSV_HEADER.len() || headers.iter().zip(CSV_HEADER).any(|(h, e)| h != e) {
        return Err(PanelError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
    }

    let mut labels: Vec<i64> = Vec::new();
    let mut by_label: HashMap<i64, usize> = HashMap::new();
    let mut cells: Vec<HashMap<i64, (i64, i64)>> = Vec::new();
    let mut max_period = 0i64;
    let (mut max_state, mut max_action) = (0i64, 0i64);

    for record in reader.deserialize::<Row>() {
        let row = record?;
        if row.period < 1 {
            return Err(PanelError::NonContiguousPeriods {
                market: row.market,
                period: row.period,
            });
        }
        for (kind, value) in [("state", row.state), ("action", row.action)] {
            if value < 1 || value > u32::MAX as i64 {
                return Err(PanelError::OutOfRange {
                    kind,
                    market: row.market,
                    period: row.period,
                    value,
                    max: support.map_or(u32::MAX, |s| {
                        if kind == "state" {
                            s.state_count
                        } else {
                            s.action_count
                        }
                    }),
                });
            }
        }
        let slot = *by_label.entry(row.market).or_insert_with(|| {
            labels.push(row.market);
            cells.push(HashMap::new());
            labels.len() - 1
        });
        if cells[slot]
            .insert(row.period, (row.state, row.action))
            .is_some()
        {
            return Err(PanelError::DuplicateCell {
                market: row.market,
                period: row.period,
            });
        }
        max_period = max_period.max(row.period);
        max_state = max_state.max(row.state);
        max_action = max_action.max(row.action);
    }

    if labels.is_empty() {
        return Err(PanelError::NoMarkets);
    }
    let periods = max_period as usize;
    let mut states = Vec::with_capacity(labels.len() * periods);
    let mut actions = Vec::with_capacity(labels.len() * periods);
    for (label, market_cells) in labels.iter().zip(&cells) {
        for period in 1..=max_period {
            let &(s, a) = market_cells
                .get(&period)
                .ok_or(PanelError::MissingCell {
                    market: *label,
                    period,
                })?;
            states.push(s as u32);
            actions.push(a as u32);
        }
    }
    let support = match support {
        Some(s) => s,
        None => SupportSpec::new(max_state as u32, max_action as u32)?,
    };
    Panel::new(
        Grid::new(labels.len(), periods, states)?,
        Grid::new(labels.len(), periods, actions)?,
        support,
    )
}

/// Writes the canonical CSV form: header, then rows sorted by market then period.
pub fn write_panel<W: Write>(panel: &Panel, sink: W) -> Result<(), PanelError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    for i in 0..panel.markets() {
        for t in 0..panel.periods() {
            writer.write_record(&[
                (i + 1).to_string(),
                (t + 1).to_string(),
                panel.states.get(i, t).to_string(),
                panel.actions.get(i, t).to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn panel_to_csv(panel: &Panel) -> String {
    let mut buf = Vec::new();
    write_panel(panel, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

/// Maps capacities onto bins `[0, w) -> 1, [w, 2w) -> 2, ...`, clamping overflow into the top bin.
pub fn discretize_capacity(
    values: &[f64],
    bin_width: f64,
    num_bins: u32,
) -> Result<Vec<u32>, PanelError> {
    if !bin_width.is_finite() || bin_width <= 0.0 || num_bins == 0 {
        return Err(PanelError::InvalidBinning);
    }
    values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value.is_nan() || value < 0.0 {
                return Err(PanelError::NegativeValue { index, value });
            }
            let bin = (value / bin_width).floor();
            if bin >= num_bins as f64 {
                Ok(num_bins)
            } else {
                Ok(bin as u32 + 1)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support(s: u32, a: u32) -> SupportSpec {
        SupportSpec::new(s, a).unwrap()
    }

    #[test]
    fn loads_two_period_market() {
        let csv = "market,period,state,action\n1,1,2,3\n1,2,1,4\n";
        let panel = load_panel(csv.as_bytes(), None).unwrap();
        assert_eq!(panel.markets(), 1);
        assert_eq!(panel.periods(), 2);
        assert_eq!(panel.states().row(0), &[2, 1]);
        assert_eq!(panel.actions().row(0), &[3, 4]);
        assert_eq!(panel.support(), support(2, 4));
    }

    #[test]
    fn missing_cell_is_reported() {
        let csv = "market,period,state,action\n1,1,1,1\n1,3,1,1\n";
        let err = load_panel(csv.as_bytes(), None).unwrap_err();
        assert!(matches!(err, PanelError::MissingCell { market: 1, period: 2 }), "{err}");
    }

    #[test]
    fn short_market_is_missing_cells() {
        let csv = "market,period,state,action\n7,1,1,1\n7,2,1,1\n7,3,1,1\n9,1,1,1\n9,2,1,1\n";
        let err = load_panel(csv.as_bytes(), None).unwrap_err();
        assert!(matches!(err, PanelError::MissingCell { market: 9, period: 3 }), "{err}");
    }

    #[test]
    fn rejects_single_period() {
        let csv = "market,period,state,action\n1,1,1,1\n2,1,1,1\n";
        let err = load_panel(csv.as_bytes(), None).unwrap_err();
        assert!(matches!(err, PanelError::TooFewPeriods { periods: 1 }));
    }

    #[test]
    fn rejects_out_of_range_ids() {
        let csv = "market,period,state,action\n1,1,3,1\n1,2,1,1\n";
        let err = load_panel(csv.as_bytes(), Some(support(2, 2))).unwrap_err();
        assert!(matches!(err, PanelError::OutOfRange { kind: "state", value: 3, .. }));

        let csv = "market,period,state,action\n1,1,0,1\n1,2,1,1\n";
        let err = load_panel(csv.as_bytes(), None).unwrap_err();
        assert!(matches!(err, PanelError::OutOfRange { value: 0, .. }));
    }

    #[test]
    fn rejects_bad_periods_and_duplicates() {
        let csv = "market,period,state,action\n1,0,1,1\n1,1,1,1\n";
        assert!(matches!(
            load_panel(csv.as_bytes(), None).unwrap_err(),
            PanelError::NonContiguousPeriods { .. }
        ));
        let csv = "market,period,state,action\n1,1,1,1\n1,1,1,1\n1,2,1,1\n";
        assert!(matches!(
            load_panel(csv.as_bytes(), None).unwrap_err(),
            PanelError::DuplicateCell { .. }
        ));
    }

    #[test]
    fn rejects_wrong_header_and_garbage() {
        let csv = "id,period,state,action\n1,1,1,1\n";
        assert!(matches!(
            load_panel(csv.as_bytes(), None).unwrap_err(),
            PanelError::BadHeader(_)
        ));
        let csv = "market,period,state,action\n1,1,x,1\n";
        assert!(matches!(load_panel(csv.as_bytes(), None).unwrap_err(), PanelError::Csv(_)));
        let csv = "market,period,state,action\n";
        assert!(matches!(load_panel(csv.as_bytes(), None).unwrap_err(), PanelError::NoMarkets));
    }

    #[test]
    fn markets_renumbered_by_first_appearance() {
        let csv = "market,period,state,action\n42,2,2,2\n5,1,1,1\n42,1,3,3\n5,2,1,2\n";
        let panel = load_panel(csv.as_bytes(), None).unwrap();
        assert_eq!(panel.states().row(0), &[3, 2]);
        assert_eq!(panel.states().row(1), &[1, 1]);
        assert_eq!(
            panel_to_csv(&panel),
            "market,period,state,action\n1,1,3,3\n1,2,2,2\n2,1,1,1\n2,2,1,2\n"
        );
    }

    #[test]
    fn writes_header_and_sorted_rows() {
        let panel = Panel::from_rows(&[vec![2, 1]], &[vec![3, 4]], support(2, 4)).unwrap();
        assert_eq!(
            panel_to_csv(&panel),
            "market,period,state,action\n1,1,2,3\n1,2,1,4\n"
        );
    }

    #[test]
    fn constructor_rejects_degenerate_shapes() {
        assert!(matches!(
            Panel::from_rows(&[], &[], support(1, 1)).unwrap_err(),
            PanelError::NoMarkets
        ));
        assert!(matches!(
            Panel::from_rows(&[vec![1, 1]], &[vec![1]], support(1, 1)).unwrap_err(),
            PanelError::ShapeMismatch(_)
        ));
        assert!(SupportSpec::new(0, 3).is_err());
    }

    #[test]
    fn declared_support_may_exceed_observed() {
        let csv = "market,period,state,action\n1,1,1,1\n1,2,1,1\n";
        let panel = load_panel(csv.as_bytes(), Some(support(5, 3))).unwrap();
        assert_eq!(panel.support().state_count(), 5);
    }

    #[test]
    fn discretizer_examples() {
        let bins = discretize_capacity(&[100.0, 250.0, 12578.0, 0.0, 12499.9, 12500.0], 250.0, 50)
            .unwrap();
        assert_eq!(bins, vec![1, 2, 50, 1, 50, 50]);
        assert!(matches!(
            discretize_capacity(&[1.0, -0.5], 250.0, 50).unwrap_err(),
            PanelError::NegativeValue { index: 1, .. }
        ));
        assert!(discretize_capacity(&[f64::NAN], 250.0, 50).is_err());
        assert!(discretize_capacity(&[1.0], 0.0, 50).is_err());
    }

    #[test]
    fn discretizer_is_monotone_and_onto() {
        let values: Vec<f64> = (0..=50 * 250 * 4).map(|k| k as f64 / 4.0).collect();
        let bins = discretize_capacity(&values, DEFAULT_BIN_WIDTH, DEFAULT_NUM_BINS).unwrap();
        assert!(bins.windows(2).all(|w| w[0] <= w[1]));
        let mut seen = bins.clone();
        seen.dedup();
        assert_eq!(seen, (1..=50).collect::<Vec<_>>());
    }
}
