//! Threshold-based quantum extremum finding over a value table.
//!
//! Start from a uniformly random threshold index `y`. Repeatedly search, with
//! the unknown-count schedule, for any index strictly better than `y`; move
//! the threshold there on success. Stop when the call budget is spent or a
//! search comes back empty. Equal values never count as an improvement, so
//! on ties the current threshold is kept.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grover::{bbht_search, BbhtConfig, MarkTable};
use super::QueryLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhConfig {
    /// Budget as a multiple of sqrt(N).
    pub c_dh: f64,
    pub bbht: BbhtConfig,
}

impl Default for DhConfig {
    fn default() -> Self {
        Self { c_dh: 22.5, bbht: BbhtConfig::default() }
    }
}

impl DhConfig {
    pub fn budget(&self, size: usize) -> u64 {
        (self.c_dh * (size as f64).sqrt()).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhOutcome {
    pub index: usize,
    pub calls: u64,
    /// Threshold index after every update, starting with the random draw.
    pub thresholds: Vec<usize>,
}

impl DhOutcome {
    /// True if the threshold value never got worse along the run.
    pub fn is_monotone(&self, values: &[f64], mode: Extremum) -> bool {
        self.thresholds.windows(2).all(|w| match mode {
            Extremum::Min => values[w[1]] <= values[w[0]],
            Extremum::Max => values[w[1]] >= values[w[0]],
        })
    }
}

/// Finds an extremal index of `values` with O(sqrt(N)) expected oracle calls.
/// Max mode runs the minimum finder on negated values.
pub fn dh_extremum<R: Rng + ?Sized>(
    values: &[f64],
    mode: Extremum,
    config: &DhConfig,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> DhOutcome {
    assert!(!values.is_empty(), "empty table");
    match mode {
        Extremum::Min => dh_minimum(values, config, rng, ledger),
        Extremum::Max => {
            let negated: Vec<f64> = values.iter().map(|v| -v).collect();
            dh_minimum(&negated, config, rng, ledger)
        }
    }
}

fn dh_minimum<R: Rng + ?Sized>(
    values: &[f64],
    config: &DhConfig,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> DhOutcome {
    let n = values.len();
    let budget = config.budget(n);
    let mut threshold = rng.gen_range(0..n);
    let mut thresholds = vec![threshold];
    let mut calls = 0u64;
    while calls < budget {
        let bound = values[threshold];
        let better = MarkTable::from_predicate(n, |i| values[i] < bound);
        let search = config.bbht.with_max_calls(budget - calls);
        let out = bbht_search(&better, &search, rng, ledger);
        calls += out.calls;
        match out.found {
            Some(i) => {
                threshold = i;
                thresholds.push(i);
            }
            None => break,
        }
    }
    DhOutcome { index: threshold, calls, thresholds }
}
