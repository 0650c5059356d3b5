//! Amplitude amplification over action-sequence space.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{QueryLedger, StateVector};
use crate::error::{Error, Result};

/// A phase oracle `|i> -> (-1)^{f(i)} |i>` over `0..size()`.
pub trait Oracle: Sync {
    fn size(&self) -> usize;
    fn is_marked(&self, index: usize) -> bool;

    fn marked_count(&self) -> usize {
        (0..self.size()).filter(|&i| self.is_marked(i)).count()
    }
}

/// Oracle backed by an explicit truth table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkTable {
    marks: Vec<bool>,
    count: usize,
}

impl MarkTable {
    pub fn new(marks: Vec<bool>) -> Self {
        assert!(!marks.is_empty(), "empty mark table");
        let count = marks.iter().filter(|&&m| m).count();
        Self { marks, count }
    }

    pub fn from_predicate(n: usize, pred: impl Fn(usize) -> bool) -> Self {
        Self::new((0..n).map(pred).collect())
    }

    /// Marks exactly the given indices.
    pub fn with_marked(n: usize, marked: &[usize]) -> Self {
        let mut marks = vec![false; n];
        for &i in marked {
            marks[i] = true;
        }
        Self::new(marks)
    }
}

impl Oracle for MarkTable {
    fn size(&self) -> usize {
        self.marks.len()
    }

    fn is_marked(&self, index: usize) -> bool {
        self.marks[index]
    }

    fn marked_count(&self) -> usize {
        self.count
    }
}

/// Applies `(-1)^{f(i)}` and charges one oracle call.
pub fn phase_oracle<O: Oracle + ?Sized>(state: &mut StateVector, oracle: &O, ledger: &mut QueryLedger) {
    debug_assert_eq!(state.len(), oracle.size());
    state.apply_diagonal(|i| if oracle.is_marked(i) { -1.0 } else { 1.0 });
    ledger.charge_oracle_call();
}

/// Inversion about the mean.
pub fn diffusion(state: &mut StateVector) {
    state.reflect_about_uniform();
}

pub fn grover_iteration<O: Oracle + ?Sized>(state: &mut StateVector, oracle: &O, ledger: &mut QueryLedger) {
    phase_oracle(state, oracle, ledger);
    diffusion(state);
}

/// sin^2((2j+1) theta) with sin theta = sqrt(k/N); 0 when k = 0.
pub fn grover_success_probability(iterations: u64, marked: u64, size: u64) -> f64 {
    assert!(size > 0 && marked <= size, "need 0 <= k <= N, N > 0");
    if marked == 0 {
        return 0.0;
    }
    let theta = ((marked as f64) / (size as f64)).sqrt().asin();
    ((2 * iterations + 1) as f64 * theta).sin().powi(2)
}

/// Nearest integer to pi/(4 theta) - 1/2.
pub fn optimal_iterations(marked: u64, size: u64) -> u64 {
    assert!(marked >= 1 && marked <= size);
    let theta = ((marked as f64) / (size as f64)).sqrt().asin();
    (PI / (4.0 * theta) - 0.5).round().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroverOutcome {
    pub index: usize,
    pub marked: bool,
    pub iterations: u64,
}

/// Grover search with a known number of marked items.
pub fn grover_search_known_k<O, R>(
    oracle: &O,
    marked: usize,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<GroverOutcome>
where
    O: Oracle + ?Sized,
    R: Rng + ?Sized,
{
    if marked == 0 {
        return Err(Error::NoSolution);
    }
    let iterations = optimal_iterations(marked as u64, oracle.size() as u64);
    let mut state = StateVector::uniform(oracle.size());
    for _ in 0..iterations {
        grover_iteration(&mut state, oracle, ledger);
    }
    let index = state.measure(rng);
    Ok(GroverOutcome { index, marked: oracle.is_marked(index), iterations })
}

/// Schedule for search with an unknown number of marked items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbhtConfig {
    /// Growth factor of the critical iteration bound.
    pub growth: f64,
    /// Call cap as a multiple of sqrt(N).
    pub c_stop: f64,
    /// Optional extra cap on total calls (e.g. a remaining budget).
    pub max_calls: Option<u64>,
}

impl Default for BbhtConfig {
    fn default() -> Self {
        Self { growth: 6.0 / 5.0, c_stop: 30.0, max_calls: None }
    }
}

impl BbhtConfig {
    pub fn with_max_calls(self, max_calls: u64) -> Self {
        Self { max_calls: Some(max_calls), ..self }
    }

    pub fn cap(&self, size: usize) -> u64 {
        let cap = (self.c_stop * (size as f64).sqrt()).ceil() as u64;
        self.max_calls.map_or(cap, |m| cap.min(m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BbhtOutcome {
    pub found: Option<usize>,
    /// Oracle calls, including one classical check per round.
    pub calls: u64,
    pub rounds: u64,
}

/// Randomized-schedule amplitude amplification.
///
/// Each round draws `j` uniformly from `0..ceil(m)`, runs `j` Grover
/// iterations from the uniform state, measures, and checks the candidate at
/// the cost of one more call. `m` grows by `growth` per round up to sqrt(N).
/// The last round is truncated so that the total never exceeds the cap; an
/// empty marked set therefore consumes exactly the cap.
pub fn bbht_search<O, R>(oracle: &O, config: &BbhtConfig, rng: &mut R, ledger: &mut QueryLedger) -> BbhtOutcome
where
    O: Oracle + ?Sized,
    R: Rng + ?Sized,
{
    let n = oracle.size();
    let cap = config.cap(n);
    let sqrt_n = (n as f64).sqrt();
    let mut bound = 1.0f64;
    let mut calls = 0u64;
    let mut rounds = 0u64;
    while calls < cap {
        rounds += 1;
        let mut j = rng.gen_range(0..bound.ceil() as u64);
        if calls + j + 1 > cap {
            j = cap - calls - 1;
        }
        let mut state = StateVector::uniform(n);
        for _ in 0..j {
            grover_iteration(&mut state, oracle, ledger);
        }
        let candidate = state.measure(rng);
        ledger.charge_oracle_call();
        calls += j + 1;
        if oracle.is_marked(candidate) {
            return BbhtOutcome { found: Some(candidate), calls, rounds };
        }
        bound = (bound * config.growth).min(sqrt_n);
    }
    BbhtOutcome { found: None, calls, rounds }
}
