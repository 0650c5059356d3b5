//! Metalearning over the PS metaparameters `k = (gamma, eta)`.
//!
//! `eval(k)` trains a fresh agent with metaparameters `k` and scores it with
//! learning frozen. All randomness comes from a fixed replicate seed policy,
//! so `eval` is a deterministic function of `k` and the table of its values
//! can serve as a phase oracle. Three optimizers run over that table:
//! exhaustive grid search, bisection on unimodal axes, and quantum extremum
//! finding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{play_epoch, PsAgent};
use crate::env::{EnvSpec, ENUMERATION_GUARD};
use crate::error::{Error, Result};
use crate::quantum::{dh_extremum, DhConfig, DhOutcome, Extremum, QueryLedger, StateVector};
use crate::seed::{derive_seed, stream_rng};

/// Cartesian grid over `(gamma, eta)`, flattened row-major with gamma as the
/// outer axis: `index = gamma_index * eta.len() + eta_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaParamGrid {
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
}

impl MetaParamGrid {
    pub fn new(gamma: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let grid = Self { gamma, eta };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("gamma", &self.gamma), ("eta", &self.eta)] {
            if axis.is_empty() {
                return Err(Error::config(name, "axis must not be empty"));
            }
            if let Some(v) = axis.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::config(name, format!("value {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// 16 gamma values evenly spaced over [0, 1] and eta in {1/8, ..., 1}.
    pub fn default_16x8() -> Self {
        Self { gamma: linspace(0.0, 1.0, 16), eta: (1..=8).map(|i| i as f64 / 8.0).collect() }
    }

    pub fn len(&self) -> usize {
        self.gamma.len() * self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, gamma_index: usize, eta_index: usize) -> usize {
        gamma_index * self.eta.len() + eta_index
    }

    /// `(gamma, eta)` at a flat index.
    pub fn point(&self, index: usize) -> (f64, f64) {
        (self.gamma[index / self.eta.len()], self.eta[index % self.eta.len()])
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Replicate seeds for `eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedPolicy {
    pub base: u64,
    pub replicates: usize,
    /// Common random numbers: replicate `i` uses the same seed for every
    /// `k`, so differences between configurations are not seed noise.
    pub common: bool,
}

impl Default for SeedPolicy {
    fn default() -> Self {
        Self { base: 0, replicates: 32, common: true }
    }
}

impl SeedPolicy {
    pub fn seed(&self, k_index: usize, replicate: usize) -> u64 {
        let stream = if self.common { 0 } else { k_index as u64 + 1 };
        derive_seed(self.base, stream, replicate as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalContext {
    pub train_epochs: usize,
    pub eval_epochs: usize,
    pub seeds: SeedPolicy,
}

impl Default for EvalContext {
    fn default() -> Self {
        Self { train_epochs: 100, eval_epochs: 50, seeds: SeedPolicy::default() }
    }
}

/// Trains a fresh agent for `train_epochs`, then returns the fraction of
/// rewarded epochs among `eval_epochs` with learning frozen, averaged over
/// the replicate set in replicate order.
pub fn eval_config(gamma: f64, eta: f64, k_index: usize, spec: &EnvSpec, ctx: &EvalContext) -> Result<f64> {
    let mut total = 0.0;
    for rep in 0..ctx.seeds.replicates {
        let mut rng = stream_rng(ctx.seeds.seed(k_index, rep), 0);
        let mut agent = PsAgent::new(spec.n_actions(), gamma, eta)?;
        for _ in 0..ctx.train_epochs {
            play_epoch(&mut agent, spec, &mut rng, true, None)?;
        }
        let mut rewarded = 0usize;
        for _ in 0..ctx.eval_epochs {
            rewarded += usize::from(play_epoch(&mut agent, spec, &mut rng, false, None)?.reward);
        }
        total += if ctx.eval_epochs == 0 { 0.0 } else { rewarded as f64 / ctx.eval_epochs as f64 };
    }
    Ok(if ctx.seeds.replicates == 0 { 0.0 } else { total / ctx.seeds.replicates as f64 })
}

/// Source of `eval` values for a flat index space.
pub trait Evaluator: Sync {
    fn size(&self) -> usize;
    fn eval(&self, index: usize) -> Result<f64>;
}

impl Evaluator for Vec<f64> {
    fn size(&self) -> usize {
        self.len()
    }

    fn eval(&self, index: usize) -> Result<f64> {
        Ok(self[index])
    }
}

/// `eval_config` over a grid in one environment.
pub struct GridEvaluator<'a> {
    pub spec: &'a EnvSpec,
    pub grid: &'a MetaParamGrid,
    pub ctx: EvalContext,
}

impl Evaluator for GridEvaluator<'_> {
    fn size(&self) -> usize {
        self.grid.len()
    }

    fn eval(&self, index: usize) -> Result<f64> {
        let (gamma, eta) = self.grid.point(index);
        eval_config(gamma, eta, index, self.spec, &self.ctx)
    }
}

/// Memoized `eval` values. `queries` counts distinct evaluations.
pub struct EvalTable<'a> {
    source: &'a dyn Evaluator,
    cache: Vec<Option<f64>>,
    queries: usize,
}

impl<'a> EvalTable<'a> {
    pub fn new(source: &'a dyn Evaluator) -> Self {
        Self { cache: vec![None; source.size()], source, queries: 0 }
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn get(&mut self, index: usize) -> Result<f64> {
        if let Some(v) = self.cache[index] {
            return Ok(v);
        }
        let v = self.source.eval(index)?;
        self.cache[index] = Some(v);
        self.queries += 1;
        Ok(v)
    }

    /// Evaluates every missing entry (in parallel) and returns the table.
    pub fn fill(&mut self) -> Result<Vec<f64>> {
        let missing: Vec<usize> = (0..self.len()).filter(|&i| self.cache[i].is_none()).collect();
        let source = self.source;
        let fresh = missing.par_iter().map(|&i| source.eval(i)).collect::<Result<Vec<_>>>()?;
        for (i, v) in missing.into_iter().zip(fresh) {
            self.cache[i] = Some(v);
            self.queries += 1;
        }
        Ok(self.cache.iter().map(|v| v.expect("filled")).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchResult {
    pub index: usize,
    pub value: f64,
    pub queries: usize,
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Exhaustive search; ties go to the lowest index.
pub fn grid_search(table: &mut EvalTable) -> Result<SearchResult> {
    let values = table.fill()?;
    let index = argmax(&values);
    Ok(SearchResult { index, value: values[index], queries: table.queries() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnimodalResult {
    pub index: usize,
    pub value: f64,
    /// Distinct evaluations made by the bisection.
    pub queries: usize,
    /// Outcome of the full-sweep audit, when requested.
    pub unimodal: Option<bool>,
}

/// `2 ceil(log2 n)`.
pub fn unimodal_query_cap(n: usize) -> usize {
    2 * n.next_power_of_two().trailing_zeros() as usize
}

/// Bisection on the sign of `eval(i+1) - eval(i)`. Returns a local peak;
/// with `audit` set, also sweeps the whole axis to check unimodality.
pub fn unimodal_search(table: &mut EvalTable, audit: bool) -> Result<UnimodalResult> {
    if table.is_empty() {
        return Err(Error::config("grid", "axis must not be empty"));
    }
    let (mut lo, mut hi) = (0, table.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if table.get(mid)? < table.get(mid + 1)? {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    // a one-point axis needs no comparison; reading back the value of the
    // returned index is not part of the search
    let queries = table.queries();
    let value = table.get(lo)?;
    let unimodal = if audit { Some(is_unimodal(&table.fill()?)) } else { None };
    Ok(UnimodalResult { index: lo, value, queries, unimodal })
}

/// Strictly increasing up to the first maximum, non-increasing after it.
pub fn is_unimodal(values: &[f64]) -> bool {
    let peak = argmax(values);
    values[..=peak].windows(2).all(|w| w[0] < w[1]) && values[peak..].windows(2).all(|w| w[0] >= w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantumMetaResult {
    pub index: usize,
    pub value: f64,
    pub ledger: QueryLedger,
    pub thresholds: Vec<usize>,
}

/// Quantum maximum finding over the eval table. The table is materialized
/// first (the oracle marks `eval(i) > eval(threshold)` for all `i` at once);
/// every oracle call is recorded in the returned ledger.
pub fn quantum_meta_opt<R: Rng + ?Sized>(table: &mut EvalTable, cfg: &DhConfig, rng: &mut R) -> Result<QuantumMetaResult> {
    let values = table.fill()?;
    let mut ledger = QueryLedger::new(0);
    let DhOutcome { index, thresholds, .. } = dh_extremum(&values, Extremum::Max, cfg, rng, &mut ledger);
    ledger.verify()?;
    Ok(QuantumMetaResult { index, value: values[index], ledger, thresholds })
}

/// Uniform superposition over `|k>|bin(eval(k))>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperposedState {
    bins: usize,
    bin_of: Vec<usize>,
    state: StateVector,
}

/// Bin of a value in `bins` uniform bins over [0, 1]; 1.0 lands in the top bin.
pub fn eval_bin(value: f64, bins: usize) -> usize {
    ((value.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1)
}

impl SuperposedState {
    pub fn build(evals: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || evals.is_empty() {
            return Err(Error::config("bins", "need at least one bin and one configuration"));
        }
        let size = evals.len() as u128 * bins as u128;
        if size > ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard { size, guard: ENUMERATION_GUARD });
        }
        let bin_of: Vec<usize> = evals.iter().map(|&v| eval_bin(v, bins)).collect();
        let amp = 1.0 / (evals.len() as f64).sqrt();
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); evals.len() * bins];
        for (k, &b) in bin_of.iter().enumerate() {
            amps[k * bins + b] = num_complex::Complex64::new(amp, 0.0);
        }
        Ok(Self { bins, bin_of, state: StateVector::from_amplitudes(amps)? })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn n_configs(&self) -> usize {
        self.bin_of.len()
    }

    /// Measures the configuration register.
    pub fn measure_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.state.measure(rng) / self.bins
    }

    /// Measures the eval register; returns the bin and the configurations
    /// the `k` register collapses onto.
    pub fn measure_eval<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<usize>) {
        let bin = self.state.measure(rng) % self.bins;
        (bin, self.preimage(bin))
    }

    /// Configurations whose eval falls in `bin`, in index order.
    pub fn preimage(&self, bin: usize) -> Vec<usize> {
        self.bin_of.iter().enumerate().filter(|(_, &b)| b == bin).map(|(k, _)| k).collect()
    }

    /// Post-selects the eval register on `bin`; `None` if it has no support.
    pub fn postselect(&self, bin: usize) -> Option<StateVector> {
        let keep = self.preimage(bin);
        if keep.is_empty() {
            return None;
        }
        let amp = 1.0 / (keep.len() as f64).sqrt();
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); self.n_configs()];
        for k in keep {
            amps[k] = num_complex::Complex64::new(amp, 0.0);
        }
        StateVector::from_amplitudes(amps).ok()
    }

    pub fn max_bin(&self) -> usize {
        *self.bin_of.iter().max().expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_low_connectivity_maze, reference_maze};
    use crate::seed::stream_rng;

    #[test]
    fn grid_search_examples() {
        let t = vec![0.1, 0.9, 0.3];
        let r = grid_search(&mut EvalTable::new(&t)).unwrap();
        assert_eq!((r.index, r.queries), (1, 3));
        let flat = vec![0.5; 6];
        assert_eq!(grid_search(&mut EvalTable::new(&flat)).unwrap().index, 0);
    }

    #[test]
    fn bisection_examples() {
        let peaked: Vec<f64> = (0..16).map(|i| -((i as f64) - 9.0).abs()).collect();
        let r = unimodal_search(&mut EvalTable::new(&peaked), true).unwrap();
        assert_eq!(r.index, 9);
        assert!(r.queries <= 8);
        assert_eq!(r.unimodal, Some(true));
        let mut rising: Vec<f64> = (0..16).map(f64::from).collect();
        assert_eq!(unimodal_search(&mut EvalTable::new(&rising), false).unwrap().index, 15);
        rising.reverse();
        assert_eq!(unimodal_search(&mut EvalTable::new(&rising), false).unwrap().index, 0);
    }

    #[test]
    fn audit_flags_two_peaks() {
        let t = vec![0.0, 2.0, 1.0, 3.0, 0.0];
        let r = unimodal_search(&mut EvalTable::new(&t), true).unwrap();
        assert_eq!(r.unimodal, Some(false));
        assert!(r.index == 1 || r.index == 3);
    }

    #[test]
    fn single_point_axis_needs_no_queries() {
        let r = unimodal_search(&mut EvalTable::new(&vec![0.3]), false).unwrap();
        assert_eq!((r.index, r.queries, r.value), (0, 0, 0.3));
    }

    #[test]
    fn query_cap_values() {
        assert_eq!(unimodal_query_cap(1), 0);
        assert_eq!(unimodal_query_cap(2), 2);
        assert_eq!(unimodal_query_cap(16), 8);
        assert_eq!(unimodal_query_cap(17), 10);
    }

    #[test]
    fn eval_is_deterministic() {
        let spec = reference_maze();
        let ctx = EvalContext { train_epochs: 20, eval_epochs: 10, seeds: SeedPolicy { replicates: 4, ..Default::default() } };
        let a = eval_config(0.1, 0.5, 3, &spec, &ctx).unwrap();
        let b = eval_config(0.1, 0.5, 3, &spec, &ctx).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn untrained_eval_is_near_the_random_rate() {
        let spec = reference_maze();
        let ctx = EvalContext { train_epochs: 0, eval_epochs: 100, seeds: SeedPolicy::default() };
        for (gamma, eta) in [(0.0, 1.0), (0.5, 0.25)] {
            let v = eval_config(gamma, eta, 0, &spec, &ctx).unwrap();
            // 3200 Bernoulli(1/8) draws: sd ~ 0.006
            assert!((v - 0.125).abs() < 0.03, "{v}");
        }
    }

    #[test]
    fn full_forgetting_stays_near_random() {
        let spec = make_low_connectivity_maze(2);
        let ctx = EvalContext::default();
        let v = eval_config(1.0, 1.0, 0, &spec, &ctx).unwrap();
        assert!(v < 0.2, "{v}");
        let learned = eval_config(0.0, 1.0, 0, &spec, &ctx).unwrap();
        assert!(learned > v);
    }

    #[test]
    fn quantum_opt_on_three_entries_is_exact() {
        let t = vec![0.2, 0.7, 0.4];
        for seed in 0..30 {
            let r = quantum_meta_opt(&mut EvalTable::new(&t), &DhConfig::default(), &mut stream_rng(seed, 0)).unwrap();
            assert_eq!(r.index, 1);
            assert!(r.value >= t[r.thresholds[0]]);
        }
    }

    #[test]
    fn superposed_state_marginals() {
        let evals = vec![0.05, 0.9, 0.5, 0.95, 0.06];
        let s = SuperposedState::build(&evals, 16).unwrap();
        assert!(s.state().is_normalized());
        for k in 0..5 {
            let p = s.state().mass_where(|i| i / 16 == k);
            assert!((p - 0.2).abs() < 1e-12);
        }
        assert_eq!(s.max_bin(), 15);
        assert_eq!(s.preimage(15), vec![3]);
        assert_eq!(s.preimage(0), vec![0, 4]);
        let post = s.postselect(0).unwrap();
        assert!((post.probability(0) - 0.5).abs() < 1e-12);
        assert!(s.postselect(7).is_none());
    }

    #[test]
    fn one_bin_gives_constant_eval_register() {
        let s = SuperposedState::build(&[0.1, 0.2, 0.3], 1).unwrap();
        assert_eq!(s.preimage(0), vec![0, 1, 2]);
        let mut rng = stream_rng(1, 0);
        assert!((0..50).all(|_| s.measure_eval(&mut rng).0 == 0));
    }

    #[test]
    fn grid_layout() {
        let g = MetaParamGrid::default_16x8();
        assert_eq!(g.len(), 128);
        assert_eq!(g.point(g.index(15, 7)), (1.0, 1.0));
        assert_eq!(g.point(9), (g.gamma[1], 0.25));
        assert!(MetaParamGrid::new(vec![], vec![0.5]).is_err());
        assert!(MetaParamGrid::new(vec![1.5], vec![0.5]).is_err());
    }
}
