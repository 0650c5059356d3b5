//! The quantum-enhanced agent and its budget-matched comparison against the
//! classical PS agent it wraps.
//!
//! The hybrid agent first explores without being tested, running amplitude
//! amplification against the oracularized environment. Once it holds a
//! rewarding action sequence (with the percepts it scavenged along the way),
//! it trains an internal copy of the classical agent on that sequence, which
//! costs no interaction, and hands control to the trained copy for tested
//! classical exploitation. Every oracle call is charged `2M` steps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{play_epoch, PsAgent, RandomAgent};
use crate::env::{decode_sequence, EnvSpec};
use crate::error::{Error, Result};
use crate::interaction::{apply_tester, epoch_average_reward, Action, History, Percept, TesterSchedule, TesterSpec, Transcript};
use crate::quantum::oracle::kickback_game;
use crate::quantum::{bbht_search, BbhtConfig, OracularizedEnv, QueryLedger};
use crate::seed::stream_rng;

/// RNG stream for interaction with the environment (both arms).
const STREAM_INTERACT: u64 = 0;
/// RNG stream for the hybrid agent's quantum exploration.
const STREAM_EXPLORE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridConfig {
    /// Replay epochs used to train the lucky copy.
    pub replay_count: usize,
    /// Fraction of the total budget the exploration phase may use.
    pub explore_fraction: f64,
    pub bbht: BbhtConfig,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self { replay_count: 10, explore_fraction: 0.5, bbht: BbhtConfig::default() }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.explore_fraction) {
            return Err(Error::config("explore_fraction", "must lie in [0, 1]"));
        }
        if self.bbht.growth <= 1.0 {
            return Err(Error::config("bbht.growth", "must exceed 1"));
        }
        if self.bbht.c_stop <= 0.0 {
            return Err(Error::config("bbht.c_stop", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Exploring,
    Exploiting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundSequence {
    pub actions: Vec<Action>,
    /// Percepts emitted after each action.
    pub percepts: Vec<Percept>,
}

#[derive(Debug, Clone)]
pub struct HybridAgent {
    inner: PsAgent,
    exploration_budget: u64,
    found: Vec<FoundSequence>,
    phase: Phase,
    ledger: QueryLedger,
    config: HybridConfig,
}

impl HybridAgent {
    /// `exploration_budget` is in interaction steps.
    pub fn new(inner: PsAgent, spec: &EnvSpec, exploration_budget: u64, config: HybridConfig) -> Self {
        Self {
            inner,
            exploration_budget,
            found: Vec::new(),
            phase: Phase::Exploring,
            ledger: QueryLedger::new(spec.episode_length()),
            config,
        }
    }

    pub fn inner(&self) -> &PsAgent {
        &self.inner
    }

    pub fn found(&self) -> &[FoundSequence] {
        &self.found
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn exploration_budget(&self) -> u64 {
        self.exploration_budget
    }

    /// Stores a sequence after checking that it is rewarding. The percepts
    /// are the ones the kickback game hands back to the agent.
    pub fn record_found(&mut self, spec: &EnvSpec, actions: Vec<Action>) -> Result<()> {
        let game = kickback_game(spec, &actions)?;
        if game.phase != -1 {
            return Err(Error::NotRewarding);
        }
        self.found.push(FoundSequence { actions, percepts: game.percepts });
        Ok(())
    }

    /// Untested quantum exploration. Stops at the first rewarding sequence or
    /// when the next oracle call would exceed the exploration budget.
    pub fn explore<R: Rng + ?Sized>(&mut self, oracle: &OracularizedEnv, spec: &EnvSpec, rng: &mut R) -> Result<bool> {
        if self.phase != Phase::Exploring {
            return Err(Error::WrongPhase { expected: "exploring" });
        }
        if oracle.episode_length() != spec.episode_length() {
            return Err(Error::LedgerViolation("oracle and environment disagree on M".into()));
        }
        let per_call = self.ledger.steps_per_oracle_call();
        let mut remaining = self.exploration_budget.saturating_sub(self.ledger.interaction_steps()) / per_call;
        while remaining > 0 {
            let cfg = self.config.bbht.with_max_calls(remaining);
            let out = bbht_search(oracle, &cfg, rng, &mut self.ledger);
            remaining -= out.calls;
            if let Some(index) = out.found {
                let actions = decode_sequence(index, spec.n_actions(), spec.episode_length());
                self.record_found(spec, actions)?;
                return Ok(true);
            }
        }
        self.ledger.verify()?;
        Ok(false)
    }

    /// Trains the lucky copy by replaying the first found sequence
    /// `replay_count` times with reward 1. Charges nothing.
    pub fn train_lucky(&mut self, spec: &EnvSpec, replay_count: usize) {
        let Some(seq) = self.found.first() else { return };
        let mut lucky = self.inner.clone();
        let trace: Vec<(Percept, Action)> = std::iter::once(spec.start_percept())
            .chain(seq.percepts.iter().copied())
            .zip(seq.actions.iter().copied())
            .collect();
        for _ in 0..replay_count {
            lucky.ps_update(&trace, 1);
        }
        self.inner = lucky;
    }

    /// Tested classical exploitation for `epochs` epochs; the agent keeps
    /// learning. Charges `M` steps per epoch.
    pub fn exploit<R: Rng + ?Sized>(
        &mut self,
        spec: &EnvSpec,
        tester: &TesterSchedule,
        epochs: usize,
        rng: &mut R,
    ) -> Result<(Transcript, Option<usize>)> {
        if self.phase != Phase::Exploring {
            return Err(Error::WrongPhase { expected: "exploring" });
        }
        self.phase = Phase::Exploiting;
        let (history, first) = run_classical(&mut self.inner, spec, epochs, rng, &mut self.ledger)?;
        Ok((apply_tester(&history, tester)?, first))
    }
}

/// Plays `epochs` learning epochs, charging the ledger. Returns the history
/// and the first rewarded epoch.
fn run_classical<R: Rng + ?Sized>(
    agent: &mut PsAgent,
    spec: &EnvSpec,
    epochs: usize,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<(History, Option<usize>)> {
    let mut history = History::new();
    let mut first = None;
    for epoch in 0..epochs {
        let out = play_epoch(agent, spec, rng, true, Some((&mut history, epoch)))?;
        ledger.charge_classical_epoch();
        if out.reward == 1 && first.is_none() {
            first = Some(epoch);
        }
    }
    ledger.verify()?;
    Ok((history, first))
}

/// Settings for one budget-matched comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub gamma: f64,
    pub eta: f64,
    /// Total interaction steps available to each arm.
    pub total_steps: u64,
    pub tester: TesterSpec,
    pub hybrid: HybridConfig,
}

impl ComparisonConfig {
    /// `2M * ceil(8 sqrt N) + M * exploit_epochs`.
    pub fn matched_budget(spec: &EnvSpec, exploit_epochs: u64) -> Result<u64> {
        let n = spec.guarded_size()? as f64;
        let m = spec.episode_length() as u64;
        Ok(2 * m * (8.0 * n.sqrt()).ceil() as u64 + m * exploit_epochs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmResult {
    pub merit: f64,
    /// True if the arm ever obtained a reward (for the hybrid, a found
    /// sequence also counts).
    pub succeeded: bool,
    pub first_reward_epoch: Option<usize>,
    pub epochs: usize,
    pub ledger: QueryLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub classical: ArmResult,
    pub hybrid: ArmResult,
    pub found: bool,
    /// The budget did not allow a single oracle call.
    pub pure_classical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub runs: Vec<SeedComparison>,
}

impl ComparisonReport {
    pub fn classical_merits(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.classical.merit).collect()
    }

    pub fn hybrid_merits(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.hybrid.merit).collect()
    }

    pub fn classical_success_rate(&self) -> f64 {
        fraction(self.runs.iter().map(|r| r.classical.succeeded))
    }

    pub fn hybrid_success_rate(&self) -> f64 {
        fraction(self.runs.iter().map(|r| r.hybrid.succeeded))
    }
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (hits, n) = flags.fold((0usize, 0usize), |(h, n), f| (h + usize::from(f), n + 1));
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// Runs both arms on one seed with the same budget. The classical arm and
/// the hybrid's exploitation draw from the same stream, so with no
/// exploration the two arms produce identical transcripts.
pub fn compare_seed(
    spec: &EnvSpec,
    oracle: &OracularizedEnv,
    cfg: &ComparisonConfig,
    seed: u64,
) -> Result<SeedComparison> {
    cfg.hybrid.validate()?;
    let m = spec.episode_length();
    let per_call = 2 * m as u64;

    let mut classical = PsAgent::new(spec.n_actions(), cfg.gamma, cfg.eta)?;
    let mut c_ledger = QueryLedger::new(m);
    let c_epochs = (cfg.total_steps / m as u64) as usize;
    let mut rng = stream_rng(seed, STREAM_INTERACT);
    let (history, c_first) = run_classical(&mut classical, spec, c_epochs, &mut rng, &mut c_ledger)?;
    let c_transcript = apply_tester(&history, &cfg.tester.schedule(c_epochs, m))?;
    let classical = ArmResult {
        merit: epoch_average_reward(&c_transcript),
        succeeded: c_first.is_some(),
        first_reward_epoch: c_first,
        epochs: c_epochs,
        ledger: c_ledger,
    };

    let explore_budget = (cfg.hybrid.explore_fraction * cfg.total_steps as f64).floor() as u64;
    let pure_classical = cfg.total_steps < per_call || explore_budget < per_call;
    let inner = PsAgent::new(spec.n_actions(), cfg.gamma, cfg.eta)?;
    let mut agent = HybridAgent::new(inner, spec, if pure_classical { 0 } else { explore_budget }, cfg.hybrid);
    let found = agent.explore(oracle, spec, &mut stream_rng(seed, STREAM_EXPLORE))?;
    agent.train_lucky(spec, cfg.hybrid.replay_count);
    let spent = agent.ledger().interaction_steps();
    let h_epochs = ((cfg.total_steps - spent) / m as u64) as usize;
    let mut rng = stream_rng(seed, STREAM_INTERACT);
    let (h_transcript, h_first) = agent.exploit(spec, &cfg.tester.schedule(h_epochs, m), h_epochs, &mut rng)?;
    let h_ledger = *agent.ledger();
    if h_ledger.interaction_steps() > cfg.total_steps || c_ledger.interaction_steps() > cfg.total_steps {
        return Err(Error::LedgerViolation("an arm exceeded the shared budget".into()));
    }
    let hybrid = ArmResult {
        merit: epoch_average_reward(&h_transcript),
        succeeded: found || h_first.is_some(),
        first_reward_epoch: h_first,
        epochs: h_epochs,
        ledger: h_ledger,
    };
    Ok(SeedComparison { seed, classical, hybrid, found, pure_classical })
}

/// Runs [`compare_seed`] for each seed, in parallel, keeping seed order.
pub fn compare_budgeted(
    spec: &EnvSpec,
    oracle: &OracularizedEnv,
    cfg: &ComparisonConfig,
    seeds: &[u64],
) -> Result<ComparisonReport> {
    use rayon::prelude::*;
    let runs = seeds
        .par_iter()
        .map(|&seed| compare_seed(spec, oracle, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { runs })
}

/// One seed of the exploration experiment: quantum search under a step
/// budget next to classical uniform sampling of whole epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExploreRun {
    pub seed: u64,
    pub quantum_found: bool,
    pub quantum: QueryLedger,
    /// Epochs up to and including the first rewarded one; `None` if the cap
    /// was reached first.
    pub classical_trials: Option<u64>,
    pub classical: QueryLedger,
}

/// Runs both exploration strategies for one seed. The classical arm plays
/// uniformly random epochs until the first reward or `classical_cap` epochs.
pub fn explore_seed(
    spec: &EnvSpec,
    oracle: &OracularizedEnv,
    budget_steps: u64,
    classical_cap: u64,
    bbht: BbhtConfig,
    seed: u64,
) -> Result<ExploreRun> {
    let config = HybridConfig { bbht, ..HybridConfig::default() };
    let mut agent = HybridAgent::new(PsAgent::new(spec.n_actions(), 0.0, 1.0)?, spec, budget_steps, config);
    let quantum_found = agent.explore(oracle, spec, &mut stream_rng(seed, STREAM_EXPLORE))?;

    let mut random = RandomAgent::new(spec.n_actions());
    let mut rng = stream_rng(seed, STREAM_INTERACT);
    let mut classical = QueryLedger::new(spec.episode_length());
    let mut classical_trials = None;
    for trial in 1..=classical_cap {
        let out = play_epoch(&mut random, spec, &mut rng, false, None)?;
        classical.charge_classical_epoch();
        if out.reward == 1 {
            classical_trials = Some(trial);
            break;
        }
    }
    classical.verify()?;
    Ok(ExploreRun { seed, quantum_found, quantum: *agent.ledger(), classical_trials, classical })
}
