//! Black-box construction of the phase oracle from an interactive,
//! deterministic, single-reward environment.
//!
//! Each computational-basis branch `|a_1..a_M>` is simulated on its own;
//! a deterministic environment never splits or merges branches. One oracle
//! invocation is:
//!
//! 1. **Kickback game.** The agent plants `|phi->` (the -1 eigenstate of the
//!    reward flip `X`) in the environment's reward slot and plays a full game
//!    committing to `a_1..a_M`. The environment keeps the actions; the agent
//!    scavenges every emitted percept and finally the reward system, which
//!    comes back as `(-1)^R |phi->`.
//! 2. **Re-implantation.** The agent writes the scavenged percepts back into
//!    the environment's percept slots and plants a `|phi+>` reward system.
//! 3. **Raw game.** A second full game. Each step map `E^{a_1..a_t}` swaps
//!    `|eps>` and `|s_{t+1}>` and so, being an involution, clears the
//!    implanted slot; the stored actions are handed back to the agent.
//!
//! Afterwards the action register is back with the agent, every environment
//! slot is `|eps>`, and the two reward systems are branch independent, so
//! the net effect on the action register is `(-1)^Lambda(a)`. Cost: `2M`
//! interaction steps.

use rayon::prelude::*;

use super::grover::{MarkTable, Oracle};
use super::{phase_oracle, QueryLedger, StateVector, NORM_TOLERANCE};
use crate::env::{decode_sequence, EnvSpec};
use crate::error::{Error, Result};
use crate::interaction::{Action, Percept};

/// A two-level system with real amplitudes over `|0>, |1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit(pub [f64; 2]);

impl Qubit {
    pub const ZERO: Qubit = Qubit([1.0, 0.0]);

    pub fn phi_minus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Qubit([r, -r])
    }

    pub fn phi_plus() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Qubit([r, r])
    }

    /// Pauli-X.
    pub fn flip(self) -> Self {
        Qubit([self.0[1], self.0[0]])
    }

    pub fn overlap(self, other: Qubit) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    fn close_to(self, other: Qubit) -> bool {
        (self.0[0] - other.0[0]).abs() <= NORM_TOLERANCE && (self.0[1] - other.0[1]).abs() <= NORM_TOLERANCE
    }
}

/// How the agent prepares the reward system it plants for the first game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KickbackPrep {
    PhiMinus,
    PhiPlus,
    /// `|0>`: not an eigenstate of the flip, so rewarded branches stay
    /// entangled with it.
    Computational,
}

impl KickbackPrep {
    pub fn state(self) -> Qubit {
        match self {
            KickbackPrep::PhiMinus => Qubit::phi_minus(),
            KickbackPrep::PhiPlus => Qubit::phi_plus(),
            KickbackPrep::Computational => Qubit::ZERO,
        }
    }
}

/// A percept slot: empty `|eps>` or holding a percept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Empty,
    Percept(Percept),
}

/// The step map `E^{a_1..a_t}` restricted to one slot: it swaps `|eps>` with
/// `|s_{t+1}>` and leaves every other state alone. Self-inverse.
pub fn step_involution(slot: Slot, emitted: Percept) -> Slot {
    match slot {
        Slot::Empty => Slot::Percept(emitted),
        Slot::Percept(p) if p == emitted => Slot::Empty,
        other => other,
    }
}

/// Register contents of one basis branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRegisters {
    pub rank: usize,
    pub sequence: Vec<Action>,
    /// Accumulated global phase of the branch (+1 or -1).
    pub phase: f64,
    pub agent_actions: Vec<Option<Action>>,
    pub agent_percepts: Vec<Slot>,
    pub env_actions: Vec<Option<Action>>,
    pub env_percepts: Vec<Slot>,
    pub env_reward: Option<Qubit>,
    /// Reward systems the agent has scavenged back, in order.
    pub agent_systems: Vec<Qubit>,
}

/// Everything except the action register and the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub agent_percepts: Vec<Slot>,
    pub env_actions: Vec<Option<Action>>,
    pub env_percepts: Vec<Slot>,
    pub env_reward: Option<Qubit>,
    pub agent_systems: Vec<Qubit>,
}

impl Residual {
    /// The branch-independent state every branch must end in.
    pub fn fiducial(episode_length: usize) -> Self {
        Self {
            agent_percepts: vec![Slot::Empty; episode_length],
            env_actions: vec![None; episode_length],
            env_percepts: vec![Slot::Empty; episode_length],
            env_reward: None,
            agent_systems: vec![Qubit::phi_minus(), Qubit::phi_plus()],
        }
    }

    fn matches(&self, other: &Residual) -> bool {
        self.agent_percepts == other.agent_percepts
            && self.env_actions == other.env_actions
            && self.env_percepts == other.env_percepts
            && self.env_reward.is_none() == other.env_reward.is_none()
            && self.agent_systems.len() == other.agent_systems.len()
            && self.agent_systems.iter().zip(&other.agent_systems).all(|(a, b)| a.close_to(*b))
    }
}

impl BranchRegisters {
    /// Agent holds `|a_1..a_M>`; every environment slot is `|eps>`.
    pub fn fiducial(spec: &EnvSpec, rank: usize) -> Self {
        let m = spec.episode_length();
        let sequence = decode_sequence(rank, spec.n_actions(), m);
        Self {
            rank,
            agent_actions: sequence.iter().copied().map(Some).collect(),
            sequence,
            phase: 1.0,
            agent_percepts: vec![Slot::Empty; m],
            env_actions: vec![None; m],
            env_percepts: vec![Slot::Empty; m],
            env_reward: None,
            agent_systems: Vec::new(),
        }
    }

    pub fn residual(&self) -> Residual {
        Residual {
            agent_percepts: self.agent_percepts.clone(),
            env_actions: self.env_actions.clone(),
            env_percepts: self.env_percepts.clone(),
            env_reward: self.env_reward,
            agent_systems: self.agent_systems.clone(),
        }
    }

    /// Hijacking: plant a reward system in the environment's reward slot.
    pub fn plant_reward_system(&mut self, prep: KickbackPrep) {
        self.env_reward = Some(prep.state());
    }

    /// Scavenging of the reward system. If it returned as `+-` the planted
    /// state, the sign is a global phase of the branch and is moved there.
    fn scavenge_reward_system(&mut self, planted: Qubit) {
        let Some(mut system) = self.env_reward.take() else { return };
        let overlap = planted.overlap(system);
        if (overlap.abs() - 1.0).abs() <= NORM_TOLERANCE {
            self.phase *= overlap.signum();
            system = planted;
        }
        self.agent_systems.push(system);
    }

    fn flip_reward_slot(&mut self) {
        if let Some(q) = self.env_reward.as_mut() {
            *q = q.flip();
        }
    }

    /// First full game: actions move to the environment, percepts are
    /// scavenged by the agent, the reward flip acts on the planted system.
    pub fn play_kickback(&mut self, spec: &EnvSpec, prep: KickbackPrep) -> Result<()> {
        self.plant_reward_system(prep);
        let mut env = spec.initial_state();
        for t in 0..spec.episode_length() {
            std::mem::swap(&mut self.agent_actions[t], &mut self.env_actions[t]);
            let action = self.env_actions[t].ok_or_else(|| self.failure("agent action slot was empty"))?;
            let out = spec.step(&mut env, action)?;
            self.env_percepts[t] = step_involution(self.env_percepts[t], out.percept);
            if out.reward == 1 {
                self.flip_reward_slot();
            }
            std::mem::swap(&mut self.agent_percepts[t], &mut self.env_percepts[t]);
        }
        self.scavenge_reward_system(prep.state());
        Ok(())
    }

    /// Hijacking: move the scavenged percepts back into the environment's
    /// percept slots.
    pub fn implant_percepts(&mut self) {
        for (agent, env) in self.agent_percepts.iter_mut().zip(self.env_percepts.iter_mut()) {
            std::mem::swap(agent, env);
        }
    }

    /// Second full game, with `|phi+>` in the reward slot. The step
    /// involutions clear the implanted percepts and the stored actions go
    /// back to the agent. Fails if any percept slot is left non-empty.
    pub fn play_raw(&mut self, spec: &EnvSpec) -> Result<()> {
        self.plant_reward_system(KickbackPrep::PhiPlus);
        let mut env = spec.initial_state();
        for t in 0..spec.episode_length() {
            let action = self.env_actions[t].ok_or_else(|| self.failure("environment action slot was empty"))?;
            let out = spec.step(&mut env, action)?;
            self.env_percepts[t] = step_involution(self.env_percepts[t], out.percept);
            if out.reward == 1 {
                self.flip_reward_slot();
            }
            std::mem::swap(&mut self.env_actions[t], &mut self.agent_actions[t]);
        }
        self.scavenge_reward_system(KickbackPrep::PhiPlus.state());
        if let Some(slot) = self.env_percepts.iter().position(|s| *s != Slot::Empty) {
            return Err(Error::PerceptVerification { branch: self.rank, slot });
        }
        Ok(())
    }

    fn failure(&self, reason: &str) -> Error {
        Error::ConstructionFailure {
            branch: self.rank,
            sequence: format!("{:?}", self.sequence),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KickbackOutcome {
    pub phase: i8,
    pub percepts: Vec<Percept>,
    pub env_actions: Vec<Action>,
    pub registers: BranchRegisters,
}

/// Plays the phase kickback game for one basis branch with `|phi->`.
pub fn kickback_game(spec: &EnvSpec, branch: &[Action]) -> Result<KickbackOutcome> {
    kickback_game_with(spec, branch, KickbackPrep::PhiMinus)
}

pub fn kickback_game_with(spec: &EnvSpec, branch: &[Action], prep: KickbackPrep) -> Result<KickbackOutcome> {
    let rank = branch_rank(spec, branch)?;
    let mut regs = BranchRegisters::fiducial(spec, rank);
    regs.play_kickback(spec, prep)?;
    let percepts = regs
        .agent_percepts
        .iter()
        .map(|s| match s {
            Slot::Percept(p) => Ok(*p),
            Slot::Empty => Err(regs.failure("no percept was scavenged")),
        })
        .collect::<Result<Vec<_>>>()?;
    let env_actions = regs.env_actions.iter().map(|a| a.expect("stored by the game")).collect();
    Ok(KickbackOutcome { phase: regs.phase.signum() as i8, percepts, env_actions, registers: regs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGameOutcome {
    pub agent_actions: Vec<Action>,
    pub registers: BranchRegisters,
}

/// Plays the raw game for `branch` starting from the post-kickback layout
/// (environment holds the actions) with `implanted` in the percept slots.
/// Inconsistent percepts are not cleared by the step maps and are reported
/// as [`Error::PerceptVerification`].
pub fn raw_game(spec: &EnvSpec, branch: &[Action], implanted: &[Percept]) -> Result<RawGameOutcome> {
    let rank = branch_rank(spec, branch)?;
    if implanted.len() != spec.episode_length() {
        return Err(Error::SequenceLength { expected: spec.episode_length(), got: implanted.len() });
    }
    let mut regs = BranchRegisters::fiducial(spec, rank);
    std::mem::swap(&mut regs.agent_actions, &mut regs.env_actions);
    regs.env_percepts = implanted.iter().map(|&p| Slot::Percept(p)).collect();
    regs.play_raw(spec)?;
    let agent_actions = regs
        .agent_actions
        .iter()
        .map(|a| a.ok_or_else(|| regs.failure("action not returned")))
        .collect::<Result<Vec<_>>>()?;
    Ok(RawGameOutcome { agent_actions, registers: regs })
}

fn branch_rank(spec: &EnvSpec, branch: &[Action]) -> Result<usize> {
    if branch.len() != spec.episode_length() {
        return Err(Error::SequenceLength { expected: spec.episode_length(), got: branch.len() });
    }
    if let Some(a) = branch.iter().find(|a| a.index() >= spec.n_actions()) {
        return Err(Error::UnknownAction(a.index()));
    }
    Ok(crate::env::encode_sequence(branch, spec.n_actions()))
}

/// Runs kickback, re-implantation and the raw game on one branch.
pub fn run_branch(spec: &EnvSpec, rank: usize, prep: KickbackPrep) -> Result<BranchRegisters> {
    let mut regs = BranchRegisters::fiducial(spec, rank);
    regs.play_kickback(spec, prep)?;
    regs.implant_percepts();
    regs.play_raw(spec)?;
    Ok(regs)
}

/// The effective oracle realized by the construction: a diagonal phase per
/// action-sequence basis state, charged at `2M` interaction steps per call.
#[derive(Debug, Clone, PartialEq)]
pub struct OracularizedEnv {
    episode_length: usize,
    phases: Vec<i8>,
    marked: usize,
}

impl OracularizedEnv {
    pub fn phases(&self) -> &[i8] {
        &self.phases
    }

    pub fn episode_length(&self) -> usize {
        self.episode_length
    }

    /// Fresh ledger priced for this environment.
    pub fn ledger(&self) -> QueryLedger {
        QueryLedger::new(self.episode_length)
    }

    pub fn apply(&self, state: &mut StateVector, ledger: &mut QueryLedger) {
        debug_assert_eq!(ledger.episode_length(), self.episode_length as u64);
        phase_oracle(state, self, ledger);
    }
}

impl Oracle for OracularizedEnv {
    fn size(&self) -> usize {
        self.phases.len()
    }

    fn is_marked(&self, index: usize) -> bool {
        self.phases[index] < 0
    }

    fn marked_count(&self) -> usize {
        self.marked
    }
}

/// Builds the oracle for `spec`, checking on every branch that the action
/// register is restored and all other registers end in the fiducial state.
pub fn oracularize(spec: &EnvSpec) -> Result<OracularizedEnv> {
    oracularize_with(spec, KickbackPrep::PhiMinus)
}

pub fn oracularize_with(spec: &EnvSpec, prep: KickbackPrep) -> Result<OracularizedEnv> {
    let n = spec.guarded_size()?;
    let fiducial = Residual::fiducial(spec.episode_length());
    let results: Vec<Result<i8>> = (0..n)
        .into_par_iter()
        .map(|rank| {
            let regs = run_branch(spec, rank, prep)?;
            let actions_back = regs.agent_actions.iter().zip(&regs.sequence).all(|(a, s)| *a == Some(*s));
            if !actions_back {
                return Err(regs.failure("action register not restored"));
            }
            if !regs.residual().matches(&fiducial) {
                return Err(regs.failure("residual registers differ from the fiducial state"));
            }
            Ok(regs.phase.signum() as i8)
        })
        .collect();
    let phases = results.into_iter().collect::<Result<Vec<_>>>()?;
    let marked = phases.iter().filter(|&&p| p < 0).count();
    Ok(OracularizedEnv { episode_length: spec.episode_length(), phases, marked })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub branches: usize,
    pub agreeing: usize,
    pub mismatches: Vec<usize>,
    pub ledger: QueryLedger,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.mismatches.is_empty() && self.agreeing == self.branches
    }
}

/// Compares the constructed oracle with the direct phase oracle built from
/// the reward predicate, on every basis state.
pub fn verify_equivalence(spec: &EnvSpec, oracle: &OracularizedEnv) -> Result<EquivalenceReport> {
    let direct = MarkTable::new(spec.reward_table()?);
    let n = direct.size();
    let mut ledger = oracle.ledger();
    let mut reference = QueryLedger::new(0);
    let mut mismatches = Vec::new();
    for rank in 0..n {
        let mut via_games = StateVector::basis(n, rank);
        oracle.apply(&mut via_games, &mut ledger);
        let mut via_predicate = StateVector::basis(n, rank);
        phase_oracle(&mut via_predicate, &direct, &mut reference);
        if via_games.distance(&via_predicate) > NORM_TOLERANCE {
            mismatches.push(rank);
        }
    }
    ledger.verify()?;
    Ok(EquivalenceReport { branches: n, agreeing: n - mismatches.len(), mismatches, ledger })
}
