//! Classical learning agents: projective simulation (PS) and a uniform
//! random baseline.
//!
//! The PS agent keeps a two-layer clip network: one row of hopping values `h`
//! and glow values `g` per percept, one column per action. The policy is
//! linear in `h`. After each epoch the edges used in that epoch have their
//! glow set to 1, all other glow decays by `(1 - eta)`, and every `h` is
//! damped toward 1 by `gamma` and reinforced by `g * reward`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::interaction::{Action, History, Percept};

/// The agent map: a policy to sample from, plus an end-of-epoch update.
pub trait Agent {
    fn act<R: Rng + ?Sized>(&mut self, percept: Percept, rng: &mut R) -> Action;

    /// Called once per epoch with the (percept, action) trace and the epoch
    /// reward.
    fn learn(&mut self, trace: &[(Percept, Action)], reward: u8);
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsAgent {
    n_actions: usize,
    gamma: f64,
    eta: f64,
    h: BTreeMap<Percept, Vec<f64>>,
    g: BTreeMap<Percept, Vec<f64>>,
}

impl PsAgent {
    pub fn new(n_actions: usize, gamma: f64, eta: f64) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::InvalidAgent("no actions".into()));
        }
        for (name, v) in [("gamma", gamma), ("eta", eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidAgent(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Self { n_actions, gamma, eta, h: BTreeMap::new(), g: BTreeMap::new() })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Hopping values for `percept`; unseen percepts read as all ones.
    pub fn h_row(&self, percept: Percept) -> Vec<f64> {
        self.h.get(&percept).cloned().unwrap_or_else(|| vec![1.0; self.n_actions])
    }

    pub fn g_row(&self, percept: Percept) -> Vec<f64> {
        self.g.get(&percept).cloned().unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    /// Overwrites one row of hopping values. Values below 1 are rejected.
    pub fn set_h_row(&mut self, percept: Percept, row: Vec<f64>) -> Result<()> {
        if row.len() != self.n_actions || row.iter().any(|&v| !(v >= 1.0) || !v.is_finite()) {
            return Err(Error::InvalidAgent("h rows need one finite value >= 1 per action".into()));
        }
        self.ensure_row(percept);
        self.h.insert(percept, row);
        Ok(())
    }

    fn ensure_row(&mut self, percept: Percept) {
        let n = self.n_actions;
        self.h.entry(percept).or_insert_with(|| vec![1.0; n]);
        self.g.entry(percept).or_insert_with(|| vec![0.0; n]);
    }

    /// P(a|s) = h(s,a) / sum_b h(s,b).
    pub fn policy(&self, percept: Percept) -> Vec<f64> {
        match self.h.get(&percept) {
            Some(row) => {
                let total: f64 = row.iter().sum();
                row.iter().map(|v| v / total).collect()
            }
            None => vec![1.0 / self.n_actions as f64; self.n_actions],
        }
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, percept: Percept, rng: &mut R) -> Action {
        match self.h.get(&percept) {
            Some(row) => Action(sample_weighted(row, rng) as u8),
            None => Action(rng.gen_range(0..self.n_actions) as u8),
        }
    }

    /// Damping-plus-glow update for one epoch.
    pub fn ps_update(&mut self, trace: &[(Percept, Action)], reward: u8) {
        for &(s, _) in trace {
            self.ensure_row(s);
        }
        let decay = 1.0 - self.eta;
        for row in self.g.values_mut() {
            row.iter_mut().for_each(|g| *g *= decay);
        }
        for &(s, a) in trace {
            self.g.get_mut(&s).expect("row initialized")[a.index()] = 1.0;
        }
        let lambda = f64::from(reward);
        for (s, hrow) in self.h.iter_mut() {
            let grow = &self.g[s];
            for (h, g) in hrow.iter_mut().zip(grow) {
                *h = *h - self.gamma * (*h - 1.0) + g * lambda;
            }
        }
    }

    pub fn snapshot(&self) -> PsSnapshot {
        PsSnapshot {
            gamma: self.gamma,
            eta: self.eta,
            n_actions: self.n_actions,
            rows: self
                .h
                .iter()
                .map(|(s, h)| PsRow { percept: s.0, h: h.clone(), g: self.g[s].clone() })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &PsSnapshot) -> Result<Self> {
        let mut agent = Self::new(snap.n_actions, snap.gamma, snap.eta)?;
        for row in &snap.rows {
            let p = Percept(row.percept);
            agent.set_h_row(p, row.h.clone())?;
            if row.g.len() != snap.n_actions || row.g.iter().any(|g| !(0.0..=1.0).contains(g)) {
                return Err(Error::InvalidAgent("g rows need one value in [0, 1] per action".into()));
            }
            agent.g.insert(p, row.g.clone());
        }
        Ok(agent)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.snapshot())?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_snapshot(&toml::from_str(text)?)
    }
}

impl Agent for PsAgent {
    fn act<R: Rng + ?Sized>(&mut self, percept: Percept, rng: &mut R) -> Action {
        self.sample_action(percept, rng)
    }

    fn learn(&mut self, trace: &[(Percept, Action)], reward: u8) {
        self.ps_update(trace, reward);
    }
}

/// Structured-text checkpoint of a PS agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsSnapshot {
    pub gamma: f64,
    pub eta: f64,
    pub n_actions: usize,
    pub rows: Vec<PsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsRow {
    pub percept: u32,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
}

/// Uniform random guessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomAgent {
    n_actions: usize,
}

impl RandomAgent {
    pub fn new(n_actions: usize) -> Self {
        Self { n_actions }
    }

    pub fn policy(&self, _percept: Percept) -> Vec<f64> {
        vec![1.0 / self.n_actions as f64; self.n_actions]
    }
}

impl Agent for RandomAgent {
    fn act<R: Rng + ?Sized>(&mut self, _percept: Percept, rng: &mut R) -> Action {
        Action(rng.gen_range(0..self.n_actions) as u8)
    }

    fn learn(&mut self, _trace: &[(Percept, Action)], _reward: u8) {}
}

fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    // rounding can leave x just above the last weight
    weights.len() - 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochOutcome {
    pub trace: Vec<(Percept, Action)>,
    pub reward: u8,
}

/// Plays one full epoch from reset, optionally recording into `history`.
/// The agent learns at the end of the epoch when `learn` is set.
pub fn play_epoch<A: Agent, R: Rng + ?Sized>(
    agent: &mut A,
    spec: &EnvSpec,
    rng: &mut R,
    learn: bool,
    mut history: Option<(&mut History, usize)>,
) -> Result<EpochOutcome> {
    let mut state = spec.initial_state();
    let mut percept = spec.start_percept();
    if let Some((h, epoch)) = history.as_mut() {
        h.push_percept(*epoch, percept, 0)?;
    }
    let mut trace = Vec::with_capacity(spec.episode_length());
    let mut reward = 0;
    for _ in 0..spec.episode_length() {
        let action = agent.act(percept, rng);
        let out = spec.step(&mut state, action)?;
        trace.push((percept, action));
        reward |= out.reward;
        if let Some((h, epoch)) = history.as_mut() {
            h.push_action(*epoch, action)?;
            h.push_percept(*epoch, out.percept, out.reward)?;
        }
        percept = out.percept;
    }
    if learn {
        agent.learn(&trace, reward);
    }
    Ok(EpochOutcome { trace, reward })
}

/// Exact probability that `policy` emits a rewarding epoch in `spec`,
/// by depth-first expansion of the deterministic game tree.
pub fn exact_reward_probability<F>(spec: &EnvSpec, policy: F) -> f64
where
    F: Fn(Percept) -> Vec<f64>,
{
    fn walk<F: Fn(Percept) -> Vec<f64>>(
        spec: &EnvSpec,
        policy: &F,
        state: &crate::env::EnvState,
        percept: Percept,
        prob: f64,
    ) -> f64 {
        if state.rewarded {
            return prob;
        }
        if state.step == spec.episode_length() {
            return 0.0;
        }
        let mut total = 0.0;
        for (a, p) in policy(percept).into_iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut next = state.clone();
            let out = spec.step(&mut next, Action(a as u8)).expect("in-range step");
            total += walk(spec, policy, &next, out.percept, prob * p);
        }
        total
    }
    walk(spec, &policy, &spec.initial_state(), spec.start_percept(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reference_maze, RIGHT, UP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S0: Percept = Percept(0);

    #[test]
    fn uniform_and_skewed_policies() {
        let mut a = PsAgent::new(4, 0.0, 0.5).unwrap();
        assert_eq!(a.policy(S0), vec![0.25; 4]);
        a.set_h_row(S0, vec![2.0, 1.0, 1.0, 1.0]).unwrap();
        let p = a.policy(S0);
        for (got, want) in p.iter().zip([0.4, 0.2, 0.2, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_metaparameters() {
        assert!(PsAgent::new(4, 1.5, 0.0).is_err());
        assert!(PsAgent::new(4, 0.0, -0.1).is_err());
        assert!(PsAgent::new(0, 0.0, 0.0).is_err());
        let mut a = PsAgent::new(2, 0.0, 0.0).unwrap();
        assert!(a.set_h_row(S0, vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn single_rewarded_edge_gains_one() {
        let mut a = PsAgent::new(4, 0.0, 0.3).unwrap();
        a.ps_update(&[(S0, Action(2))], 1);
        assert_eq!(a.h_row(S0), vec![1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn no_reward_no_forgetting_is_identity() {
        let mut a = PsAgent::new(4, 0.0, 0.3).unwrap();
        a.set_h_row(S0, vec![3.0, 1.5, 1.0, 1.0]).unwrap();
        let before = a.h_row(S0);
        a.ps_update(&[(S0, Action(0)), (Percept(1), Action(1))], 0);
        assert_eq!(a.h_row(S0), before);
        assert_eq!(a.h_row(Percept(1)), vec![1.0; 4]);
    }

    #[test]
    fn full_forgetting_then_reward() {
        let mut a = PsAgent::new(4, 1.0, 0.0).unwrap();
        a.set_h_row(S0, vec![7.0, 3.0, 1.0, 1.0]).unwrap();
        a.ps_update(&[(S0, Action(1))], 1);
        assert_eq!(a.h_row(S0), vec![1.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn glow_decays_on_unused_edges() {
        let mut a = PsAgent::new(2, 0.0, 0.25).unwrap();
        a.ps_update(&[(S0, Action(0))], 0);
        a.ps_update(&[(S0, Action(1))], 0);
        assert_eq!(a.g_row(S0), vec![0.75, 1.0]);
        a.ps_update(&[(Percept(3), Action(1))], 1);
        assert_eq!(a.g_row(S0), vec![0.5625, 0.75]);
        assert_eq!(a.h_row(S0), vec![1.5625, 1.75]);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = PsAgent::new(4, 0.0, 0.0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| a.sample_action(S0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn dominant_action_is_almost_always_drawn() {
        let mut a = PsAgent::new(4, 0.0, 0.0).unwrap();
        a.set_h_row(S0, vec![1e9, 1.0, 1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = (0..100_000).filter(|_| a.sample_action(S0, &mut rng) == Action(0)).count();
        assert!(hits as f64 / 1e5 >= 0.999);
    }

    #[test]
    fn sampled_frequencies_match_policy() {
        let mut a = PsAgent::new(4, 0.0, 0.0).unwrap();
        a.set_h_row(S0, vec![4.0, 2.0, 1.0, 1.0]).unwrap();
        let p = a.policy(S0);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..draws {
            counts[a.sample_action(S0, &mut rng).index()] += 1;
        }
        for (c, p) in counts.iter().zip(p) {
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - draws as f64 * p).abs() <= 3.0 * sigma, "{c} vs {p}");
        }
    }

    #[test]
    fn clone_is_independent() {
        let a = PsAgent::new(4, 0.1, 0.5).unwrap();
        let mut b = a.clone();
        assert_eq!(a, b);
        b.ps_update(&[(S0, Action(0))], 1);
        assert_eq!(a.h_row(S0), vec![1.0; 4]);
        assert_ne!(a, b);
    }

    #[test]
    fn training_clone_on_rewarding_path_raises_reward_probability() {
        let spec = reference_maze();
        let a = PsAgent::new(4, 0.0, 1.0).unwrap();
        let mut trained = a.clone();
        let trace = [(Percept(0), RIGHT), (Percept(1), UP)];
        trained.ps_update(&trace, 1);
        let before = exact_reward_probability(&spec, |s| a.policy(s));
        let after = exact_reward_probability(&spec, |s| trained.policy(s));
        assert!((before - 0.125).abs() < 1e-15);
        // 0.4 * 0.4 via RU plus 0.2 * 0.25 via UR
        assert!((after - 0.21).abs() < 1e-15);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut a = PsAgent::new(4, 0.2, 0.7).unwrap();
        a.ps_update(&[(S0, Action(1)), (Percept(2), Action(3))], 1);
        let text = a.to_toml().unwrap();
        assert_eq!(PsAgent::from_toml(&text).unwrap(), a);
    }

    #[test]
    fn random_agent_is_uniform() {
        let r = RandomAgent::new(4);
        assert_eq!(r.policy(S0), vec![0.25; 4]);
    }

    #[test]
    fn play_epoch_records_alternating_history() {
        let spec = reference_maze();
        let mut agent = RandomAgent::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h = History::new();
        let out = play_epoch(&mut agent, &spec, &mut rng, true, Some((&mut h, 0))).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert_eq!(h.len(), 5);
        let out2 = play_epoch(&mut agent, &spec, &mut rng, true, Some((&mut h, 1))).unwrap();
        assert_eq!(h.len(), 10);
        assert!(out2.reward <= 1);
    }
}
