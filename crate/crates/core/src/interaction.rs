//! Percept/action alphabets, interaction histories and testers.
//!
//! A [`History`] is the realized, alternating record of percepts and actions.
//! A tester watches the interaction and copies selected steps into its own
//! record, the [`Transcript`]. A classical tester copies every step; a
//! sporadic classical tester leaves some steps untested, and those steps leave
//! no trace at all. Figures of merit are computed from transcripts only.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Percept identifier (an element of the percept set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Percept(pub u32);

/// Action identifier: an index into the action alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action(pub u8);

impl Action {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A symbol on the communication channel. Percepts and actions live in
/// disjoint identifier spaces, enforced by the tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Percept(Percept),
    Action(Action),
}

impl Symbol {
    pub fn is_percept(&self) -> bool {
        matches!(self, Symbol::Percept(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Symbol::Percept(_) => "percept",
            Symbol::Action(_) => "action",
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Percept(p) => write!(f, "s{}", p.0),
            Symbol::Action(a) => write!(f, "a{}", a.0),
        }
    }
}

/// Percept and action sets. Rewards are binary and ride on percepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabets {
    percepts: Vec<Percept>,
    actions: Vec<Action>,
    action_names: Vec<String>,
}

impl Alphabets {
    pub fn new(percepts: Vec<Percept>, action_names: Vec<String>) -> Result<Self> {
        if percepts.is_empty() {
            return Err(Error::InvalidAlphabet("percept set is empty".into()));
        }
        if action_names.is_empty() {
            return Err(Error::InvalidAlphabet("action set is empty".into()));
        }
        if action_names.len() > u8::MAX as usize {
            return Err(Error::InvalidAlphabet("too many actions".into()));
        }
        let mut sorted = percepts.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != percepts.len() {
            return Err(Error::InvalidAlphabet("duplicate percept".into()));
        }
        let mut names = action_names.clone();
        names.sort();
        names.dedup();
        if names.len() != action_names.len() {
            return Err(Error::InvalidAlphabet("duplicate action name".into()));
        }
        let actions = (0..action_names.len()).map(|i| Action(i as u8)).collect();
        Ok(Self { percepts, actions, action_names })
    }

    pub fn percepts(&self) -> &[Percept] {
        &self.percepts
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_name(&self, action: Action) -> &str {
        &self.action_names[action.index()]
    }

    pub fn action_by_name(&self, name: &str) -> Option<Action> {
        self.action_names.iter().position(|n| n == name).map(|i| Action(i as u8))
    }
}

/// One entry of a history. `reward` is `Some` exactly on percept entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub epoch: usize,
    pub symbol: Symbol,
    pub reward: Option<u8>,
}

/// Realized interaction record.
///
/// Within every epoch the symbols alternate percept/action, starting with a
/// percept (the environment moves first) and ending with the final percept
/// of the epoch. Epoch indices never decrease.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    entries: Vec<Entry>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn push_percept(&mut self, epoch: usize, percept: Percept, reward: u8) -> Result<()> {
        if reward > 1 {
            return Err(Error::InvalidHistory(format!("reward {reward} is not binary")));
        }
        match self.entries.last() {
            None => {}
            Some(last) if epoch < last.epoch => {
                return Err(Error::InvalidHistory("epoch index decreased".into()));
            }
            Some(last) if epoch == last.epoch && last.symbol.is_percept() => {
                return Err(Error::InvalidHistory(
                    "two consecutive percepts within one epoch".into(),
                ));
            }
            Some(last) if epoch > last.epoch && !last.symbol.is_percept() => {
                return Err(Error::InvalidHistory("epoch ended on an action".into()));
            }
            Some(_) => {}
        }
        self.entries.push(Entry { epoch, symbol: Symbol::Percept(percept), reward: Some(reward) });
        Ok(())
    }

    pub fn push_action(&mut self, epoch: usize, action: Action) -> Result<()> {
        match self.entries.last() {
            Some(last) if last.epoch == epoch && last.symbol.is_percept() => {}
            _ => {
                return Err(Error::InvalidHistory(
                    "an action must follow a percept of the same epoch".into(),
                ));
            }
        }
        self.entries.push(Entry { epoch, symbol: Symbol::Action(action), reward: None });
        Ok(())
    }

    /// Writes every step with its `tested` flag under `schedule`. This is
    /// the audit view; the tester itself only ever sees [`Transcript`].
    pub fn write_csv<W: Write>(&self, schedule: &TesterSchedule, out: W) -> Result<()> {
        if self.len() > schedule.horizon() {
            return Err(Error::ScheduleOverflow { history: self.len(), horizon: schedule.horizon() });
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for (step, e) in self.entries.iter().enumerate() {
            write_row(&mut w, step, e.epoch, &e.symbol, e.reward, schedule.is_tested(step))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which interaction steps the tester records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TesterSchedule {
    tested: Vec<bool>,
}

impl TesterSchedule {
    pub fn new(tested: Vec<bool>) -> Result<Self> {
        if tested.is_empty() {
            return Err(Error::config("tester", "horizon must be positive"));
        }
        Ok(Self { tested })
    }

    /// Classical tester: every step is copied.
    pub fn classical(horizon: usize) -> Self {
        Self { tested: vec![true; horizon.max(1)] }
    }

    pub fn untested(horizon: usize) -> Self {
        Self { tested: vec![false; horizon.max(1)] }
    }

    /// Tests only steps `start..horizon`.
    pub fn tested_from(start: usize, horizon: usize) -> Self {
        Self { tested: (0..horizon.max(1)).map(|i| i >= start).collect() }
    }

    pub fn horizon(&self) -> usize {
        self.tested.len()
    }

    pub fn is_tested(&self, step: usize) -> bool {
        self.tested.get(step).copied().unwrap_or(false)
    }

    pub fn is_classical(&self) -> bool {
        self.tested.iter().all(|&t| t)
    }

    /// True if every step tested here is also tested by `other`.
    pub fn is_subset_of(&self, other: &TesterSchedule) -> bool {
        self.tested.iter().enumerate().all(|(i, &t)| !t || other.is_tested(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub step: usize,
    pub epoch: usize,
    pub symbol: Symbol,
    pub reward: Option<u8>,
}

/// The tester's record: history entries at tested steps, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Re-filters this transcript by another schedule.
    pub fn filter(&self, schedule: &TesterSchedule) -> Transcript {
        Transcript {
            entries: self.entries.iter().copied().filter(|e| schedule.is_tested(e.step)).collect(),
        }
    }

    /// Number of distinct epochs with at least one tested percept.
    pub fn tested_epochs(&self) -> usize {
        self.epoch_rewards().len()
    }

    fn epoch_rewards(&self) -> BTreeMap<usize, bool> {
        let mut epochs = BTreeMap::new();
        for e in &self.entries {
            if let Some(r) = e.reward {
                *epochs.entry(e.epoch).or_insert(false) |= r == 1;
            }
        }
        epochs
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for e in &self.entries {
            write_row(&mut w, e.step, e.epoch, &e.symbol, e.reward, true)?;
        }
        w.flush()?;
        Ok(())
    }
}

const CSV_HEADER: [&str; 6] = ["step", "epoch", "kind", "symbol", "reward", "tested"];

fn write_row<W: Write>(
    w: &mut csv::Writer<W>,
    step: usize,
    epoch: usize,
    symbol: &Symbol,
    reward: Option<u8>,
    tested: bool,
) -> Result<()> {
    let reward = reward.map(|r| r.to_string()).unwrap_or_default();
    w.write_record([
        step.to_string(),
        epoch.to_string(),
        symbol.kind().to_string(),
        symbol.to_string(),
        reward,
        u8::from(tested).to_string(),
    ])?;
    Ok(())
}

/// Copies the tested steps of `history` into a transcript.
pub fn apply_tester(history: &History, schedule: &TesterSchedule) -> Result<Transcript> {
    if history.len() > schedule.horizon() {
        return Err(Error::ScheduleOverflow { history: history.len(), horizon: schedule.horizon() });
    }
    let entries = history
        .entries()
        .iter()
        .enumerate()
        .filter(|(step, _)| schedule.is_tested(*step))
        .map(|(step, e)| TranscriptEntry { step, epoch: e.epoch, symbol: e.symbol, reward: e.reward })
        .collect();
    Ok(Transcript { entries })
}

/// Mean reward over the percept entries whose step lies in `window`.
/// Zero when the window holds no percepts.
pub fn average_reward(transcript: &Transcript, window: Range<usize>) -> f64 {
    let (sum, count) = transcript
        .entries()
        .iter()
        .filter(|e| window.contains(&e.step))
        .filter_map(|e| e.reward)
        .fold((0u64, 0u64), |(s, c), r| (s + r as u64, c + 1));
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

/// Finite-horizon average reward per tested epoch: the fraction of tested
/// epochs that carry a reward. This is the figure of merit used throughout.
pub fn epoch_average_reward(transcript: &Transcript) -> f64 {
    let epochs = transcript.epoch_rewards();
    if epochs.is_empty() {
        return 0.0;
    }
    epochs.values().filter(|&&r| r).count() as f64 / epochs.len() as f64
}

/// History entries written by one epoch of length `m`: `s_1 a_1 .. a_m s_{m+1}`.
pub fn entries_per_epoch(m: usize) -> usize {
    2 * m + 1
}

/// Textual tester description used in configs: `all` or `last-epochs:<T>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TesterSpec {
    All,
    LastEpochs(usize),
}

impl TesterSpec {
    /// Schedule over `epochs` epochs of length `m`.
    pub fn schedule(&self, epochs: usize, m: usize) -> TesterSchedule {
        let horizon = epochs * entries_per_epoch(m);
        match *self {
            TesterSpec::All => TesterSchedule::classical(horizon),
            TesterSpec::LastEpochs(t) => {
                TesterSchedule::tested_from(epochs.saturating_sub(t) * entries_per_epoch(m), horizon)
            }
        }
    }
}

impl fmt::Display for TesterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TesterSpec::All => write!(f, "all"),
            TesterSpec::LastEpochs(t) => write!(f, "last-epochs:{t}"),
        }
    }
}

impl std::str::FromStr for TesterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(TesterSpec::All);
        }
        let bad = || Error::config("tester", format!("expected `all` or `last-epochs:<T>` with T > 0, got `{s}`"));
        let t: usize = s.strip_prefix("last-epochs:").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if t == 0 {
            return Err(bad());
        }
        Ok(TesterSpec::LastEpochs(t))
    }
}

impl TryFrom<String> for TesterSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TesterSpec> for String {
    fn from(t: TesterSpec) -> String {
        t.to_string()
    }
}
