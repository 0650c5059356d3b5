use serde::Serialize;

use crate::error::{Error, Result};

/// Interaction-cost accounting.
///
/// An oracularized call plays two full games and costs `2M` interaction
/// steps; a classical epoch costs `M`. The counters are only mutated through
/// the charge methods, so `interaction_steps = 2M * oracle_calls +
/// M * classical_epochs` holds at all times; [`QueryLedger::verify`] checks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QueryLedger {
    episode_length: u64,
    oracle_calls: u64,
    classical_epochs: u64,
    interaction_steps: u64,
}

impl QueryLedger {
    /// `episode_length` is `M`; use 0 for oracles that are not backed by an
    /// environment (e.g. lookup tables).
    pub fn new(episode_length: usize) -> Self {
        Self {
            episode_length: episode_length as u64,
            oracle_calls: 0,
            classical_epochs: 0,
            interaction_steps: 0,
        }
    }

    pub fn episode_length(&self) -> u64 {
        self.episode_length
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    pub fn classical_epochs(&self) -> u64 {
        self.classical_epochs
    }

    pub fn interaction_steps(&self) -> u64 {
        self.interaction_steps
    }

    pub fn steps_per_oracle_call(&self) -> u64 {
        2 * self.episode_length
    }

    pub fn charge_oracle_calls(&mut self, calls: u64) {
        self.oracle_calls += calls;
        self.interaction_steps += calls * self.steps_per_oracle_call();
        debug_assert!(self.verify().is_ok());
    }

    pub fn charge_oracle_call(&mut self) {
        self.charge_oracle_calls(1);
    }

    pub fn charge_classical_epoch(&mut self) {
        self.classical_epochs += 1;
        self.interaction_steps += self.episode_length;
        debug_assert!(self.verify().is_ok());
    }

    /// Folds another ledger (same `M`) into this one.
    pub fn absorb(&mut self, other: &QueryLedger) -> Result<()> {
        if other.episode_length != self.episode_length {
            return Err(Error::LedgerViolation(format!(
                "cannot merge ledgers with M = {} and M = {}",
                self.episode_length, other.episode_length
            )));
        }
        self.oracle_calls += other.oracle_calls;
        self.classical_epochs += other.classical_epochs;
        self.interaction_steps += other.interaction_steps;
        self.verify()
    }

    pub fn verify(&self) -> Result<()> {
        let expected = self.steps_per_oracle_call() * self.oracle_calls
            + self.episode_length * self.classical_epochs;
        if expected != self.interaction_steps {
            return Err(Error::LedgerViolation(format!(
                "interaction_steps = {} but 2M*oracle_calls + M*classical_epochs = {}",
                self.interaction_steps, expected
            )));
        }
        Ok(())
    }
}
