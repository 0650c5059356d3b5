//! Exact statevector simulation of the quantum subroutines.

pub mod extremum;
pub mod grover;
pub mod ledger;
pub mod oracle;
pub mod statevector;

pub use extremum::{dh_extremum, DhConfig, DhOutcome, Extremum};
pub use grover::{bbht_search, phase_oracle, BbhtConfig, BbhtOutcome, MarkTable, Oracle};
pub use ledger::QueryLedger;
pub use oracle::{oracularize, verify_equivalence, OracularizedEnv};
pub use statevector::{StateVector, NORM_TOLERANCE};
