//! Samplers for compiled circuits.
//!
//! [`FrameSimulator`] is the bit-packed Pauli-frame Monte Carlo engine used for
//! experiments. [`tableau`] holds a full stabilizer tableau used as an oracle
//! and for checking that detectors and observables are deterministic, and
//! [`propagate_pauli`] pushes a single Pauli through the rest of a circuit.

mod frame;
mod outcomes;
mod propagate;
pub mod tableau;

pub use frame::{sample_frames, ErrorEvent, ErrorPattern, FrameSimulator, BLOCK_SHOTS};
pub use outcomes::{read_outcomes, write_outcomes, ShotOutcomes};
pub use propagate::{propagate_pauli, Symptom};
pub use tableau::{check_determinism, stabilizer_oracle_sample, Reference};
