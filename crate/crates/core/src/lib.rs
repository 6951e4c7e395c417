//! Variational quantum search on a real-amplitude statevector simulator.

pub mod circuit;
pub mod grover;
pub mod harness;
pub mod statevec;
pub mod verify;
pub mod vqs;
