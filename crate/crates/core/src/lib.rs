//! Spiking ON-OFF neuron Ising machine driven by a Fowler-Nordheim
//! logarithmic annealer, with MAX-CUT and maximum independent set front ends.

pub mod anneal;
pub mod generators;
pub mod harness;
pub mod io;
pub mod ising;
pub mod network;
pub mod oracle;
pub mod problems;
pub mod rng;

pub use anneal::{AnnealSchedule, NoiseConfig, NoiseDist, QuantFormat, ScheduleKind};
pub use ising::{Domain, IsingError, IsingProblem, StateVector, SymmetricMatrix};
