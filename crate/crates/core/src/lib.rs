//! Evolving synaptic plasticity rules for spiking neural networks.
//!
//! An outer (μ+λ) loop evolves Cartesian genetic programs; each candidate
//! program is used as the weight-update rule of a leaky integrate-and-fire
//! network that is trained on a task in an inner loop, and the trained
//! network's performance is the program's fitness.
//!
//! - [`expr_graph`]: genomes, evaluation, mutation, printing
//! - [`snn`]: LIF simulation, traces, plasticity rules
//! - [`task_xor`], [`env_cartpole`], [`task_cartpole`]: inner loops
//! - [`evolution`]: the outer loop
//! - [`cli`]: configuration and the command implementations behind the binary

pub mod cli;
pub mod error;
pub mod evolution;
pub mod env_cartpole;
pub mod expr_graph;
pub mod snn;
pub mod stats;
pub mod task_cartpole;
pub mod task_xor;

pub use error::{Error, Result};
