//! Layered leaky integrate-and-fire networks with activity traces,
//! synaptic eligibility traces and pluggable plasticity rules.

mod lif;
mod network;
mod rule;

pub use lif::{
    step_eligibility, step_membrane, step_traces, Decays, LifConfig, NeuronState, SynapseState,
    TracePolarity,
};
pub use network::{
    ActivitySnapshot, LayerActivity, Network, NetworkConfig, NetworkSnapshot, ProjectionConfig,
    SpikeMatrix,
};
pub use rule::{
    EvolvedRule, LocalSignals, NamedRule, PlasticityRule, RuleEvaluator, RuleKind, RuleSpec,
    Terminal,
};
