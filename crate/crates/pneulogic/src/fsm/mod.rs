//! Discrete-side tooling: turning traces into logic-level state sequences,
//! checking them against a state-transition chart, stepping the abstracted
//! gate network synchronously, and synthesizing gate networks from a chart.

mod chart;
mod discrete;
mod machine;
mod synth;

pub use chart::{parse_chart, verify, ChartParseResult, StateTransitionChart, VerifyReport};
pub use discrete::{discretize_trace, extract_sequence, DiscreteTrace, SignalTrack};
pub use machine::{logic_simulate, AbstractMachine, MachineState};
pub use synth::{synthesize, GateChoice, SynthesisProblem, SynthesisSolution};

use thiserror::Error;

use crate::logic::{Bit, LogicError};
use crate::sim::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("monitor {actuator}[{label}] cannot be discretized: {reason}")]
    BadMonitor { actuator: String, label: String, reason: String },
    #[error("signal {actuator}[{label}] is not present")]
    MissingSignal { actuator: String, label: String },
    #[error("state arity {got} does not match the {want} declared signals")]
    ArityMismatch { got: usize, want: usize },
    #[error("sequence of {got} states is shorter than the cycle of {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("gate network deadlocks at monitor state {state}")]
    Deadlock { state: String },
    #[error("no cycle found within {steps} synchronous steps")]
    Nonperiodic { steps: usize },
    #[error("actuator {0} is driven by more than one gate")]
    MultipleDrivers(String),
    #[error("contradictory chart rows: state {state} steps to both {a} and {b}")]
    InconsistentChart { state: String, a: String, b: String },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub(crate) fn render_bits(bits: &[Bit]) -> String {
    let s: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
    format!("[{}]", s.join(" "))
}

/// Reorders per-state bit vectors from one signal ordering to another.
pub fn reorder_states(
    states: &[Vec<Bit>],
    from: &[(String, String)],
    to: &[(String, String)],
) -> Result<Vec<Vec<Bit>>, FsmError> {
    let index: Vec<usize> = to
        .iter()
        .map(|sig| {
            from.iter().position(|s| s == sig).ok_or_else(|| FsmError::MissingSignal {
                actuator: sig.0.clone(),
                label: sig.1.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    states
        .iter()
        .map(|st| {
            if st.len() != from.len() {
                return Err(FsmError::ArityMismatch { got: st.len(), want: from.len() });
            }
            Ok(index.iter().map(|&i| st[i]).collect())
        })
        .collect()
}
