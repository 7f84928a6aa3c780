//! Simulation and verification toolkit for electronics-free pneumatic logic
//! circuits: soft actuators whose vents are switched by pressure-threshold
//! valves, wired into gates, oscillators and gait controllers.
//!
//! The crate is layered bottom-up:
//!
//! * [`logic`] — discretization of analog pressure into binary, ternary and
//!   hysteretic logic levels, plus gate semantics over those levels.
//! * [`valve`] — switch-valve flow rules (NC/NO and their bistable variants)
//!   and the slider-crank linkage geometry used to tune snap-through valves.
//! * [`sim`] — hybrid continuous/discrete simulation of a valve-coupled
//!   actuator network with event-localized switching.
//! * [`netlist`] — the `.pneu` text format: parser with located diagnostics,
//!   canonical serializer, and abstraction of a circuit into gate relations.
//! * [`fsm`] — discrete-side tooling: trace discretization, state-sequence
//!   extraction, verification against a state-transition chart, synchronous
//!   gate-network simulation, and gate-network synthesis from a chart.

pub mod diag;
pub mod fsm;
pub mod logic;
pub mod netlist;
pub mod sim;
pub mod valve;
