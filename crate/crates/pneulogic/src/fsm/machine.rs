//! Synchronous stepping of the abstracted gate network.
//!
//! Pressures are quantized to ladder positions: how many of the thresholds an
//! actuator is read against have been reached. Each step moves every actuator
//! one ladder level toward the extreme its driving gate demands, so the slow
//! continuous fill/vent ramps become unit moves while the switching order is
//! preserved. Hysteretic readers of the same band share one memory cell that
//! sets and resets as the sensed actuator leaves the band.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::logic::{gate_target, Bit, GateRelation, LogicLevel, ThresholdSpec};
use crate::netlist::abstract_circuit;
use crate::sim::{CircuitModel, MonitorSpec, SimError};
use crate::valve::FlowStatus;

use super::{render_bits, FsmError};

#[derive(Debug, Clone, Copy)]
enum GateInput {
    Rung { act: usize, idx: usize },
    PairRungs { act: usize, lo: usize, hi: usize },
    Cell(usize),
}

#[derive(Debug, Clone)]
struct CompiledGate {
    relation: GateRelation,
    input: GateInput,
}

/// One hysteresis band on an actuator's ladder, identified by its rungs.
#[derive(Debug, Clone, Copy)]
struct MemCell {
    act: usize,
    low_idx: usize,
    high_idx: usize,
}

/// What an actuator without a driving gate does.
#[derive(Debug, Clone, Copy)]
enum FreeTarget {
    Top,
    Bottom,
    Hold,
}

#[derive(Debug, Clone, Copy)]
enum ObsEntry {
    Rung { act: usize, idx: usize },
    Cell(usize),
}

/// Quantized machine state: per actuator the number of ladder rungs reached
/// (`p >= rung` exactly for rung indices below the position), plus the bit of
/// every hysteresis cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MachineState {
    pub positions: Vec<usize>,
    pub memories: Vec<Bit>,
}

/// A gate network quantized onto threshold ladders.
#[derive(Debug, Clone)]
pub struct AbstractMachine {
    actuators: Vec<String>,
    ladders: Vec<Vec<f64>>,
    gates: Vec<CompiledGate>,
    /// Index of the driving gate per actuator.
    drivers: Vec<Option<usize>>,
    free: Vec<FreeTarget>,
    cells: Vec<MemCell>,
    observations: Vec<ObsEntry>,
    signals: Vec<(String, String)>,
    init: MachineState,
}

fn settle(cells: &[MemCell], state: &mut MachineState) {
    for (i, c) in cells.iter().enumerate() {
        let pos = state.positions[c.act];
        if pos > c.high_idx {
            state.memories[i] = 1;
        } else if pos <= c.low_idx {
            state.memories[i] = 0;
        }
    }
}

impl AbstractMachine {
    /// Builds a machine from bare gate relations. Actuators no gate drives
    /// hold their level; everything starts at the bottom of its ladder.
    pub fn new(
        actuators: &[&str],
        gates: Vec<GateRelation>,
        monitors: Vec<MonitorSpec>,
    ) -> Result<Self, FsmError> {
        let names: Vec<String> = actuators.iter().map(|s| s.to_string()).collect();
        let free = vec![FreeTarget::Hold; names.len()];
        let p0 = vec![0.0; names.len()];
        Self::assemble(names, gates, monitors, free, &p0, &[])
    }

    /// Reads a circuit's valves back as gates and quantizes it. Undriven
    /// actuators fill to the top of their ladder unless declared vented (or
    /// given no supply), and latch memories start from the valves' declared
    /// initial bits where the starting pressure sits inside the band.
    pub fn from_circuit(circuit: &CircuitModel) -> Result<Self, FsmError> {
        let gates = abstract_circuit(circuit)?;
        let names: Vec<String> = circuit.actuators.iter().map(|a| a.id.clone()).collect();
        let free = circuit
            .actuators
            .iter()
            .map(|a| match a.vent {
                Some(FlowStatus::Unblocked) => FreeTarget::Bottom,
                _ if a.fill_rate == 0.0 => FreeTarget::Hold,
                _ => FreeTarget::Top,
            })
            .collect();
        let p0: Vec<f64> = circuit.actuators.iter().map(|a| a.p0).collect();
        let cell_init: Vec<(String, f64, f64, Bit)> = circuit
            .valves
            .iter()
            .filter_map(|v| match v.thresholds {
                ThresholdSpec::Hysteretic { low, high } => {
                    Some((v.sense.clone(), low, high, v.init_memory.bit()))
                }
                _ => None,
            })
            .collect();
        Self::assemble(names, gates, circuit.monitors.clone(), free, &p0, &cell_init)
    }

    fn assemble(
        names: Vec<String>,
        gates: Vec<GateRelation>,
        monitors: Vec<MonitorSpec>,
        free: Vec<FreeTarget>,
        p0: &[f64],
        cell_init: &[(String, f64, f64, Bit)],
    ) -> Result<Self, FsmError> {
        let invalid = |msg: String| FsmError::Sim(SimError::InvalidCircuit(msg));
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(invalid(format!("duplicate actuator id {}", n)));
            }
        }
        let index = |id: &str| names.iter().position(|n| n == id);

        // Every threshold an actuator is read against becomes a ladder rung.
        let mut ladders: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for g in &gates {
            let act = index(&g.input)
                .ok_or_else(|| invalid(format!("gate input {} is not an actuator", g.input)))?;
            ladders[act].extend(g.input_threshold.rungs());
        }
        for m in &monitors {
            let act = index(&m.actuator).ok_or_else(|| {
                invalid(format!("monitor {}[{}] references unknown actuator", m.actuator, m.label))
            })?;
            ladders[act].extend(m.threshold.rungs());
        }
        for ladder in &mut ladders {
            ladder.sort_by(|a, b| a.partial_cmp(b).expect("finite rungs"));
            ladder.dedup();
        }
        let rung_idx = |act: usize, value: f64| -> usize {
            ladders[act].iter().position(|&r| r == value).expect("rung collected above")
        };

        // One memory cell per distinct band, shared by all its readers.
        let mut cell_keys: Vec<(usize, f64, f64)> = Vec::new();
        {
            let mut note = |key: (usize, f64, f64)| {
                if !cell_keys.contains(&key) {
                    cell_keys.push(key);
                }
            };
            for g in &gates {
                if let ThresholdSpec::Hysteretic { low, high } = g.input_threshold {
                    note((index(&g.input).expect("checked above"), low, high));
                }
            }
            for m in &monitors {
                if let ThresholdSpec::Hysteretic { low, high } = m.threshold {
                    note((index(&m.actuator).expect("checked above"), low, high));
                }
            }
        }
        let cells: Vec<MemCell> = cell_keys
            .iter()
            .map(|&(act, low, high)| MemCell {
                act,
                low_idx: rung_idx(act, low),
                high_idx: rung_idx(act, high),
            })
            .collect();
        let cell_of = |act: usize, low: f64, high: f64| -> usize {
            cell_keys.iter().position(|&k| k == (act, low, high)).expect("noted above")
        };

        let mut drivers: Vec<Option<usize>> = vec![None; names.len()];
        let mut compiled = Vec::with_capacity(gates.len());
        for (gi, g) in gates.into_iter().enumerate() {
            let input_act = index(&g.input).expect("checked above");
            let output = index(&g.output)
                .ok_or_else(|| invalid(format!("gate output {} is not an actuator", g.output)))?;
            if drivers[output].replace(gi).is_some() {
                return Err(FsmError::MultipleDrivers(names[output].clone()));
            }
            let input = match g.input_threshold {
                ThresholdSpec::Constant(t) => {
                    GateInput::Rung { act: input_act, idx: rung_idx(input_act, t) }
                }
                ThresholdSpec::Pair { lower, upper } => GateInput::PairRungs {
                    act: input_act,
                    lo: rung_idx(input_act, lower),
                    hi: rung_idx(input_act, upper),
                },
                ThresholdSpec::Hysteretic { low, high } => {
                    GateInput::Cell(cell_of(input_act, low, high))
                }
            };
            compiled.push(CompiledGate { relation: g, input });
        }

        let mut observations = Vec::with_capacity(monitors.len());
        let mut signals = Vec::with_capacity(monitors.len());
        for m in &monitors {
            let act = index(&m.actuator).expect("checked above");
            let entry = match m.threshold {
                ThresholdSpec::Constant(t) => ObsEntry::Rung { act, idx: rung_idx(act, t) },
                ThresholdSpec::Hysteretic { low, high } => ObsEntry::Cell(cell_of(act, low, high)),
                ThresholdSpec::Pair { .. } => {
                    return Err(FsmError::BadMonitor {
                        actuator: m.actuator.clone(),
                        label: m.label.clone(),
                        reason: "ternary monitors have no single-bit track".into(),
                    })
                }
            };
            observations.push(entry);
            signals.push((m.actuator.clone(), m.label.clone()));
        }

        let positions: Vec<usize> = p0
            .iter()
            .enumerate()
            .map(|(i, &p)| ladders[i].iter().filter(|&&r| p >= r).count())
            .collect();
        let mut memories: Vec<Bit> = vec![0; cells.len()];
        for (act, low, high, bit) in cell_init {
            if let Some(a) = index(act) {
                if let Some(c) = cell_keys.iter().position(|&k| k == (a, *low, *high)) {
                    memories[c] = *bit;
                }
            }
        }
        let mut init = MachineState { positions, memories };
        settle(&cells, &mut init);

        Ok(AbstractMachine {
            actuators: names,
            ladders,
            gates: compiled,
            drivers,
            free,
            cells,
            observations,
            signals,
            init,
        })
    }

    pub fn actuators(&self) -> &[String] {
        &self.actuators
    }

    /// The observed monitor signals, in declaration order.
    pub fn signals(&self) -> &[(String, String)] {
        &self.signals
    }

    pub fn initial_state(&self) -> MachineState {
        self.init.clone()
    }

    fn read_input(&self, state: &MachineState, input: GateInput) -> Result<LogicLevel, FsmError> {
        Ok(match input {
            GateInput::Rung { act, idx } => {
                LogicLevel::binary((idx < state.positions[act]) as Bit)
            }
            GateInput::PairRungs { act, lo, hi } => {
                let pos = state.positions[act];
                LogicLevel::from_bits(&[(hi < pos) as Bit, (lo < pos) as Bit])?
            }
            GateInput::Cell(c) => LogicLevel::binary(state.memories[c]),
        })
    }

    /// One synchronous step: every actuator moves one ladder level toward its
    /// target, then the memory cells react to the new positions.
    pub fn step(&self, state: &MachineState) -> Result<MachineState, FsmError> {
        let mut next = state.clone();
        for (i, ladder) in self.ladders.iter().enumerate() {
            let target = match self.drivers[i] {
                Some(g) => {
                    let gate = &self.gates[g];
                    let input = self.read_input(state, gate.input)?;
                    let out = gate_target(&gate.relation, input)?;
                    if out.ones() > 0 {
                        ladder.len()
                    } else {
                        0
                    }
                }
                None => match self.free[i] {
                    FreeTarget::Top => ladder.len(),
                    FreeTarget::Bottom => 0,
                    FreeTarget::Hold => state.positions[i],
                },
            };
            let pos = state.positions[i];
            next.positions[i] = match target.cmp(&pos) {
                Ordering::Greater => pos + 1,
                Ordering::Less => pos - 1,
                Ordering::Equal => pos,
            };
        }
        settle(&self.cells, &mut next);
        Ok(next)
    }

    /// The monitor bits of a state, in monitor declaration order.
    pub fn observe(&self, state: &MachineState) -> Vec<Bit> {
        self.observations
            .iter()
            .map(|&o| match o {
                ObsEntry::Rung { act, idx } => (idx < state.positions[act]) as Bit,
                ObsEntry::Cell(c) => state.memories[c],
            })
            .collect()
    }

    /// Generous bound on steps before a repeat must have occurred.
    fn step_bound(&self) -> usize {
        let mut space: usize = 1;
        for ladder in &self.ladders {
            space = space.saturating_mul(ladder.len() + 1);
        }
        space = space.saturating_mul(1usize << self.cells.len().min(20));
        space.saturating_mul(4).saturating_add(16).min(1 << 20)
    }
}

/// Steps the machine from its initial state until the internal state repeats
/// and returns one period of the observed monitor states, with consecutive
/// duplicates collapsed (cyclically). A repeating fixed point is a deadlock.
pub fn logic_simulate(machine: &AbstractMachine) -> Result<Vec<Vec<Bit>>, FsmError> {
    let bound = machine.step_bound();
    let mut seen: HashMap<MachineState, usize> = HashMap::new();
    let mut history: Vec<MachineState> = Vec::new();
    let mut state = machine.initial_state();
    loop {
        if let Some(&start) = seen.get(&state) {
            let cycle = &history[start..];
            if cycle.len() == 1 {
                return Err(FsmError::Deadlock {
                    state: render_bits(&machine.observe(&cycle[0])),
                });
            }
            let mut observed: Vec<Vec<Bit>> = Vec::new();
            for s in cycle {
                let bits = machine.observe(s);
                if observed.last() != Some(&bits) {
                    observed.push(bits);
                }
            }
            while observed.len() > 1 && observed.first() == observed.last() {
                observed.pop();
            }
            return Ok(observed);
        }
        if history.len() >= bound {
            return Err(FsmError::Nonperiodic { steps: history.len() });
        }
        seen.insert(state.clone(), history.len());
        history.push(state.clone());
        state = machine.step(&state)?;
    }
}
