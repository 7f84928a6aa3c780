//! Discretizing continuous traces into logic-level signal tracks and
//! extracting dwell-filtered state sequences from them.

use crate::logic::{discretize_binary, hysteretic_step, Bit, HystMemory, ThresholdSpec};
use crate::sim::{MonitorSpec, Trace};

use super::FsmError;

/// One monitor's logic level over time: an initial bit plus its change
/// instants (strictly increasing, alternating).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrack {
    pub actuator: String,
    pub label: String,
    pub initial: Bit,
    pub changes: Vec<(f64, Bit)>,
}

impl SignalTrack {
    pub fn name(&self) -> String {
        format!("{}[{}]", self.actuator, self.label)
    }

    /// The bit in effect at time `t` (changes take effect at their instant).
    pub fn bit_at(&self, t: f64) -> Bit {
        match self.changes.iter().rev().find(|(ct, _)| *ct <= t) {
            Some((_, b)) => *b,
            None => self.initial,
        }
    }
}

/// The logic-level view of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrace {
    pub t_start: f64,
    pub t_end: f64,
    pub signals: Vec<SignalTrack>,
}

impl DiscreteTrace {
    pub fn signal_names(&self) -> Vec<(String, String)> {
        self.signals.iter().map(|s| (s.actuator.clone(), s.label.clone())).collect()
    }

    /// Restricts and reorders the tracks to the given signals.
    pub fn project(&self, signals: &[(String, String)]) -> Result<DiscreteTrace, FsmError> {
        let tracks = signals
            .iter()
            .map(|(act, label)| {
                self.signals
                    .iter()
                    .find(|s| s.actuator == *act && s.label == *label)
                    .cloned()
                    .ok_or_else(|| FsmError::MissingSignal {
                        actuator: act.clone(),
                        label: label.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DiscreteTrace { t_start: self.t_start, t_end: self.t_end, signals: tracks })
    }

    /// All change instants across the tracks, ascending and deduplicated.
    fn change_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> =
            self.signals.iter().flat_map(|s| s.changes.iter().map(|(t, _)| *t)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup();
        times
    }

    fn state_at(&self, t: f64) -> Vec<Bit> {
        self.signals.iter().map(|s| s.bit_at(t)).collect()
    }

    /// CSV rendering: header `t,<actuator>[<label>],...`, one row at the
    /// start and one per change instant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.signals {
            out.push(',');
            out.push_str(&s.name());
        }
        out.push('\n');
        let mut times = vec![self.t_start];
        times.extend(self.change_times().into_iter().filter(|&t| t > self.t_start));
        for t in times {
            let mut row = format!("{}", t);
            for b in self.state_at(t) {
                row.push(',');
                row.push_str(&b.to_string());
            }
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}

/// Reads each monitor's logic level at every trace sample.
///
/// Constant monitors threshold each sample directly; hysteretic monitors
/// run the banded discretizer along the samples, starting reset. Because
/// the simulator places refinement samples at monitor rungs, the change
/// instants land on the localized crossings.
pub fn discretize_trace(trace: &Trace, monitors: &[MonitorSpec]) -> Result<DiscreteTrace, FsmError> {
    if trace.samples.is_empty() {
        return Err(FsmError::EmptyTrace);
    }
    let mut signals = Vec::with_capacity(monitors.len());
    for m in monitors {
        let bad = |reason: &str| FsmError::BadMonitor {
            actuator: m.actuator.clone(),
            label: m.label.clone(),
            reason: reason.into(),
        };
        let idx = trace.actuator_index(&m.actuator).ok_or_else(|| bad("actuator not in trace"))?;
        let mut bits = Vec::with_capacity(trace.samples.len());
        match m.threshold {
            ThresholdSpec::Constant(t) => {
                for s in &trace.samples {
                    bits.push(discretize_binary(s.pressures[idx], t)?);
                }
            }
            ThresholdSpec::Hysteretic { low, high } => {
                let mut mem = HystMemory::RESET;
                for s in &trace.samples {
                    let (bit, next) = hysteretic_step(mem, s.pressures[idx], low, high)?;
                    bits.push(bit);
                    mem = next;
                }
            }
            ThresholdSpec::Pair { .. } => {
                return Err(bad("ternary monitors have no single-bit track"));
            }
        }
        let initial = bits[0];
        let mut changes = Vec::new();
        let mut prev = initial;
        for (s, &bit) in trace.samples.iter().zip(&bits) {
            if bit != prev {
                changes.push((s.t, bit));
                prev = bit;
            }
        }
        signals.push(SignalTrack {
            actuator: m.actuator.clone(),
            label: m.label.clone(),
            initial,
            changes,
        });
    }
    Ok(DiscreteTrace {
        t_start: trace.samples[0].t,
        t_end: trace.samples.last().expect("non-empty").t,
        signals,
    })
}

/// Collapses a discrete trace into its sequence of combined states, dropping
/// states that persist for less than `dwell_min` seconds (glitches from
/// nearly-simultaneous switching) and merging consecutive repeats.
pub fn extract_sequence(trace: &DiscreteTrace, dwell_min: f64) -> Vec<Vec<Bit>> {
    let mut boundaries = vec![trace.t_start];
    boundaries.extend(trace.change_times().into_iter().filter(|&t| t > trace.t_start));
    let mut sequence: Vec<Vec<Bit>> = Vec::new();
    for (i, &t) in boundaries.iter().enumerate() {
        let t_next = boundaries.get(i + 1).copied().unwrap_or(trace.t_end);
        let duration = t_next - t;
        if duration <= 0.0 || duration < dwell_min {
            continue;
        }
        let state = trace.state_at(t);
        if sequence.last() != Some(&state) {
            sequence.push(state);
        }
    }
    sequence
}
