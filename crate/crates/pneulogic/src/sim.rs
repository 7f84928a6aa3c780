//! Hybrid continuous/discrete simulation of a valve-coupled actuator network.
//!
//! Between switching events every actuator follows a scalar ODE: a blocked
//! vent lets the supply fill it at `fill_rate`, an unblocked vent drains it
//! proportionally to its pressure. Valve statuses are frozen over each RK4
//! step; threshold crossings are then localized by bisection to within
//! `event_tol` (landing on the destination side of the threshold) and the
//! affected valves switch there. Guards that cross at the same localized
//! instant are processed in declaration order.

use std::collections::HashMap;

use thiserror::Error;

use crate::logic::{HystMemory, LogicError, ThresholdSpec};
use crate::valve::{valve_flow, FlowStatus, ValveError, ValveKind, ValveSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("actuator {actuator} declares vent= but is controlled by valve {valve}")]
    VentConflict { actuator: String, valve: String },
    #[error("event localization stalled for {guard} near t = {t}")]
    Stall { guard: String, t: f64 },
    #[error("pressure diverged: actuator {actuator} reached {pressure} psi at t = {t} with no pressure cap")]
    Diverged { actuator: String, pressure: f64, t: f64 },
    #[error("no sign change over [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Valve(#[from] ValveError),
}

/// One soft actuator: a fixed supply fills it while its vent line is
/// blocked; an unblocked vent drains it at a rate proportional to pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorModel {
    pub id: String,
    /// Fill rate in psi/s while the vent is blocked.
    pub fill_rate: f64,
    /// Vent decay coefficient in 1/s while the vent is unblocked.
    pub vent_coeff: f64,
    /// Initial pressure in psi.
    pub p0: f64,
    /// Relief cap; pressure never rises above it.
    pub p_max: Option<f64>,
    /// Fixed vent status for actuators no valve controls. Defaults to
    /// blocked (the actuator fills).
    pub vent: Option<FlowStatus>,
}

impl ActuatorModel {
    pub fn new(id: impl Into<String>, fill_rate: f64, vent_coeff: f64, p0: f64) -> Self {
        ActuatorModel { id: id.into(), fill_rate, vent_coeff, p0, p_max: None, vent: None }
    }

    pub fn with_p_max(mut self, p_max: f64) -> Self {
        self.p_max = Some(p_max);
        self
    }

    pub fn with_vent(mut self, vent: FlowStatus) -> Self {
        self.vent = Some(vent);
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidCircuit(msg));
        if !(self.fill_rate.is_finite() && self.fill_rate >= 0.0) {
            return bad(format!("actuator {}: fill rate must be >= 0", self.id));
        }
        if !(self.vent_coeff.is_finite() && self.vent_coeff > 0.0) {
            return bad(format!("actuator {}: vent coefficient must be > 0", self.id));
        }
        if !(self.p0.is_finite() && self.p0 >= 0.0) {
            return bad(format!("actuator {}: initial pressure must be >= 0", self.id));
        }
        if let Some(p_max) = self.p_max {
            if !(p_max.is_finite() && p_max > 0.0) {
                return bad(format!("actuator {}: p_max must be > 0", self.id));
            }
            if self.p0 > p_max {
                return bad(format!("actuator {}: initial pressure exceeds p_max", self.id));
            }
        }
        Ok(())
    }
}

/// A labeled read-back threshold on one actuator; monitors do not affect the
/// dynamics but time-stamp their crossings in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSpec {
    pub actuator: String,
    pub label: String,
    pub threshold: ThresholdSpec,
}

impl MonitorSpec {
    pub fn new(
        actuator: impl Into<String>,
        label: impl Into<String>,
        threshold: ThresholdSpec,
    ) -> Self {
        MonitorSpec { actuator: actuator.into(), label: label.into(), threshold }
    }
}

/// A complete circuit: actuators, the valves coupling them, and monitors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitModel {
    pub actuators: Vec<ActuatorModel>,
    pub valves: Vec<ValveSpec>,
    pub monitors: Vec<MonitorSpec>,
}

impl CircuitModel {
    pub fn is_empty(&self) -> bool {
        self.actuators.is_empty() && self.valves.is_empty() && self.monitors.is_empty()
    }

    pub fn actuator_index(&self, id: &str) -> Option<usize> {
        self.actuators.iter().position(|a| a.id == id)
    }

    /// The valve controlling the given actuator's vent, if any.
    pub fn controlling_valve(&self, actuator_id: &str) -> Option<usize> {
        self.valves.iter().position(|v| v.controls == actuator_id)
    }

    /// Checks referential integrity and parameter ranges.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidCircuit(msg));
        let mut seen = HashMap::new();
        for a in &self.actuators {
            a.validate()?;
            if seen.insert(a.id.as_str(), ()).is_some() {
                return bad(format!("duplicate actuator id {}", a.id));
            }
        }
        let mut valve_ids = HashMap::new();
        let mut controllers: HashMap<&str, &str> = HashMap::new();
        for v in &self.valves {
            if valve_ids.insert(v.id.as_str(), ()).is_some() {
                return bad(format!("duplicate valve id {}", v.id));
            }
            if self.actuator_index(&v.sense).is_none() {
                return bad(format!("valve {} senses unknown actuator {}", v.id, v.sense));
            }
            if self.actuator_index(&v.controls).is_none() {
                return bad(format!("valve {} controls unknown actuator {}", v.id, v.controls));
            }
            if let Some(other) = controllers.insert(v.controls.as_str(), v.id.as_str()) {
                return bad(format!(
                    "actuator {} vent controlled by both {} and {}",
                    v.controls, other, v.id
                ));
            }
            match (v.kind.is_hysteretic(), &v.thresholds) {
                (false, ThresholdSpec::Constant(_)) => {}
                (true, ThresholdSpec::Hysteretic { .. }) => {}
                _ => {
                    return bad(format!(
                        "valve {}: threshold form does not match kind {}",
                        v.id, v.kind
                    ))
                }
            }
        }
        let mut labels = HashMap::new();
        for m in &self.monitors {
            if self.actuator_index(&m.actuator).is_none() {
                return bad(format!(
                    "monitor {}[{}] references unknown actuator",
                    m.actuator, m.label
                ));
            }
            if labels.insert((m.actuator.as_str(), m.label.as_str()), ()).is_some() {
                return bad(format!("duplicate monitor label {}[{}]", m.actuator, m.label));
            }
        }
        Ok(())
    }

    /// Largest monitor rung, used to derive a default pressure cap.
    fn max_monitor_rung(&self) -> Option<f64> {
        self.monitors
            .iter()
            .flat_map(|m| m.threshold.rungs())
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    fn max_rung(&self) -> Option<f64> {
        self.valves
            .iter()
            .flat_map(|v| v.thresholds.rungs())
            .chain(self.monitors.iter().flat_map(|m| m.threshold.rungs()))
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    /// Effective pressure cap per actuator: the declared `p_max`, else five
    /// times the largest monitor rung in the circuit (if monitors exist).
    pub fn effective_caps(&self) -> Vec<Option<f64>> {
        let default = self.max_monitor_rung().map(|r| 5.0 * r).filter(|&c| c > 0.0);
        self.actuators.iter().map(|a| a.p_max.or(default)).collect()
    }
}

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Upper bound on the RK4 step, in seconds.
    pub dt_max: f64,
    /// End time, in seconds.
    pub t_end: f64,
    /// Pressure tolerance for event localization, in psi.
    pub event_tol: f64,
    /// Record every k-th accepted step (events are always recorded).
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt_max: 0.01, t_end: 30.0, event_tol: 1e-6, record_stride: 1 }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidConfig(msg.into()));
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return bad("dt_max must be > 0");
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end must be >= 0");
        }
        if !(self.event_tol.is_finite() && self.event_tol > 0.0) {
            return bad("event_tol must be > 0");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be >= 1");
        }
        Ok(())
    }
}

/// One recorded instant of the hybrid state.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub pressures: Vec<f64>,
    pub statuses: Vec<FlowStatus>,
    /// Latch memories, aligned with the circuit's valves; `None` for
    /// monostable valves.
    pub memories: Vec<Option<HystMemory>>,
    /// True if this sample was placed by event localization rather than the
    /// regular grid.
    pub event: bool,
}

/// A completed simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub actuators: Vec<String>,
    pub valves: Vec<String>,
    pub samples: Vec<TraceSample>,
}

impl Trace {
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn actuator_index(&self, id: &str) -> Option<usize> {
        self.actuators.iter().position(|a| a == id)
    }

    pub fn event_count(&self) -> usize {
        self.samples.iter().filter(|s| s.event).count()
    }

    /// Event samples at which the given valve's status differs from the
    /// previous sample, i.e. its switching instants.
    pub fn switch_times(&self, valve: &str) -> Vec<f64> {
        let Some(v) = self.valves.iter().position(|x| x == valve) else {
            return Vec::new();
        };
        self.samples
            .windows(2)
            .filter(|w| w[1].statuses[v] != w[0].statuses[v])
            .map(|w| w[1].t)
            .collect()
    }

    /// Renders the trace as CSV with header
    /// `t,<actuator>.p...,<valve>.status...,<valve>.mem...`
    /// (memory columns only for hysteretic valves; status 1 = unblocked).
    pub fn to_csv(&self) -> String {
        let hysteretic: Vec<bool> = match self.samples.first() {
            Some(s) => s.memories.iter().map(|m| m.is_some()).collect(),
            None => vec![false; self.valves.len()],
        };
        let mut header = vec!["t".to_string()];
        header.extend(self.actuators.iter().map(|a| format!("{}.p", a)));
        header.extend(self.valves.iter().map(|v| format!("{}.status", v)));
        header.extend(
            self.valves
                .iter()
                .zip(&hysteretic)
                .filter(|(_, h)| **h)
                .map(|(v, _)| format!("{}.mem", v)),
        );
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.samples {
            let mut row = vec![format!("{}", s.t)];
            row.extend(s.pressures.iter().map(|p| format!("{}", p)));
            row.extend(s.statuses.iter().map(|st| st.as_bit().to_string()));
            row.extend(s.memories.iter().flatten().map(|m| m.bit().to_string()));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn deriv_core(
    actuators: &[ActuatorModel],
    caps: &[Option<f64>],
    vent_open: impl Fn(usize) -> bool,
    pressures: &[f64],
    out: &mut [f64],
) {
    for (i, a) in actuators.iter().enumerate() {
        let mut dp = if vent_open(i) { -a.vent_coeff * pressures[i] } else { a.fill_rate };
        if let Some(cap) = caps[i] {
            if pressures[i] >= cap {
                dp = dp.min(0.0);
            }
        }
        out[i] = dp;
    }
}

/// Pressure derivatives for the given frozen valve statuses: a blocked vent
/// fills at `fill_rate`, an unblocked vent drains at `vent_coeff * p`, and at
/// the pressure cap the derivative is clamped to be non-positive.
pub fn derivative(circuit: &CircuitModel, pressures: &[f64], statuses: &[FlowStatus]) -> Vec<f64> {
    let caps = circuit.effective_caps();
    let controller: Vec<Option<usize>> =
        circuit.actuators.iter().map(|a| circuit.controlling_valve(&a.id)).collect();
    let mut out = vec![0.0; circuit.actuators.len()];
    deriv_core(
        &circuit.actuators,
        &caps,
        |i| match controller[i] {
            Some(v) => statuses[v].is_unblocked(),
            None => circuit.actuators[i].vent == Some(FlowStatus::Unblocked),
        },
        pressures,
        &mut out,
    );
    out
}

/// Bisection root localization of a continuous function over `[t_lo, t_hi]`,
/// refined until `|f(t)| <= tol`. The endpoints must straddle a sign change
/// (an exact zero at an endpoint is accepted).
pub fn locate_crossing(
    f: impl Fn(f64) -> f64,
    t_lo: f64,
    t_hi: f64,
    tol: f64,
) -> Result<f64, SimError> {
    let (mut lo, mut hi) = (t_lo, t_hi);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(SimError::NoCrossing { lo: t_lo, hi: t_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SimError::Stall { guard: "locate_crossing".into(), t: 0.5 * (lo + hi) })
}

/// What a guard watches and how it reacts when its crossing is reached.
#[derive(Debug, Clone, Copy)]
enum GuardKind {
    /// Monostable valve: tracks `p_sense >= threshold`.
    Valve { valve: usize, threshold: f64 },
    /// Hysteretic valve: watches its high rung while reset, its low rung
    /// while set.
    Latch { valve: usize, low: f64, high: f64 },
    /// Monitor rung: refinement only, no state change.
    Rung { threshold: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Guard {
    kind: GuardKind,
    sense: usize,
    /// Logical bit the guard currently holds (`p >= threshold`); for
    /// latches this mirrors the valve memory.
    bit: bool,
}

struct Engine<'c> {
    circuit: &'c CircuitModel,
    caps: Vec<Option<f64>>,
    controller: Vec<Option<usize>>,
    diverge_at: Option<f64>,
}

impl Engine<'_> {
    fn vent_open(&self, i: usize, statuses: &[FlowStatus]) -> bool {
        match self.controller[i] {
            Some(v) => statuses[v].is_unblocked(),
            None => self.circuit.actuators[i].vent == Some(FlowStatus::Unblocked),
        }
    }

    fn deriv(&self, p: &[f64], statuses: &[FlowStatus], out: &mut [f64]) {
        deriv_core(&self.circuit.actuators, &self.caps, |i| self.vent_open(i, statuses), p, out);
    }

    /// One RK4 step of size `dt` with frozen statuses, clamped to the caps.
    fn rk4(&self, p: &[f64], statuses: &[FlowStatus], dt: f64) -> Vec<f64> {
        let n = p.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.deriv(p, statuses, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * dt * k1[i];
        }
        self.deriv(&tmp, statuses, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * dt * k2[i];
        }
        self.deriv(&tmp, statuses, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + dt * k3[i];
        }
        self.deriv(&tmp, statuses, &mut k4);
        let mut next = vec![0.0; n];
        for i in 0..n {
            let v = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            next[i] = match self.caps[i] {
                Some(cap) => v.clamp(0.0, cap),
                None => v.max(0.0),
            };
        }
        next
    }
}

fn guard_name(circuit: &CircuitModel, guard: &Guard) -> String {
    match guard.kind {
        GuardKind::Valve { valve, .. } | GuardKind::Latch { valve, .. } => {
            format!("valve {}", circuit.valves[valve].id)
        }
        GuardKind::Rung { threshold } => {
            format!("monitor rung {} on {}", threshold, circuit.actuators[guard.sense].id)
        }
    }
}

/// Runs the hybrid simulation from `t = 0` to `cfg.t_end`.
pub fn simulate(circuit: &CircuitModel, cfg: &SimConfig) -> Result<Trace, SimError> {
    circuit.validate()?;
    cfg.validate()?;

    let caps = circuit.effective_caps();
    let controller: Vec<Option<usize>> =
        circuit.actuators.iter().map(|a| circuit.controlling_valve(&a.id)).collect();
    let diverge_at = if caps.iter().all(|c| c.is_some()) {
        None
    } else {
        Some(circuit.max_rung().map_or(1e6, |r| (10.0 * r).max(1.0)))
    };
    let engine = Engine { circuit, caps, controller, diverge_at };

    let mut p: Vec<f64> = circuit.actuators.iter().map(|a| a.p0).collect();
    let mut statuses = Vec::with_capacity(circuit.valves.len());
    let mut memories = Vec::with_capacity(circuit.valves.len());
    let sense_of: Vec<usize> = circuit
        .valves
        .iter()
        .map(|v| circuit.actuator_index(&v.sense).expect("validated"))
        .collect();
    for (v, spec) in circuit.valves.iter().enumerate() {
        let init = spec.kind.is_hysteretic().then_some(spec.init_memory);
        let flow = valve_flow(spec, p[sense_of[v]], init)?;
        statuses.push(flow.status);
        memories.push(flow.memory);
    }

    // Guards in declaration order: valves first, then monitor rungs.
    let mut guards: Vec<Guard> = Vec::new();
    for (v, spec) in circuit.valves.iter().enumerate() {
        let sense = sense_of[v];
        match spec.thresholds {
            ThresholdSpec::Constant(threshold) => guards.push(Guard {
                kind: GuardKind::Valve { valve: v, threshold },
                sense,
                bit: p[sense] >= threshold,
            }),
            ThresholdSpec::Hysteretic { low, high } => guards.push(Guard {
                kind: GuardKind::Latch { valve: v, low, high },
                sense,
                bit: memories[v].expect("hysteretic").bit() == 1,
            }),
            ThresholdSpec::Pair { .. } => unreachable!("validated"),
        }
    }
    for m in &circuit.monitors {
        let sense = circuit.actuator_index(&m.actuator).expect("validated");
        for threshold in m.threshold.rungs() {
            guards.push(Guard { kind: GuardKind::Rung { threshold }, sense, bit: p[sense] >= threshold });
        }
    }

    // A guard's crossing pressure and destination predicate. Rising guards
    // land at `p >= thr`; falling monostable/rung guards land strictly below
    // their threshold, falling latches at `p <= low` (closed, matching the
    // latch reset rule).
    let guard_edge = |g: &Guard, memories: &[Option<HystMemory>]| -> (f64, bool) {
        match g.kind {
            GuardKind::Valve { threshold, .. } | GuardKind::Rung { threshold } => {
                (threshold, !g.bit)
            }
            GuardKind::Latch { valve, low, high } => {
                let set = memories[valve].expect("hysteretic").bit() == 1;
                if set {
                    (low, false)
                } else {
                    (high, true)
                }
            }
        }
    };
    let arrived = |p_sense: f64, threshold: f64, rising: bool, closed_below: bool| -> bool {
        if rising {
            p_sense >= threshold
        } else if closed_below {
            p_sense <= threshold
        } else {
            p_sense < threshold
        }
    };

    let mut samples = Vec::new();
    let mut t = 0.0;
    samples.push(TraceSample {
        t,
        pressures: p.clone(),
        statuses: statuses.clone(),
        memories: memories.clone(),
        event: false,
    });

    let mut accepted = 0usize;
    let mut zero_advance = 0usize;
    let max_zero_advance = (guards.len() + 2) * (guards.len() + 2) + 8;
    // Chatter safety: a monostable valve fighting its own sense pressure
    // would otherwise grind time forward one tolerance-width at a time.
    let mut events_total = 0usize;
    let max_events = 1_000_000usize;

    while t < cfg.t_end - 1e-12 {
        let dt = cfg.dt_max.min(cfg.t_end - t);
        let p_new = engine.rk4(&p, &statuses, dt);

        // Find every guard whose destination condition holds at the end of
        // the proposed step, and localize the earliest crossing.
        let mut earliest: Option<(f64, usize)> = None;
        for (gi, g) in guards.iter().enumerate() {
            let (threshold, rising) = guard_edge(g, &memories);
            let closed_below = matches!(g.kind, GuardKind::Latch { .. });
            if !arrived(p_new[g.sense], threshold, rising, closed_below) {
                continue;
            }
            if arrived(p[g.sense], threshold, rising, closed_below) {
                // Already on the destination side at the step start: a
                // cascade from a simultaneous event; switch immediately.
                earliest = Some((0.0, gi));
                break;
            }
            // Bisection over the step, keeping the bracket's far end on the
            // destination side.
            let mut lo = 0.0;
            let mut hi = dt;
            let mut ok = false;
            for _ in 0..200 {
                let p_hi = engine.rk4(&p, &statuses, hi)[g.sense];
                if (p_hi - threshold).abs() <= cfg.event_tol
                    && arrived(p_hi, threshold, rising, closed_below)
                {
                    ok = true;
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let p_mid = engine.rk4(&p, &statuses, mid)[g.sense];
                if arrived(p_mid, threshold, rising, closed_below) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if !ok {
                return Err(SimError::Stall { guard: guard_name(circuit, g), t: t + hi });
            }
            if earliest.is_none_or(|(best, _)| hi < best) {
                earliest = Some((hi, gi));
            }
        }

        match earliest {
            None => {
                // Plain step.
                t += dt;
                if (cfg.t_end - t).abs() < 1e-12 {
                    t = cfg.t_end;
                }
                p = p_new;
                accepted += 1;
                zero_advance = 0;
                let at_end = t >= cfg.t_end - 1e-12;
                if accepted.is_multiple_of(cfg.record_stride) || at_end {
                    samples.push(TraceSample {
                        t,
                        pressures: p.clone(),
                        statuses: statuses.clone(),
                        memories: memories.clone(),
                        event: false,
                    });
                }
            }
            Some((tau, first)) => {
                events_total += 1;
                if events_total > max_events {
                    return Err(SimError::Stall { guard: guard_name(circuit, &guards[first]), t });
                }
                let p_star = if tau == 0.0 { p.clone() } else { engine.rk4(&p, &statuses, tau) };
                t += tau;
                if tau == 0.0 {
                    zero_advance += 1;
                    if zero_advance > max_zero_advance {
                        return Err(SimError::Stall {
                            guard: guard_name(circuit, &guards[first]),
                            t,
                        });
                    }
                } else {
                    zero_advance = 0;
                }
                // Every guard already at its destination switches now, in
                // declaration order.
                for g in guards.iter_mut() {
                    let (threshold, rising) = guard_edge(g, &memories);
                    let closed_below = matches!(g.kind, GuardKind::Latch { .. });
                    let sense = g.sense;
                    if !arrived(p_star[sense], threshold, rising, closed_below) {
                        continue;
                    }
                    g.bit = rising;
                    match g.kind {
                        GuardKind::Valve { valve, .. } => {
                            statuses[valve] = match (circuit.valves[valve].kind, rising) {
                                (ValveKind::Nc, true) | (ValveKind::No, false) => {
                                    FlowStatus::Unblocked
                                }
                                _ => FlowStatus::Blocked,
                            };
                        }
                        GuardKind::Latch { valve, .. } => {
                            let mem = HystMemory::new(rising as u8);
                            memories[valve] = Some(mem);
                            statuses[valve] = match (circuit.valves[valve].kind, mem.bit()) {
                                (ValveKind::Hnc, 1) | (ValveKind::Hno, 0) => FlowStatus::Unblocked,
                                _ => FlowStatus::Blocked,
                            };
                        }
                        GuardKind::Rung { .. } => {}
                    }
                }
                p = p_star;
                match samples.last_mut() {
                    Some(last) if last.t == t => {
                        last.statuses = statuses.clone();
                        last.memories = memories.clone();
                        last.event = true;
                    }
                    _ => samples.push(TraceSample {
                        t,
                        pressures: p.clone(),
                        statuses: statuses.clone(),
                        memories: memories.clone(),
                        event: true,
                    }),
                }
            }
        }

        if let Some(bound) = engine.diverge_at {
            for (i, a) in circuit.actuators.iter().enumerate() {
                if engine.caps[i].is_none() && p[i] > bound {
                    return Err(SimError::Diverged { actuator: a.id.clone(), pressure: p[i], t });
                }
            }
        }
    }

    if samples.last().is_none_or(|s| s.t < cfg.t_end - 1e-12) {
        samples.push(TraceSample {
            t: cfg.t_end,
            pressures: p.clone(),
            statuses: statuses.clone(),
            memories: memories.clone(),
            event: false,
        });
    }

    Ok(Trace {
        actuators: circuit.actuators.iter().map(|a| a.id.clone()).collect(),
        valves: circuit.valves.iter().map(|v| v.id.clone()).collect(),
        samples,
    })
}
