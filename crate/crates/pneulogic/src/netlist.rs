//! The `.pneu` netlist format.
//!
//! Line-oriented: one declaration per line, `#` starts a comment.
//!
//! ```text
//! actuator <id> fill=<num> vent_coeff=<num> p0=<num> [p_max=<num>] [vent=open|closed]
//! valve <id> kind=<NC|NO|HNC|HNO> sense=<id> (threshold=<num> | low=<num> high=<num>)
//!       controls=<id> [init=<0|1>]
//! monitor <id> <label>=<num | hyst(<num>,<num>)> ...
//! ```
//!
//! [`parse`] never panics on malformed input; it collects located
//! diagnostics and yields a circuit only when no errors were found.
//! [`serialize`] renders a canonical text whose parse equals the original
//! circuit. [`abstract_circuit`] reads the valve couplings back as gates.

use std::collections::HashMap;

use crate::diag::{is_ident, is_label, tokenize, Diagnostic, Tok};
use crate::logic::{GateKind, GateRelation, HystMemory, ThresholdSpec};
use crate::sim::{ActuatorModel, CircuitModel, MonitorSpec, SimError};
use crate::valve::{FlowStatus, ValveKind, ValveSpec};

/// Outcome of parsing: the circuit (present iff no error diagnostics) plus
/// every diagnostic encountered, in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseResult {
    pub circuit: Option<CircuitModel>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseResult {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.is_error())
    }

    pub fn into_circuit(self) -> Result<CircuitModel, Vec<Diagnostic>> {
        match self.circuit {
            Some(c) => Ok(c),
            None => Err(self.diagnostics),
        }
    }

    pub fn render_diagnostics(&self, file: &str) -> String {
        self.diagnostics.iter().map(|d| d.render(file) + "\n").collect()
    }
}

struct LineParser<'d> {
    line: usize,
    diags: &'d mut Vec<Diagnostic>,
}

impl LineParser<'_> {
    fn error(&mut self, col: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(self.line, col, msg));
    }

    fn number(&mut self, tok: &Tok, key: &str) -> Option<f64> {
        let val_col = tok.col + key.chars().count() + 1;
        let text = &tok.text[key.len() + 1..];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.error(val_col, format!("expected a finite number for {}=, got `{}`", key, text));
                None
            }
        }
    }
}

/// Key/value pairs of one declaration, with duplicate and shape checks.
fn split_pairs<'t>(
    lp: &mut LineParser<'_>,
    toks: &'t [Tok],
    what: &str,
) -> Vec<(&'t str, &'t Tok)> {
    let mut pairs = Vec::new();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for tok in toks {
        match tok.text.split_once('=') {
            Some((key, _)) if !key.is_empty() => {
                if seen.insert(key, ()).is_some() {
                    lp.error(tok.col, format!("duplicate key `{}`", key));
                    continue;
                }
                pairs.push((key, tok));
            }
            _ => lp.error(tok.col, format!("expected <key>=<value> in {} declaration", what)),
        }
    }
    pairs
}

fn value_of<'t>(tok: &'t Tok, key: &str) -> &'t str {
    &tok.text[key.len() + 1..]
}

fn value_col(tok: &Tok, key: &str) -> usize {
    tok.col + key.chars().count() + 1
}

struct PendingActuator {
    model: ActuatorModel,
    line: usize,
    id_col: usize,
    vent_col: Option<usize>,
}

struct PendingValve {
    spec: ValveSpec,
    line: usize,
    id_col: usize,
    sense_col: usize,
    controls_col: usize,
}

struct PendingMonitor {
    spec: MonitorSpec,
    line: usize,
    id_col: usize,
    label_col: usize,
}

fn parse_actuator(lp: &mut LineParser<'_>, toks: &[Tok]) -> Option<PendingActuator> {
    let Some(id_tok) = toks.get(1) else {
        lp.error(toks[0].col, "actuator declaration needs an id");
        return None;
    };
    if !is_ident(&id_tok.text) {
        lp.error(id_tok.col, format!("invalid identifier `{}`", id_tok.text));
        return None;
    }
    let mut fill = None;
    let mut vent_coeff = None;
    let mut p0 = None;
    let mut p_max = None;
    let mut vent = None;
    let mut vent_col = None;
    for (key, tok) in split_pairs(lp, &toks[2..], "actuator") {
        match key {
            "fill" => fill = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "vent_coeff" => vent_coeff = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "p0" => p0 = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "p_max" => p_max = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "vent" => match value_of(tok, key) {
                "open" => {
                    vent = Some(FlowStatus::Unblocked);
                    vent_col = Some(tok.col);
                }
                "closed" => {
                    vent = Some(FlowStatus::Blocked);
                    vent_col = Some(tok.col);
                }
                other => lp.error(
                    value_col(tok, key),
                    format!("vent= must be open or closed, got `{}`", other),
                ),
            },
            other => lp.error(tok.col, format!("unknown key `{}` in actuator declaration", other)),
        }
    }
    let mut missing = Vec::new();
    for (name, present) in
        [("fill", fill.is_some()), ("vent_coeff", vent_coeff.is_some()), ("p0", p0.is_some())]
    {
        if !present {
            missing.push(name);
        }
    }
    if !missing.is_empty() {
        lp.error(id_tok.col, format!("actuator {} is missing {}=", id_tok.text, missing.join("=, ")));
        return None;
    }
    let (fill, fill_col) = fill.unwrap();
    let (vent_coeff, coeff_col) = vent_coeff.unwrap();
    let (p0, p0_col) = p0.unwrap();
    let mut ok = true;
    if fill < 0.0 {
        lp.error(fill_col, "fill rate must be >= 0");
        ok = false;
    }
    if vent_coeff <= 0.0 {
        lp.error(coeff_col, "vent_coeff must be > 0");
        ok = false;
    }
    if p0 < 0.0 {
        lp.error(p0_col, "p0 must be >= 0");
        ok = false;
    }
    if let Some((pm, col)) = p_max {
        if pm <= 0.0 {
            lp.error(col, "p_max must be > 0");
            ok = false;
        } else if p0 > pm {
            lp.error(p0_col, "p0 must not exceed p_max");
            ok = false;
        }
    }
    if !ok {
        return None;
    }
    let mut model = ActuatorModel::new(id_tok.text.clone(), fill, vent_coeff, p0);
    model.p_max = p_max.map(|(v, _)| v);
    model.vent = vent;
    Some(PendingActuator { model, line: lp.line, id_col: id_tok.col, vent_col })
}

fn parse_valve(lp: &mut LineParser<'_>, toks: &[Tok]) -> Option<PendingValve> {
    let Some(id_tok) = toks.get(1) else {
        lp.error(toks[0].col, "valve declaration needs an id");
        return None;
    };
    if !is_ident(&id_tok.text) {
        lp.error(id_tok.col, format!("invalid identifier `{}`", id_tok.text));
        return None;
    }
    let mut kind: Option<(ValveKind, usize)> = None;
    let mut sense: Option<(String, usize)> = None;
    let mut controls: Option<(String, usize)> = None;
    let mut threshold = None;
    let mut low = None;
    let mut high = None;
    let mut init: Option<(u8, usize)> = None;
    for (key, tok) in split_pairs(lp, &toks[2..], "valve") {
        match key {
            "kind" => match value_of(tok, key).parse::<ValveKind>() {
                Ok(k) => kind = Some((k, value_col(tok, key))),
                Err(()) => lp.error(
                    value_col(tok, key),
                    format!("kind= must be NC, NO, HNC or HNO, got `{}`", value_of(tok, key)),
                ),
            },
            "sense" | "controls" => {
                let v = value_of(tok, key);
                if !is_ident(v) {
                    lp.error(value_col(tok, key), format!("invalid identifier `{}`", v));
                } else if key == "sense" {
                    sense = Some((v.to_string(), value_col(tok, key)));
                } else {
                    controls = Some((v.to_string(), value_col(tok, key)));
                }
            }
            "threshold" => threshold = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "low" => low = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "high" => high = lp.number(tok, key).map(|v| (v, value_col(tok, key))),
            "init" => match value_of(tok, key) {
                "0" => init = Some((0, tok.col)),
                "1" => init = Some((1, tok.col)),
                other => {
                    lp.error(value_col(tok, key), format!("init= must be 0 or 1, got `{}`", other))
                }
            },
            other => lp.error(tok.col, format!("unknown key `{}` in valve declaration", other)),
        }
    }
    let Some((kind, kind_col)) = kind else {
        lp.error(id_tok.col, format!("valve {} is missing kind=", id_tok.text));
        return None;
    };
    let Some((sense, sense_col)) = sense else {
        lp.error(id_tok.col, format!("valve {} is missing sense=", id_tok.text));
        return None;
    };
    let Some((controls, controls_col)) = controls else {
        lp.error(id_tok.col, format!("valve {} is missing controls=", id_tok.text));
        return None;
    };
    let thresholds = if kind.is_hysteretic() {
        if let Some((_, col)) = threshold {
            lp.error(col, format!("valve kind {} requires low/high thresholds, not threshold=", kind));
            return None;
        }
        let (Some((lo, _)), Some((hi, hi_col))) = (low, high) else {
            lp.error(kind_col, format!("valve kind {} requires low/high thresholds", kind));
            return None;
        };
        match ThresholdSpec::hysteretic(lo, hi) {
            Ok(t) => t,
            Err(e) => {
                lp.error(hi_col, e.to_string());
                return None;
            }
        }
    } else {
        if let Some((_, col)) = init {
            lp.error(col, format!("init= is only valid for hysteretic valves, not {}", kind));
            return None;
        }
        if let Some((_, col)) = low.or(high) {
            lp.error(col, format!("valve kind {} requires threshold=, not low/high", kind));
            return None;
        }
        let Some((t, t_col)) = threshold else {
            lp.error(kind_col, format!("valve kind {} requires threshold=", kind));
            return None;
        };
        match ThresholdSpec::constant(t) {
            Ok(t) => t,
            Err(e) => {
                lp.error(t_col, e.to_string());
                return None;
            }
        }
    };
    let spec = match ValveSpec::new(id_tok.text.clone(), kind, sense, thresholds, controls) {
        Ok(s) => s.with_init_memory(HystMemory::new(init.map_or(0, |(b, _)| b))),
        Err(e) => {
            lp.error(id_tok.col, e.to_string());
            return None;
        }
    };
    Some(PendingValve {
        spec,
        line: lp.line,
        id_col: id_tok.col,
        sense_col,
        controls_col,
    })
}

fn parse_monitor(lp: &mut LineParser<'_>, toks: &[Tok]) -> Vec<PendingMonitor> {
    let Some(id_tok) = toks.get(1) else {
        lp.error(toks[0].col, "monitor declaration needs an actuator id");
        return Vec::new();
    };
    if !is_ident(&id_tok.text) {
        lp.error(id_tok.col, format!("invalid identifier `{}`", id_tok.text));
        return Vec::new();
    }
    if toks.len() < 3 {
        lp.error(id_tok.col, "monitor declaration needs at least one <label>=<threshold>");
        return Vec::new();
    }
    let mut out = Vec::new();
    for tok in &toks[2..] {
        let Some((label, value)) = tok.text.split_once('=') else {
            lp.error(tok.col, "expected <label>=<threshold>");
            continue;
        };
        if !is_label(label) {
            lp.error(tok.col, format!("invalid monitor label `{}`", label));
            continue;
        }
        let val_col = value_col(tok, label);
        let threshold = if let Some(inner) = value.strip_prefix("hyst(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = inner.split(',').collect();
            let nums: Option<Vec<f64>> = parts
                .iter()
                .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            match nums.as_deref() {
                Some([lo, hi]) => match ThresholdSpec::hysteretic(*lo, *hi) {
                    Ok(t) => t,
                    Err(e) => {
                        lp.error(val_col, e.to_string());
                        continue;
                    }
                },
                _ => {
                    lp.error(val_col, format!("expected hyst(<low>,<high>), got `{}`", value));
                    continue;
                }
            }
        } else {
            match value.parse::<f64>() {
                Ok(v) if v.is_finite() => match ThresholdSpec::constant(v) {
                    Ok(t) => t,
                    Err(e) => {
                        lp.error(val_col, e.to_string());
                        continue;
                    }
                },
                _ => {
                    lp.error(val_col, format!("expected a threshold number or hyst(..), got `{}`", value));
                    continue;
                }
            }
        };
        out.push(PendingMonitor {
            spec: MonitorSpec::new(id_tok.text.clone(), label, threshold),
            line: lp.line,
            id_col: id_tok.col,
            label_col: tok.col,
        });
    }
    out
}

/// Parses `.pneu` text. All diagnostics carry 1-based line/column positions;
/// the circuit is returned only when no errors were reported.
pub fn parse(text: &str) -> ParseResult {
    let mut diags = Vec::new();
    let mut actuators: Vec<PendingActuator> = Vec::new();
    let mut valves: Vec<PendingValve> = Vec::new();
    let mut monitors: Vec<PendingMonitor> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let toks = tokenize(line);
        if toks.is_empty() {
            continue;
        }
        let mut lp = LineParser { line: idx + 1, diags: &mut diags };
        match toks[0].text.as_str() {
            "actuator" => {
                if let Some(a) = parse_actuator(&mut lp, &toks) {
                    actuators.push(a);
                }
            }
            "valve" => {
                if let Some(v) = parse_valve(&mut lp, &toks) {
                    valves.push(v);
                }
            }
            "monitor" => monitors.extend(parse_monitor(&mut lp, &toks)),
            other => {
                lp.error(toks[0].col, format!("unknown declaration `{}`", other));
            }
        }
    }

    // Semantic pass over the collected declarations.
    let mut act_ids: HashMap<String, ()> = HashMap::new();
    for a in &actuators {
        if act_ids.insert(a.model.id.clone(), ()).is_some() {
            diags.push(Diagnostic::error(
                a.line,
                a.id_col,
                format!("duplicate actuator id {}", a.model.id),
            ));
        }
    }
    let mut valve_ids: HashMap<String, ()> = HashMap::new();
    let mut controllers: HashMap<String, String> = HashMap::new();
    for v in &valves {
        if valve_ids.insert(v.spec.id.clone(), ()).is_some() {
            diags.push(Diagnostic::error(
                v.line,
                v.id_col,
                format!("duplicate valve id {}", v.spec.id),
            ));
        }
        if !act_ids.contains_key(&v.spec.sense) {
            diags.push(Diagnostic::error(
                v.line,
                v.sense_col,
                format!("valve {} senses unknown actuator {}", v.spec.id, v.spec.sense),
            ));
        }
        if !act_ids.contains_key(&v.spec.controls) {
            diags.push(Diagnostic::error(
                v.line,
                v.controls_col,
                format!("valve {} controls unknown actuator {}", v.spec.id, v.spec.controls),
            ));
        }
        if let Some(other) = controllers.insert(v.spec.controls.clone(), v.spec.id.clone()) {
            diags.push(Diagnostic::error(
                v.line,
                v.id_col,
                format!(
                    "actuator {} vent is already controlled by valve {}",
                    v.spec.controls, other
                ),
            ));
        }
    }
    let mut labels: HashMap<(String, String), ()> = HashMap::new();
    for m in &monitors {
        if !act_ids.contains_key(&m.spec.actuator) {
            diags.push(Diagnostic::error(
                m.line,
                m.id_col,
                format!("monitor references unknown actuator {}", m.spec.actuator),
            ));
        }
        if labels.insert((m.spec.actuator.clone(), m.spec.label.clone()), ()).is_some() {
            diags.push(Diagnostic::error(
                m.line,
                m.label_col,
                format!("duplicate monitor label {}[{}]", m.spec.actuator, m.spec.label),
            ));
        }
    }
    for a in &actuators {
        if let (Some(col), Some(valve)) = (a.vent_col, controllers.get(&a.model.id)) {
            diags.push(Diagnostic::warning(
                a.line,
                col,
                format!(
                    "vent= on actuator {} is ignored; valve {} controls its vent",
                    a.model.id, valve
                ),
            ));
        }
    }
    if actuators.is_empty() && valves.is_empty() && monitors.is_empty() && !diags.iter().any(|d| d.is_error())
    {
        diags.push(Diagnostic::warning(1, 1, "empty netlist"));
    }

    let circuit = if diags.iter().any(|d| d.is_error()) {
        None
    } else {
        Some(CircuitModel {
            actuators: actuators.into_iter().map(|a| a.model).collect(),
            valves: valves.into_iter().map(|v| v.spec).collect(),
            monitors: monitors.into_iter().map(|m| m.spec).collect(),
        })
    };
    ParseResult { circuit, diagnostics: diags }
}

/// Canonical rendering: actuators, then valves, then monitors, each in
/// stored order with a fixed key order; defaults are elided and numbers use
/// the shortest round-trip form. `parse(serialize(c))` reproduces `c`.
pub fn serialize(circuit: &CircuitModel) -> String {
    let mut out = String::new();
    for a in &circuit.actuators {
        out.push_str(&format!(
            "actuator {} fill={} vent_coeff={} p0={}",
            a.id, a.fill_rate, a.vent_coeff, a.p0
        ));
        if let Some(pm) = a.p_max {
            out.push_str(&format!(" p_max={}", pm));
        }
        if let Some(v) = a.vent {
            out.push_str(if v.is_unblocked() { " vent=open" } else { " vent=closed" });
        }
        out.push('\n');
    }
    for v in &circuit.valves {
        out.push_str(&format!("valve {} kind={} sense={}", v.id, v.kind, v.sense));
        match v.thresholds {
            ThresholdSpec::Constant(t) => out.push_str(&format!(" threshold={}", t)),
            ThresholdSpec::Hysteretic { low, high } | ThresholdSpec::Pair { lower: low, upper: high } => {
                out.push_str(&format!(" low={} high={}", low, high))
            }
        }
        out.push_str(&format!(" controls={}", v.controls));
        if v.kind.is_hysteretic() && v.init_memory == HystMemory::SET {
            out.push_str(" init=1");
        }
        out.push('\n');
    }
    for m in &circuit.monitors {
        match m.threshold {
            ThresholdSpec::Constant(t) => {
                out.push_str(&format!("monitor {} {}={}\n", m.actuator, m.label, t))
            }
            ThresholdSpec::Hysteretic { low, high } => {
                out.push_str(&format!("monitor {} {}=hyst({},{})\n", m.actuator, m.label, low, high))
            }
            ThresholdSpec::Pair { lower, upper } => {
                out.push_str(&format!("monitor {} {}=hyst({},{})\n", m.actuator, m.label, lower, upper))
            }
        }
    }
    out
}

/// The label a valve's threshold is known by on the actuator it senses: the
/// matching monitor's label if one exists, else the valve's own id.
fn threshold_label(circuit: &CircuitModel, valve: &ValveSpec) -> String {
    circuit
        .monitors
        .iter()
        .find(|m| m.actuator == valve.sense && m.threshold == valve.thresholds)
        .map(|m| m.label.clone())
        .unwrap_or_else(|| valve.id.clone())
}

/// Ranking rung for ordering an actuator's read-back thresholds; hysteretic
/// bands rank by their high (set) rung.
fn sort_rung(t: &ThresholdSpec) -> f64 {
    match *t {
        ThresholdSpec::Constant(c) => c,
        ThresholdSpec::Pair { upper, .. } => upper,
        ThresholdSpec::Hysteretic { high, .. } => high,
    }
}

/// Reads each valve coupling back as a logic gate, in valve declaration
/// order (one relation per valve).
///
/// NC inverts, NO buffers; the hysteretic kinds do the same with a banded
/// input. When exactly two constant-threshold valves sense one actuator,
/// their thresholds merge into an ordered pair and each gate reads its own
/// bit of the resulting ternary encoding. An actuator sensed at several
/// thresholds likewise gives its driving gate a multi-bit output encoding.
pub fn abstract_circuit(circuit: &CircuitModel) -> Result<Vec<GateRelation>, SimError> {
    circuit.validate()?;
    for v in &circuit.valves {
        let act = &circuit.actuators[circuit.actuator_index(&v.controls).expect("validated")];
        if act.vent.is_some() {
            return Err(SimError::VentConflict {
                actuator: act.id.clone(),
                valve: v.id.clone(),
            });
        }
    }

    // Sense groups: which valves read each actuator, ascending by rung.
    let mut sensed_by: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, v) in circuit.valves.iter().enumerate() {
        sensed_by.entry(v.sense.as_str()).or_default().push(i);
    }
    for group in sensed_by.values_mut() {
        group.sort_by(|&a, &b| {
            sort_rung(&circuit.valves[a].thresholds)
                .partial_cmp(&sort_rung(&circuit.valves[b].thresholds))
                .expect("finite rungs")
        });
    }

    let mut gates = Vec::with_capacity(circuit.valves.len());
    for (i, v) in circuit.valves.iter().enumerate() {
        let kind = match v.kind {
            ValveKind::Nc | ValveKind::Hnc => GateKind::Not,
            ValveKind::No | ValveKind::Hno => GateKind::Buffer,
        };
        let group = &sensed_by[v.sense.as_str()];
        // A two-valve all-constant sense group reads one ternary encoding.
        let merged = group.len() == 2
            && group.iter().all(|&g| {
                matches!(circuit.valves[g].thresholds, ThresholdSpec::Constant(_))
            })
            && {
                let rungs: Vec<f64> =
                    group.iter().map(|&g| sort_rung(&circuit.valves[g].thresholds)).collect();
                rungs[0] < rungs[1]
            };
        let (input_threshold, input_bit) = if merged {
            let lower = sort_rung(&circuit.valves[group[0]].thresholds);
            let upper = sort_rung(&circuit.valves[group[1]].thresholds);
            let bit = group.iter().position(|&g| g == i).expect("member");
            (ThresholdSpec::pair(lower, upper)?, bit)
        } else {
            (v.thresholds, 0)
        };
        let output_thresholds = match sensed_by.get(v.controls.as_str()) {
            Some(readers) if readers.len() >= 2 => readers
                .iter()
                .map(|&r| threshold_label(circuit, &circuit.valves[r]))
                .collect(),
            _ => Vec::new(),
        };
        gates.push(GateRelation {
            kind,
            input: v.sense.clone(),
            output: v.controls.clone(),
            input_threshold,
            input_bit,
            output_thresholds,
        });
    }
    Ok(gates)
}
