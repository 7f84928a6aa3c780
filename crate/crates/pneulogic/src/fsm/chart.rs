//! State-transition charts: the expected periodic behavior of a circuit at
//! the monitor level, and verification of observed sequences against it.
//!
//! ```text
//! chart <name>
//! signals <id>[<label>] ...
//! state <name> <bit> ...
//! cycle <name> <name> ...
//! ```

use std::collections::HashMap;

use crate::diag::{is_ident, is_label, tokenize, Diagnostic};
use crate::logic::Bit;

use super::{render_bits, FsmError};

/// A named cyclic specification over monitor signals.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTransitionChart {
    pub name: String,
    /// (actuator, monitor label) per bit column.
    pub signals: Vec<(String, String)>,
    pub states: Vec<(String, Vec<Bit>)>,
    /// Indices into `states`, in cycle order.
    pub cycle: Vec<usize>,
}

impl StateTransitionChart {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|(n, _)| n == name)
    }

    /// The cycle as bit vectors.
    pub fn cycle_bits(&self) -> Vec<Vec<Bit>> {
        self.cycle.iter().map(|&i| self.states[i].1.clone()).collect()
    }

    /// The declared name of a bit pattern, if any state carries it.
    pub fn state_name(&self, bits: &[Bit]) -> Option<&str> {
        self.states.iter().find(|(_, b)| b == bits).map(|(n, _)| n.as_str())
    }

    pub fn validate(&self) -> Result<(), FsmError> {
        let bad = |msg: String| Err(FsmError::InvalidChart(msg));
        if self.signals.is_empty() {
            return bad("no signals declared".into());
        }
        let mut sig_seen = HashMap::new();
        for s in &self.signals {
            if sig_seen.insert(s, ()).is_some() {
                return bad(format!("duplicate signal {}[{}]", s.0, s.1));
            }
        }
        let mut names = HashMap::new();
        let mut codes = HashMap::new();
        for (name, bits) in &self.states {
            if bits.len() != self.signals.len() {
                return Err(FsmError::ArityMismatch {
                    got: bits.len(),
                    want: self.signals.len(),
                });
            }
            if names.insert(name.as_str(), ()).is_some() {
                return bad(format!("duplicate state name {}", name));
            }
            if codes.insert(bits.clone(), ()).is_some() {
                return bad(format!("state {} repeats another state's code", name));
            }
        }
        if self.cycle.len() < 2 {
            return bad("cycle needs at least two states".into());
        }
        for &i in &self.cycle {
            if i >= self.states.len() {
                return bad("cycle references an unknown state".into());
            }
        }
        for k in 0..self.cycle.len() {
            let a = self.cycle[k];
            let b = self.cycle[(k + 1) % self.cycle.len()];
            if self.states[a].1 == self.states[b].1 {
                return bad(format!(
                    "adjacent cycle states {} and {} do not differ",
                    self.states[a].0, self.states[b].0
                ));
            }
        }
        Ok(())
    }

    /// Canonical text rendering in the `.chart` format.
    pub fn to_text(&self) -> String {
        let mut out = format!("chart {}\n", self.name);
        out.push_str("signals");
        for (act, label) in &self.signals {
            out.push_str(&format!(" {}[{}]", act, label));
        }
        out.push('\n');
        for (name, bits) in &self.states {
            out.push_str(&format!("state {}", name));
            for b in bits {
                out.push_str(&format!(" {}", b));
            }
            out.push('\n');
        }
        out.push_str("cycle");
        for &i in &self.cycle {
            out.push_str(&format!(" {}", self.states[i].0));
        }
        out.push('\n');
        out
    }
}

/// Outcome of parsing a `.chart` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartParseResult {
    pub chart: Option<StateTransitionChart>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ChartParseResult {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.is_error())
    }

    pub fn render_diagnostics(&self, file: &str) -> String {
        self.diagnostics.iter().map(|d| d.render(file) + "\n").collect()
    }
}

/// Parses `.chart` text with located diagnostics; the chart is returned only
/// if it is well-formed and passes validation.
pub fn parse_chart(text: &str) -> ChartParseResult {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut name: Option<String> = None;
    let mut signals: Option<Vec<(String, String)>> = None;
    let mut states: Vec<(String, Vec<Bit>)> = Vec::new();
    let mut cycle_names: Option<(usize, Vec<(usize, String)>)> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let toks: Vec<(usize, String)> =
            tokenize(raw).into_iter().map(|t| (t.col, t.text)).collect();
        if toks.is_empty() {
            continue;
        }
        let (kw_col, kw) = (toks[0].0, toks[0].1.as_str());
        match kw {
            "chart" => {
                if name.is_some() {
                    diags.push(Diagnostic::error(line, kw_col, "duplicate chart line"));
                } else if let Some((col, n)) = toks.get(1) {
                    if is_ident(n) {
                        name = Some(n.to_string());
                    } else {
                        diags.push(Diagnostic::error(line, *col, format!("invalid chart name `{}`", n)));
                    }
                } else {
                    diags.push(Diagnostic::error(line, kw_col, "chart line needs a name"));
                }
            }
            "signals" => {
                if signals.is_some() {
                    diags.push(Diagnostic::error(line, kw_col, "duplicate signals line"));
                    continue;
                }
                let mut sigs = Vec::new();
                for (col, tok) in &toks[1..] {
                    match parse_signal(tok) {
                        Some(sig) => sigs.push(sig),
                        None => diags.push(Diagnostic::error(
                            line,
                            *col,
                            format!("expected <actuator>[<label>], got `{}`", tok),
                        )),
                    }
                }
                if sigs.is_empty() {
                    diags.push(Diagnostic::error(line, kw_col, "signals line needs at least one signal"));
                } else {
                    signals = Some(sigs);
                }
            }
            "state" => {
                let Some(sigs) = &signals else {
                    diags.push(Diagnostic::error(line, kw_col, "signals must be declared before states"));
                    continue;
                };
                let Some((name_col, state_name)) = toks.get(1) else {
                    diags.push(Diagnostic::error(line, kw_col, "state line needs a name"));
                    continue;
                };
                if !is_ident(state_name) {
                    diags.push(Diagnostic::error(line, *name_col, format!("invalid state name `{}`", state_name)));
                    continue;
                }
                let mut bits = Vec::new();
                let mut ok = true;
                for (col, tok) in &toks[2..] {
                    match tok.as_str() {
                        "0" => bits.push(0),
                        "1" => bits.push(1),
                        other => {
                            diags.push(Diagnostic::error(line, *col, format!("expected 0 or 1, got `{}`", other)));
                            ok = false;
                        }
                    }
                }
                if bits.len() != sigs.len() {
                    diags.push(Diagnostic::error(
                        line,
                        *name_col,
                        format!("state {} has {} bits for {} signals", state_name, bits.len(), sigs.len()),
                    ));
                    ok = false;
                }
                if ok {
                    states.push((state_name.to_string(), bits));
                }
            }
            "cycle" => {
                if cycle_names.is_some() {
                    diags.push(Diagnostic::error(line, kw_col, "duplicate cycle line"));
                    continue;
                }
                let named: Vec<(usize, String)> =
                    toks[1..].iter().map(|(c, t)| (*c, t.to_string())).collect();
                if named.len() < 2 {
                    diags.push(Diagnostic::error(line, kw_col, "cycle needs at least two states"));
                } else {
                    cycle_names = Some((line, named));
                }
            }
            other => {
                diags.push(Diagnostic::error(line, kw_col, format!("unknown declaration `{}`", other)));
            }
        }
    }

    let eof = last_line.max(1);
    if name.is_none() && !diags.iter().any(|d| d.is_error()) {
        diags.push(Diagnostic::error(eof, 1, "missing chart line"));
    }
    let mut cycle = Vec::new();
    if let Some((cyc_line, named)) = &cycle_names {
        for (col, n) in named {
            match states.iter().position(|(s, _)| s == n) {
                Some(i) => cycle.push(i),
                None => diags.push(Diagnostic::error(*cyc_line, *col, format!("unknown state `{}`", n))),
            }
        }
    } else if !diags.iter().any(|d| d.is_error()) {
        diags.push(Diagnostic::error(eof, 1, "missing cycle line"));
    }

    if diags.iter().any(|d| d.is_error()) {
        return ChartParseResult { chart: None, diagnostics: diags };
    }
    let chart = StateTransitionChart {
        name: name.expect("checked"),
        signals: signals.unwrap_or_default(),
        states,
        cycle,
    };
    if let Err(e) = chart.validate() {
        diags.push(Diagnostic::error(eof, 1, e.to_string()));
        return ChartParseResult { chart: None, diagnostics: diags };
    }
    ChartParseResult { chart: Some(chart), diagnostics: diags }
}

fn parse_signal(tok: &str) -> Option<(String, String)> {
    let (act, rest) = tok.split_once('[')?;
    let label = rest.strip_suffix(']')?;
    (is_ident(act) && is_label(label)).then(|| (act.to_string(), label.to_string()))
}

/// Result of checking an observed sequence against a chart.
#[derive(Debug, Clone, PartialEq)]
pub enum VerifyReport {
    /// The whole sequence walks the cycle (from `rotation` into it) and
    /// covers at least two full cycles.
    Pass { rotation: usize, cycles: f64 },
    /// The sequence walks the cycle but ends before two full cycles.
    TooFewCycles { rotation: usize, cycles: f64 },
    /// First divergence under the best-matching rotation.
    Mismatch { rotation: usize, index: usize, expected: Vec<Bit>, got: Vec<Bit> },
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        matches!(self, VerifyReport::Pass { .. })
    }

    pub fn render(&self, chart: &StateTransitionChart) -> String {
        let name_of = |bits: &[Bit]| -> String {
            match chart.state_name(bits) {
                Some(n) => format!("{}={}", n, render_bits(bits)),
                None => render_bits(bits),
            }
        };
        match self {
            VerifyReport::Pass { rotation, cycles } => format!(
                "pass: sequence follows chart {} for {:.2} cycles (entering at offset {})",
                chart.name, cycles, rotation
            ),
            VerifyReport::TooFewCycles { cycles, .. } => format!(
                "fail: sequence follows chart {} but covers only {:.2} cycles (need 2)",
                chart.name, cycles
            ),
            VerifyReport::Mismatch { index, expected, got, .. } => format!(
                "fail: state #{} diverges from chart {}: expected {}, got {}",
                index,
                chart.name,
                name_of(expected),
                name_of(got)
            ),
        }
    }
}

/// Checks that `sequence` walks the chart's cycle, up to rotation (the
/// observation may begin anywhere in the cycle), and covers at least two
/// full cycles.
pub fn verify(sequence: &[Vec<Bit>], chart: &StateTransitionChart) -> Result<VerifyReport, FsmError> {
    chart.validate()?;
    for st in sequence {
        if st.len() != chart.signals.len() {
            return Err(FsmError::ArityMismatch { got: st.len(), want: chart.signals.len() });
        }
    }
    let cycle = chart.cycle_bits();
    let period = cycle.len();
    if sequence.len() < period {
        return Err(FsmError::InsufficientData { got: sequence.len(), need: period });
    }
    let mut best: Option<(usize, usize)> = None; // (match_len, rotation)
    for rotation in 0..period {
        let match_len = sequence
            .iter()
            .enumerate()
            .take_while(|(i, st)| *st == &cycle[(rotation + i) % period])
            .count();
        if match_len == sequence.len() {
            let cycles = sequence.len() as f64 / period as f64;
            return Ok(if cycles >= 2.0 {
                VerifyReport::Pass { rotation, cycles }
            } else {
                VerifyReport::TooFewCycles { rotation, cycles }
            });
        }
        if best.is_none_or(|(len, _)| match_len > len) {
            best = Some((match_len, rotation));
        }
    }
    let (index, rotation) = best.expect("period >= 1");
    Ok(VerifyReport::Mismatch {
        rotation,
        index,
        expected: cycle[(rotation + index) % period].clone(),
        got: sequence[index].clone(),
    })
}
