//! Gate-network synthesis from a state-transition chart.
//!
//! Each chart signal must be driven by exactly one single-input gate, and at
//! the chart's level of abstraction a gate moves its output all the way each
//! step: `next[out] = kind(prev[in])`. Candidates per output are checked by
//! replaying every chart transition; the cartesian product over outputs
//! enumerates the networks that reproduce the whole cycle. The chart cannot
//! tell a plain from a hysteretic sensing valve apart, so both flavors are
//! listed and networks with fewer hysteretic parts rank first.

use crate::logic::{gate_target, Bit, GateKind, GateRelation, LogicLevel, ThresholdSpec};

use super::{FsmError, StateTransitionChart};

/// Keeps degenerate charts with huge candidate products from running away.
const MAX_SOLUTIONS: usize = 4096;

/// The transition rows a synthesized network must reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisProblem {
    pub signals: Vec<(String, String)>,
    /// Distinct (state, successor) pairs, one per chart transition.
    pub rows: Vec<(Vec<Bit>, Vec<Bit>)>,
}

impl SynthesisProblem {
    /// Collects the transition rows of a chart's cycle, wrapping around. A
    /// state revisited with two different successors is contradictory.
    pub fn from_chart(chart: &StateTransitionChart) -> Result<Self, FsmError> {
        chart.validate()?;
        let mut next_of: Vec<Option<usize>> = vec![None; chart.states.len()];
        let mut order: Vec<usize> = Vec::new();
        for (i, &s) in chart.cycle.iter().enumerate() {
            let t = chart.cycle[(i + 1) % chart.cycle.len()];
            match next_of[s] {
                None => {
                    next_of[s] = Some(t);
                    order.push(s);
                }
                Some(seen) if seen == t => {}
                Some(seen) => {
                    return Err(FsmError::InconsistentChart {
                        state: chart.states[s].0.clone(),
                        a: chart.states[seen].0.clone(),
                        b: chart.states[t].0.clone(),
                    })
                }
            }
        }
        let rows = order
            .iter()
            .map(|&s| {
                let t = next_of[s].expect("filled above");
                (chart.states[s].1.clone(), chart.states[t].1.clone())
            })
            .collect();
        Ok(SynthesisProblem { signals: chart.signals.clone(), rows })
    }
}

/// One synthesized valve: which signal it senses, which it drives, and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateChoice {
    /// Index of the driven signal.
    pub output: usize,
    /// Index of the sensed signal.
    pub input: usize,
    pub kind: GateKind,
    /// Whether the sensing valve is the hysteretic variant.
    pub hysteretic: bool,
}

impl GateChoice {
    fn relation(&self, signals: &[(String, String)]) -> GateRelation {
        let spec = if self.hysteretic {
            ThresholdSpec::hysteretic(0.0, 1.0).expect("valid placeholder band")
        } else {
            ThresholdSpec::constant(1.0).expect("valid placeholder threshold")
        };
        GateRelation::binary(
            self.kind,
            signals[self.input].0.clone(),
            signals[self.output].0.clone(),
            spec,
        )
    }

    fn valve_kind(&self) -> &'static str {
        match (self.kind, self.hysteretic) {
            (GateKind::Not, false) => "NC",
            (GateKind::Buffer, false) => "NO",
            (GateKind::Not, true) => "HNC",
            (GateKind::Buffer, true) => "HNO",
        }
    }
}

/// One complete gate network reproducing the chart cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSolution {
    pub gates: Vec<GateChoice>,
    signals: Vec<(String, String)>,
}

impl SynthesisSolution {
    pub fn valve_count(&self) -> usize {
        self.gates.len()
    }

    pub fn hysteretic_count(&self) -> usize {
        self.gates.iter().filter(|g| g.hysteretic).count()
    }

    /// Renders the network as netlist valve lines. Thresholds are structural
    /// placeholders; the trailing comment names the rung they must be tuned
    /// to.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let (in_act, in_label) = &self.signals[g.input];
            let out_act = &self.signals[g.output].0;
            if g.hysteretic {
                out.push_str(&format!(
                    "valve V{out} kind={kind} sense={inp} low=0 high=1 controls={out} # tune band to the {inp}[{label}] rung\n",
                    out = out_act,
                    kind = g.valve_kind(),
                    inp = in_act,
                    label = in_label,
                ));
            } else {
                out.push_str(&format!(
                    "valve V{out} kind={kind} sense={inp} threshold=1 controls={out} # tune threshold to the {inp}[{label}] rung\n",
                    out = out_act,
                    kind = g.valve_kind(),
                    inp = in_act,
                    label = in_label,
                ));
            }
        }
        out
    }
}

fn replays(choice: &GateChoice, problem: &SynthesisProblem) -> Result<bool, FsmError> {
    let relation = choice.relation(&problem.signals);
    for (prev, next) in &problem.rows {
        let input = LogicLevel::binary(prev[choice.input]);
        let target = gate_target(&relation, input)?;
        if target.bit(0)? != next[choice.output] {
            return Ok(false);
        }
    }
    Ok(true)
}

fn expand(
    candidates: &[Vec<GateChoice>],
    depth: usize,
    picked: &mut Vec<GateChoice>,
    signals: &[(String, String)],
    solutions: &mut Vec<SynthesisSolution>,
) {
    if solutions.len() >= MAX_SOLUTIONS {
        return;
    }
    if depth == candidates.len() {
        solutions.push(SynthesisSolution { gates: picked.clone(), signals: signals.to_vec() });
        return;
    }
    for &c in &candidates[depth] {
        picked.push(c);
        expand(candidates, depth + 1, picked, signals, solutions);
        picked.pop();
        if solutions.len() >= MAX_SOLUTIONS {
            return;
        }
    }
}

/// Enumerates every gate network that reproduces the problem's rows, ranked
/// by valve count, then hysteretic part count, then rendering. Returns an
/// empty list when some signal cannot be driven by any single-input gate.
pub fn synthesize(problem: &SynthesisProblem) -> Result<Vec<SynthesisSolution>, FsmError> {
    let n = problem.signals.len();
    if n == 0 || problem.rows.is_empty() {
        return Ok(Vec::new());
    }
    for (prev, next) in &problem.rows {
        if prev.len() != n {
            return Err(FsmError::ArityMismatch { got: prev.len(), want: n });
        }
        if next.len() != n {
            return Err(FsmError::ArityMismatch { got: next.len(), want: n });
        }
    }

    let mut candidates: Vec<Vec<GateChoice>> = Vec::with_capacity(n);
    for output in 0..n {
        let mut list = Vec::new();
        for hysteretic in [false, true] {
            for input in 0..n {
                for kind in [GateKind::Not, GateKind::Buffer] {
                    let choice = GateChoice { output, input, kind, hysteretic };
                    if replays(&choice, problem)? {
                        list.push(choice);
                    }
                }
            }
        }
        if list.is_empty() {
            return Ok(Vec::new());
        }
        candidates.push(list);
    }

    let mut solutions = Vec::new();
    expand(&candidates, 0, &mut Vec::with_capacity(n), &problem.signals, &mut solutions);
    solutions.sort_by(|a, b| {
        (a.valve_count(), a.hysteretic_count())
            .cmp(&(b.valve_count(), b.hysteretic_count()))
            .then_with(|| a.render().cmp(&b.render()))
    });
    Ok(solutions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(actuator: &str, label: &str) -> (String, String) {
        (actuator.into(), label.into())
    }

    fn feet() -> StateTransitionChart {
        StateTransitionChart {
            name: "feet".into(),
            signals: vec![sig("R", "P_Rpm"), sig("F", "P_F")],
            states: vec![
                ("S0".into(), vec![0, 0]),
                ("S1".into(), vec![1, 0]),
                ("S2".into(), vec![1, 1]),
                ("S3".into(), vec![0, 1]),
            ],
            cycle: vec![0, 1, 2, 3],
        }
    }

    #[test]
    fn chart_rows_include_the_wraparound_transition() {
        let problem = SynthesisProblem::from_chart(&feet()).unwrap();
        assert_eq!(problem.rows.len(), 4);
        assert_eq!(problem.rows[3], (vec![0, 1], vec![0, 0]));
    }

    #[test]
    fn repeating_a_cycle_does_not_duplicate_rows() {
        // S2/S3 stay declared but unused; the doubled two-cycle gives two rows.
        let mut chart = feet();
        chart.cycle = vec![0, 1, 0, 1];
        let problem = SynthesisProblem::from_chart(&chart).unwrap();
        assert_eq!(problem.rows.len(), 2);
    }

    #[test]
    fn contradictory_successors_are_rejected() {
        let chart = StateTransitionChart {
            name: "loop".into(),
            signals: vec![sig("A", "P_A"), sig("B", "P_B")],
            states: vec![
                ("S0".into(), vec![0, 0]),
                ("S1".into(), vec![1, 0]),
                ("S2".into(), vec![0, 1]),
            ],
            cycle: vec![0, 1, 0, 2],
        };
        assert_eq!(
            SynthesisProblem::from_chart(&chart).unwrap_err(),
            FsmError::InconsistentChart { state: "S0".into(), a: "S1".into(), b: "S2".into() }
        );
    }

    #[test]
    fn feet_cycle_synthesizes_the_expected_gate_pair() {
        let problem = SynthesisProblem::from_chart(&feet()).unwrap();
        let solutions = synthesize(&problem).unwrap();
        assert_eq!(solutions.len(), 4);
        for s in &solutions {
            // Structure is forced: R follows NOT(F), F follows BUFFER(R).
            assert_eq!((s.gates[0].kind, s.gates[0].input), (GateKind::Not, 1));
            assert_eq!((s.gates[1].kind, s.gates[1].input), (GateKind::Buffer, 0));
        }
        assert_eq!(solutions[0].hysteretic_count(), 0);
        assert_eq!(solutions[3].hysteretic_count(), 2);
        assert!(solutions
            .iter()
            .any(|s| s.render().contains("kind=NC") && s.render().contains("kind=HNO")));
    }

    #[test]
    fn rendered_valve_lines_parse_back() {
        let problem = SynthesisProblem::from_chart(&feet()).unwrap();
        let best = &synthesize(&problem).unwrap()[0];
        let full = format!(
            "actuator R fill=1 vent_coeff=1 p0=0\nactuator F fill=1 vent_coeff=1 p0=0\n{}",
            best.render()
        );
        let parsed = crate::netlist::parse(&full);
        assert!(!parsed.has_errors(), "{:?}", parsed.diagnostics);
        assert_eq!(parsed.circuit.unwrap().valves.len(), 2);
    }

    #[test]
    fn single_signal_toggle_gives_both_inverter_flavors() {
        let chart = StateTransitionChart {
            name: "osc".into(),
            signals: vec![sig("A", "P_A")],
            states: vec![("S0".into(), vec![0]), ("S1".into(), vec![1])],
            cycle: vec![0, 1],
        };
        let solutions = synthesize(&SynthesisProblem::from_chart(&chart).unwrap()).unwrap();
        assert_eq!(solutions.len(), 2);
        assert!(solutions[0].render().starts_with("valve VA kind=NC sense=A"));
        assert!(solutions[1].render().starts_with("valve VA kind=HNC sense=A"));
    }

    #[test]
    fn three_phase_ring_with_xor_step_is_unsatisfiable() {
        let chart = StateTransitionChart {
            name: "ring".into(),
            signals: vec![sig("A", "P_A"), sig("B", "P_B")],
            states: vec![
                ("S0".into(), vec![0, 0]),
                ("S1".into(), vec![1, 0]),
                ("S2".into(), vec![0, 1]),
            ],
            cycle: vec![0, 1, 2],
        };
        let solutions = synthesize(&SynthesisProblem::from_chart(&chart).unwrap()).unwrap();
        assert!(solutions.is_empty());
    }

    proptest! {
        #[test]
        fn enumeration_matches_a_directly_counted_oracle(
            rows in proptest::collection::vec(
                (
                    proptest::collection::vec(0u8..2, 3),
                    proptest::collection::vec(0u8..2, 3),
                ),
                1..6,
            )
        ) {
            let problem = SynthesisProblem {
                signals: vec![sig("A", "P_A"), sig("B", "P_B"), sig("C", "P_C")],
                rows,
            };
            let solutions = synthesize(&problem).unwrap();
            // Count matching (kind, input) pairs per output from the rows
            // directly; each pair exists in two valve flavors.
            let mut product = 1usize;
            for o in 0..3 {
                let mut pairs = 0;
                for i in 0..3 {
                    let not_ok = problem.rows.iter().all(|(p, n)| n[o] == 1 - p[i]);
                    let buf_ok = problem.rows.iter().all(|(p, n)| n[o] == p[i]);
                    pairs += usize::from(not_ok) + usize::from(buf_ok);
                }
                product *= 2 * pairs;
            }
            prop_assert_eq!(solutions.len(), product.min(MAX_SOLUTIONS));
            // Ranking is by hysteretic part count, then rendering, without
            // duplicates.
            for pair in solutions.windows(2) {
                let ka = (pair[0].hysteretic_count(), pair[0].render());
                let kb = (pair[1].hysteretic_count(), pair[1].render());
                prop_assert!(ka < kb);
            }
        }
    }
}
