//! Acceptance suite: one test per release criterion, each printing a
//! `[acceptance] ...: PASS/FAIL` line (visible with `--nocapture`).
//!
//! Expected values come from closed-form solutions of the piecewise dynamics
//! and from hand-stepped gait tables, not from prior runs of this code.

use std::time::Instant;

use pneulogic::fsm::{
    discretize_trace, extract_sequence, logic_simulate, parse_chart, reorder_states, synthesize,
    verify, AbstractMachine, StateTransitionChart, SynthesisProblem,
};
use pneulogic::logic::{
    gate_target, Bit, GateKind, GateRelation, LogicLevel, ThresholdSpec,
};
use pneulogic::netlist::{parse, serialize};
use pneulogic::sim::{simulate, CircuitModel, SimConfig, Trace};
use pneulogic::valve::{crank_angle, critical_distance, SliderCrankGeometry};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EVENT_TOL: f64 = 1e-6; // psi, pinned; matches SimConfig::default
const DWELL_MIN: f64 = 0.05; // s, pinned dwell filter
const GEOMETRY_REL_TOL: f64 = 1e-9;
const PERIOD_REL_TOL: f64 = 0.01;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

fn criterion(id: &str, name: &str, run: impl FnOnce() -> Result<(), String>) {
    match run() {
        Ok(()) => println!("[acceptance] {id} {name}: PASS"),
        Err(msg) => {
            println!("[acceptance] {id} {name}: FAIL ({msg})");
            panic!("{id} {name}: {msg}");
        }
    }
}

fn data_path(name: &str) -> String {
    format!("{}/../../data/{}", env!("CARGO_MANIFEST_DIR"), name)
}

fn data(name: &str) -> String {
    std::fs::read_to_string(data_path(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{}", env!("CARGO_MANIFEST_DIR"), name);
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read fixture {name}: {e}"))
}

fn circuit(name: &str) -> CircuitModel {
    let result = parse(&data(name));
    assert!(!result.has_errors(), "{name}: {:?}", result.diagnostics);
    result.circuit.expect("error-free parse yields a circuit")
}

fn chart(name: &str) -> StateTransitionChart {
    let result = parse_chart(&data(name));
    assert!(!result.has_errors(), "{name}: {:?}", result.diagnostics);
    result.chart.expect("error-free parse yields a chart")
}

fn cyclically_equal(a: &[Vec<Bit>], b: &[Vec<Bit>]) -> bool {
    a.len() == b.len()
        && !a.is_empty()
        && (0..a.len()).any(|r| (0..a.len()).all(|i| a[(r + i) % a.len()] == b[i]))
}

/// Continuous crawler pipeline: simulate, discretize, dwell-filter.
fn crawler_sequence(dt_max: f64) -> (Trace, Vec<Vec<Bit>>) {
    let circuit = circuit("crawler.pneu");
    let cfg = SimConfig { dt_max, ..SimConfig::default() };
    let trace = simulate(&circuit, &cfg).expect("crawler simulates");
    let discrete = discretize_trace(&trace, &circuit.monitors).expect("monitors discretize");
    let seq = extract_sequence(&discrete, DWELL_MIN);
    (trace, seq)
}

#[test]
fn c1_gate_truth_tables() {
    criterion("C1", "gate truth tables", || {
        let t = ThresholdSpec::constant(1.0).expect("threshold");
        let not = GateRelation::binary(GateKind::Not, "A", "B", t);
        let buf = GateRelation::binary(GateKind::Buffer, "A", "B", t);
        for bit in [0u8, 1] {
            let input = LogicLevel::binary(bit);
            let n = gate_target(&not, input).map_err(|e| e.to_string())?;
            let b = gate_target(&buf, input).map_err(|e| e.to_string())?;
            check!(n == LogicLevel::binary(1 - bit), "NOT({bit}) gave {n}");
            check!(b == LogicLevel::binary(bit), "BUFFER({bit}) gave {b}");
        }

        // Ternary output: a NOT driving a two-threshold actuator swings it
        // between the extreme codes.
        let mut ternary_out = GateRelation::binary(GateKind::Not, "A", "B", t);
        ternary_out.output_thresholds = vec!["P_B1".into(), "P_B2".into()];
        let lo = gate_target(&ternary_out, LogicLevel::binary(1)).map_err(|e| e.to_string())?;
        let hi = gate_target(&ternary_out, LogicLevel::binary(0)).map_err(|e| e.to_string())?;
        check!(lo == LogicLevel::low(2), "NOT(1) on ternary output gave {lo}");
        check!(hi == LogicLevel::high(2), "NOT(0) on ternary output gave {hi}");

        // Ternary input: two buffers fan the three-level code out to two
        // binary outputs, one per bit.
        let pair = ThresholdSpec::pair(1.0, 2.0).expect("pair");
        let mut low_bit = GateRelation::binary(GateKind::Buffer, "A", "B", pair);
        low_bit.input_bit = 0;
        let mut high_bit = GateRelation::binary(GateKind::Buffer, "A", "C", pair);
        high_bit.input_bit = 1;
        for (code, want_b, want_c) in [(&[0u8, 0][..], 0u8, 0u8), (&[0, 1], 1, 0), (&[1, 1], 1, 1)]
        {
            let input = LogicLevel::from_bits(code).map_err(|e| e.to_string())?;
            let got_b = gate_target(&low_bit, input).map_err(|e| e.to_string())?;
            let got_c = gate_target(&high_bit, input).map_err(|e| e.to_string())?;
            check!(got_b == LogicLevel::binary(want_b), "low-bit buffer on {input} gave {got_b}");
            check!(got_c == LogicLevel::binary(want_c), "high-bit buffer on {input} gave {got_c}");
        }
        Ok(())
    });
}

#[test]
fn c2_hysteresis_loop_transitions() {
    criterion("C2", "hysteresis loop on a pressure sweep", || {
        // A self-inverting latch sweeps the actuator 0 -> 2.5 -> ~0 once
        // within 4.8 s; the monitored band (0.05, 1.8) must switch exactly
        // twice, up at 1.8 and down at 0.05.
        let text = "\
actuator A fill=1 vent_coeff=2 p0=0
valve SWP kind=HNC sense=A low=0.02 high=2.5 controls=A
monitor A P_sw=hyst(0.05,1.8)
";
        let result = parse(text);
        check!(!result.has_errors(), "sweep netlist: {:?}", result.diagnostics);
        let circuit = result.circuit.expect("circuit");
        let cfg = SimConfig { t_end: 4.8, ..SimConfig::default() };
        let trace = simulate(&circuit, &cfg).map_err(|e| e.to_string())?;
        let discrete = discretize_trace(&trace, &circuit.monitors).map_err(|e| e.to_string())?;
        let track = &discrete.signals[0];
        check!(track.initial == 0, "band starts set");
        check!(
            track.changes.len() == 2,
            "expected exactly 2 transitions, got {:?}",
            track.changes
        );
        let (t_up, up_bit) = track.changes[0];
        let (t_dn, dn_bit) = track.changes[1];
        check!(up_bit == 1 && dn_bit == 0, "transition order wrong: {:?}", track.changes);
        let pressure_at = |t: f64| -> Result<f64, String> {
            trace
                .samples
                .iter()
                .find(|s| s.t == t)
                .map(|s| s.pressures[0])
                .ok_or_else(|| format!("no sample at t={t}"))
        };
        let p_up = pressure_at(t_up)?;
        let p_dn = pressure_at(t_dn)?;
        check!(
            p_up >= 1.8 && p_up - 1.8 <= EVENT_TOL,
            "rising switch at p={p_up}, want 1.8 (+{EVENT_TOL})"
        );
        check!(
            p_dn <= 0.05 && 0.05 - p_dn <= EVENT_TOL,
            "falling switch at p={p_dn}, want 0.05 (-{EVENT_TOL})"
        );
        Ok(())
    });
}

#[test]
fn c3_six_state_gait_reproduction() {
    criterion("C3", "six-state gait reproduction", || {
        let started = Instant::now();
        let (trace, seq) = crawler_sequence(SimConfig::default().dt_max);
        let chart = chart("crawler.chart");
        let discrete = discretize_trace(&trace, &circuit("crawler.pneu").monitors)
            .map_err(|e| e.to_string())?;
        let projected = discrete.project(&chart.signals).map_err(|e| e.to_string())?;
        let projected_seq = extract_sequence(&projected, DWELL_MIN);
        check!(projected_seq == seq, "signal order differs between chart and netlist");
        let report = verify(&seq, &chart).map_err(|e| e.to_string())?;
        check!(report.passed(), "{}", report.render(&chart));
        let elapsed = started.elapsed().as_secs_f64();
        check!(elapsed < 5.0, "pipeline took {elapsed:.2} s, budget 5 s");
        Ok(())
    });
}

#[test]
fn c4_cross_layer_oracle_agreement() {
    criterion("C4", "continuous and quantized layers agree", || {
        let machine =
            AbstractMachine::from_circuit(&circuit("crawler.pneu")).map_err(|e| e.to_string())?;
        let abstract_cycle = logic_simulate(&machine).map_err(|e| e.to_string())?;

        let (_, seq) = crawler_sequence(SimConfig::default().dt_max);
        check!(
            seq.len() >= abstract_cycle.len(),
            "continuous run shorter than one abstract period"
        );
        let continuous_cycle = &seq[..abstract_cycle.len()];
        check!(
            cyclically_equal(&abstract_cycle, continuous_cycle),
            "abstract {abstract_cycle:?} vs continuous {continuous_cycle:?}"
        );

        let chart = chart("crawler.chart");
        let reordered = reorder_states(&abstract_cycle, machine.signals(), &chart.signals)
            .map_err(|e| e.to_string())?;
        check!(
            cyclically_equal(&reordered, &chart.cycle_bits()),
            "abstract cycle {reordered:?} differs from chart"
        );
        Ok(())
    });
}

#[test]
fn c5_feet_cycle_and_synthesis() {
    criterion("C5", "feet four-cycle and synthesis", || {
        let machine =
            AbstractMachine::from_circuit(&circuit("feet.pneu")).map_err(|e| e.to_string())?;
        let cycle = logic_simulate(&machine).map_err(|e| e.to_string())?;
        let want: Vec<Vec<Bit>> = vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]];
        check!(cycle == want, "feet cycle {cycle:?}, want {want:?}");

        let chart = chart("feet.chart");
        let problem = SynthesisProblem::from_chart(&chart).map_err(|e| e.to_string())?;
        let solutions = synthesize(&problem).map_err(|e| e.to_string())?;
        check!(!solutions.is_empty(), "no networks synthesized");
        // The physical feet wiring: a plain NOT retracts the rear foot, a
        // hysteretic BUFFER holds the front one through the band.
        let found = solutions.iter().any(|s| {
            s.gates.len() == 2
                && s.gates[0].kind == GateKind::Not
                && s.gates[0].input == 1
                && !s.gates[0].hysteretic
                && s.gates[1].kind == GateKind::Buffer
                && s.gates[1].input == 0
                && s.gates[1].hysteretic
        });
        check!(
            found,
            "NOT + hysteretic BUFFER assignment missing from {} solutions",
            solutions.len()
        );
        Ok(())
    });
}

#[test]
fn c6_relaxation_oscillator_period() {
    criterion("C6", "relaxation oscillator period", || {
        // Closed form for fill=1, vent_coeff=2, band (0.5, 2.0), p0=0: the
        // fill leg takes 2.0 s and the decay leg ln(4)/2 s.
        let expected = 2.0 + 0.5 * f64::ln(4.0);
        let circuit = circuit("oscillator.pneu");
        let trace = simulate(&circuit, &SimConfig::default()).map_err(|e| e.to_string())?;
        let hv = trace
            .valves
            .iter()
            .position(|v| v == "HV")
            .ok_or("oscillator valve missing from trace")?;
        let reset_t = trace
            .samples
            .windows(2)
            .find_map(|w| match (w[0].memories[hv], w[1].memories[hv]) {
                (Some(a), Some(b)) if a.bit() == 1 && b.bit() == 0 => Some(w[1].t),
                _ => None,
            })
            .ok_or("latch never reset")?;
        let rel = (reset_t - expected).abs() / expected;
        check!(
            rel <= PERIOD_REL_TOL,
            "first period {reset_t:.6} s vs closed form {expected:.6} s (rel err {rel:.2e})"
        );
        Ok(())
    });
}

#[test]
fn c7_geometry_round_trip() {
    criterion("C7", "slider-crank geometry round-trip", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5C7);
        for case in 0..1000 {
            let l_ab: f64 = rng.random_range(0.2..3.0);
            let l_bc: f64 = rng.random_range(0.2..3.0);
            let theta: f64 = rng.random_range(5.0..175.0);
            let gap = (l_ab - l_bc).abs();
            let s0 = 0.5 * (gap + l_ab + l_bc);
            let geom = SliderCrankGeometry::new(l_ab, l_bc, s0, theta)
                .map_err(|e| format!("case {case}: {e}"))?;
            let s_crit = critical_distance(&geom);
            let back = crank_angle(&geom, s_crit).map_err(|e| format!("case {case}: {e}"))?;
            let rel = (back - theta).abs() / theta;
            check!(
                rel <= GEOMETRY_REL_TOL,
                "case {case}: theta {theta} -> s {s_crit} -> {back} (rel err {rel:.2e})"
            );

            let steps = 10;
            let mut last = None;
            for k in 1..=steps {
                let s = gap + (l_ab + l_bc - gap) * k as f64 / (steps + 1) as f64;
                let angle = crank_angle(&geom, s).map_err(|e| format!("case {case}: {e}"))?;
                if let Some(prev) = last {
                    check!(angle > prev, "case {case}: angle not increasing at s={s}");
                }
                last = Some(angle);
            }
        }
        Ok(())
    });
}

#[test]
fn c8_parser_robustness() {
    criterion("C8", "parser round-trip, fuzz, diagnostics", || {
        // Canonical serialization is a fixpoint for every shipped netlist.
        let dir = format!("{}/../../data", env!("CARGO_MANIFEST_DIR"));
        let mut netlists = 0;
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.extension().is_none_or(|e| e != "pneu") {
                continue;
            }
            netlists += 1;
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let first = parse(&text);
            check!(!first.has_errors(), "{name} does not parse: {:?}", first.diagnostics);
            let canon = serialize(&first.circuit.expect("circuit"));
            let second = parse(&canon);
            check!(!second.has_errors(), "{name}: canonical form does not parse");
            let again = serialize(&second.circuit.expect("circuit"));
            check!(again == canon, "{name}: serialize/parse is not a fixpoint");
        }
        check!(netlists >= 4, "expected the shipped netlists, found {netlists}");

        // 10,000 seeded mutations of the reference netlist must never panic.
        let base = data("crawler.pneu").into_bytes();
        let alphabet: &[u8] =
            b" abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_=.#()+-\n\t";
        let mut rng = ChaCha8Rng::seed_from_u64(0x5C8);
        for case in 0..10_000 {
            let mut bytes = base.clone();
            for _ in 0..rng.random_range(1..=3usize) {
                match rng.random_range(0..3u8) {
                    0 if !bytes.is_empty() => {
                        let i = rng.random_range(0..bytes.len());
                        bytes.remove(i);
                    }
                    1 => {
                        let i = rng.random_range(0..=bytes.len());
                        bytes.insert(i, alphabet[rng.random_range(0..alphabet.len())]);
                    }
                    _ if !bytes.is_empty() => {
                        let i = rng.random_range(0..bytes.len());
                        bytes[i] = alphabet[rng.random_range(0..alphabet.len())];
                    }
                    _ => {}
                }
            }
            let text = String::from_utf8_lossy(&bytes).into_owned();
            let outcome = std::panic::catch_unwind(|| {
                let _ = parse(&text);
            });
            check!(outcome.is_ok(), "parse panicked on mutation case {case}");
        }

        // Every malformed fixture yields located diagnostics.
        for name in ["bad_token.pneu", "bad_semantics.pneu", "bad_kind.pneu"] {
            let result = parse(&fixture(name));
            check!(result.has_errors(), "{name} unexpectedly parsed");
            for d in &result.diagnostics {
                check!(d.line >= 1 && d.col >= 1, "{name}: diagnostic lacks a location: {d:?}");
                let line = d.render(name);
                check!(
                    line.starts_with(&format!("{name}:{}:{}:", d.line, d.col)),
                    "{name}: bad rendering {line}"
                );
            }
        }
        let result = parse_chart(&fixture("bad_chart.chart"));
        check!(result.has_errors(), "bad_chart.chart unexpectedly parsed");
        for d in &result.diagnostics {
            check!(d.line >= 1 && d.col >= 1, "chart diagnostic lacks a location: {d:?}");
        }
        Ok(())
    });
}

#[test]
fn c9_refinement_stability() {
    criterion("C9", "event times stable under step refinement", || {
        let dt = SimConfig::default().dt_max;
        let (coarse_trace, coarse_seq) = crawler_sequence(dt);
        let (fine_trace, fine_seq) = crawler_sequence(dt / 2.0);
        check!(coarse_seq == fine_seq, "discrete sequence changed under refinement");

        for valve in &coarse_trace.valves {
            let coarse = coarse_trace.switch_times(valve);
            let fine = fine_trace.switch_times(valve);
            check!(
                coarse.len() == fine.len(),
                "valve {valve}: {} vs {} switch events",
                coarse.len(),
                fine.len()
            );
            for (a, b) in coarse.iter().zip(&fine) {
                check!(
                    (a - b).abs() < 2.0 * dt,
                    "valve {valve}: event at {a} moved to {b} (> {})",
                    2.0 * dt
                );
            }
        }
        Ok(())
    });
}
