//! Self-contained SVG rendering of a simulation: a pressure panel with
//! threshold guides, a valve-state panel, and a logic-rail panel.

use std::fmt::Write;

use pneulogic::fsm::DiscreteTrace;
use pneulogic::sim::CircuitModel;
use pneulogic::sim::Trace;

const WIDTH: f64 = 960.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 30.0;
const GAP: f64 = 40.0;
const PRESSURE_H: f64 = 240.0;
const ROW_H: f64 = 22.0;
const MAX_POINTS: usize = 1500;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Panel {
    top: f64,
    height: f64,
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick spacing of 1/2/5×10^k giving roughly six intervals.
fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let pow = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * pow >= raw {
            return m * pow;
        }
    }
    raw
}

pub fn render(circuit: &CircuitModel, trace: &Trace, rails: &DiscreteTrace) -> String {
    let t_end = trace.end_time().max(f64::MIN_POSITIVE);

    let valve_rows = trace.valves.len();
    let rail_rows = rails.signals.len();
    let valves_h = ROW_H * valve_rows.max(1) as f64 + 8.0;
    let rails_h = ROW_H * rail_rows.max(1) as f64 + 8.0;

    let pressures = Panel { top: TOP, height: PRESSURE_H };
    let valves = Panel { top: pressures.top + pressures.height + GAP, height: valves_h };
    let logic = Panel { top: valves.top + valves.height + GAP, height: rails_h };
    let height = logic.top + logic.height + 40.0;
    let plot_w = WIDTH - LEFT - RIGHT;
    let x_of = |t: f64| LEFT + t / t_end * plot_w;

    let mut rungs: Vec<f64> = circuit
        .monitors
        .iter()
        .flat_map(|m| m.threshold.rungs())
        .chain(circuit.valves.iter().flat_map(|v| v.thresholds.rungs()))
        .collect();
    rungs.sort_by(|a, b| a.total_cmp(b));
    rungs.dedup();

    let p_top = trace
        .samples
        .iter()
        .flat_map(|s| s.pressures.iter().copied())
        .chain(rungs.iter().copied())
        .fold(1.0f64, f64::max)
        * 1.08;
    let y_of = |p: f64| pressures.top + pressures.height * (1.0 - p / p_top);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="monospace" font-size="11">"##
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{height}" fill="white"/>"##);

    // Time axis grid and labels, shared by all panels.
    let step = tick_step(t_end);
    let mut t = 0.0;
    while t <= t_end * (1.0 + 1e-9) {
        let x = x_of(t.min(t_end));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#eeeeee"/>"##,
            logic.top + logic.height
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x:.1}" y="{:.1}" text-anchor="middle" fill="#444444">{t}</text>"##,
            logic.top + logic.height + 16.0
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="#444444">time (s)</text>"##,
        LEFT + plot_w / 2.0,
        logic.top + logic.height + 32.0
    );

    render_pressures(&mut svg, circuit, trace, &pressures, &rungs, p_top, &x_of, &y_of);
    render_valves(&mut svg, trace, &valves, &x_of, t_end);
    render_rails(&mut svg, rails, &logic, &x_of, t_end);

    svg.push_str("</svg>\n");
    svg
}

#[allow(clippy::too_many_arguments)]
fn render_pressures(
    svg: &mut String,
    circuit: &CircuitModel,
    trace: &Trace,
    panel: &Panel,
    rungs: &[f64],
    p_top: f64,
    x_of: &dyn Fn(f64) -> f64,
    y_of: &dyn Fn(f64) -> f64,
) {
    let _ = writeln!(
        svg,
        r##"<text x="{LEFT}" y="{:.1}" fill="#222222" font-weight="bold">pressure (psi)</text>"##,
        panel.top - 10.0
    );
    let bottom = panel.top + panel.height;
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{:.1}" x2="{LEFT}" y2="{bottom:.1}" stroke="#444444"/>"##,
        panel.top
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{bottom:.1}" x2="{:.1}" y2="{bottom:.1}" stroke="#444444"/>"##,
        WIDTH - RIGHT
    );
    let p_step = tick_step(p_top);
    let mut p = 0.0;
    while p <= p_top {
        let y = y_of(p);
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{y:.1}" text-anchor="end" fill="#444444">{p:.1}</text>"##,
            LEFT - 6.0
        );
        p += p_step;
    }

    for &rung in rungs {
        let y = y_of(rung);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#999999" stroke-dasharray="5,4"/>"##,
            WIDTH - RIGHT
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{y:.1}" text-anchor="end" fill="#999999">{rung}</text>"##,
            WIDTH - RIGHT - 4.0
        );
    }

    // Thin dense traces but always keep event samples.
    let stride = trace.samples.len().div_ceil(MAX_POINTS).max(1);
    for (i, name) in trace.actuators.iter().enumerate() {
        let mut points = String::new();
        for (j, s) in trace.samples.iter().enumerate() {
            if j % stride != 0 && !s.event && j != trace.samples.len() - 1 {
                continue;
            }
            let _ = write!(points, "{:.1},{:.2} ", x_of(s.t), y_of(s.pressures[i]));
        }
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"##,
            points.trim_end(),
            color(i)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" fill="{}">{}</text>"##,
            LEFT + 10.0 + 60.0 * i as f64,
            panel.top + 14.0,
            color(i),
            escape(name)
        );
    }
    let _ = circuit; // geometry of the panel depends only on monitors/valves above
}

fn render_valves(
    svg: &mut String,
    trace: &Trace,
    panel: &Panel,
    x_of: &dyn Fn(f64) -> f64,
    t_end: f64,
) {
    let _ = writeln!(
        svg,
        r##"<text x="{LEFT}" y="{:.1}" fill="#222222" font-weight="bold">valve state (1 = open)</text>"##,
        panel.top - 10.0
    );
    for (i, name) in trace.valves.iter().enumerate() {
        let base = panel.top + ROW_H * (i + 1) as f64;
        let y_bit = |bit: u8| base - f64::from(bit) * (ROW_H - 8.0);
        let mut points = String::new();
        let mut last = trace.samples[0].statuses[i].as_bit();
        let _ = write!(points, "{:.1},{:.2} ", x_of(0.0), y_bit(last));
        for s in &trace.samples {
            let bit = s.statuses[i].as_bit();
            if bit != last {
                let _ = write!(points, "{:.1},{:.2} ", x_of(s.t), y_bit(last));
                let _ = write!(points, "{:.1},{:.2} ", x_of(s.t), y_bit(bit));
                last = bit;
            }
        }
        let _ = write!(points, "{:.1},{:.2}", x_of(t_end), y_bit(last));
        let _ = writeln!(
            svg,
            r##"<polyline points="{points}" fill="none" stroke="{}" stroke-width="1.5"/>"##,
            color(i)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{base:.1}" text-anchor="end" fill="#222222">{}</text>"##,
            LEFT - 6.0,
            escape(name)
        );
    }
}

fn render_rails(
    svg: &mut String,
    rails: &DiscreteTrace,
    panel: &Panel,
    x_of: &dyn Fn(f64) -> f64,
    t_end: f64,
) {
    let _ = writeln!(
        svg,
        r##"<text x="{LEFT}" y="{:.1}" fill="#222222" font-weight="bold">logic</text>"##,
        panel.top - 10.0
    );
    for (i, track) in rails.signals.iter().enumerate() {
        let base = panel.top + ROW_H * (i + 1) as f64;
        let y_bit = |bit: u8| base - f64::from(bit) * (ROW_H - 8.0);
        let mut points = String::new();
        let mut last = track.initial;
        let _ = write!(points, "{:.1},{:.2} ", x_of(rails.t_start), y_bit(last));
        for &(t, bit) in &track.changes {
            let _ = write!(points, "{:.1},{:.2} ", x_of(t), y_bit(last));
            let _ = write!(points, "{:.1},{:.2} ", x_of(t), y_bit(bit));
            last = bit;
        }
        let _ = write!(points, "{:.1},{:.2}", x_of(t_end), y_bit(last));
        let _ = writeln!(
            svg,
            r##"<polyline points="{points}" fill="none" stroke="{}" stroke-width="1.5"/>"##,
            color(i)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{base:.1}" text-anchor="end" fill="#222222">{}</text>"##,
            LEFT - 6.0,
            escape(&track.name())
        );
    }
}
