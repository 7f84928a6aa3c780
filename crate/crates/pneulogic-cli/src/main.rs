mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use pneulogic::fsm::{
    discretize_trace, extract_sequence, logic_simulate, parse_chart, reorder_states, synthesize,
    verify, AbstractMachine, FsmError, StateTransitionChart, SynthesisProblem,
};
use pneulogic::logic::Bit;
use pneulogic::netlist::parse;
use pneulogic::sim::CircuitModel;
use pneulogic::sim::{simulate, SimConfig, SimError, Trace};

#[derive(Parser)]
#[command(name = "pneu", version, about = "Simulate, verify and synthesize pneumatic logic circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SimFlags {
    /// Simulation horizon in seconds
    #[arg(long, default_value_t = 30.0)]
    t_end: f64,
    /// Maximum integration step in seconds
    #[arg(long, default_value_t = 0.01)]
    dt_max: f64,
    /// Record every Nth grid sample (events are always kept)
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

impl SimFlags {
    fn config(&self) -> SimConfig {
        SimConfig {
            t_end: self.t_end,
            dt_max: self.dt_max,
            record_stride: self.stride,
            ..SimConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a netlist (.pneu) or chart (.chart) and report diagnostics
    Check { file: PathBuf },
    /// Integrate a netlist and emit the pressure/valve trace as CSV
    Simulate {
        netlist: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Write to a file instead of stdout
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Threshold a simulated trace into per-monitor logic signals
    Discretize {
        netlist: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Minimum dwell time for the state sequence, in seconds
        #[arg(long, default_value_t = 0.05)]
        dwell: f64,
        /// Print the dwell-filtered state sequence instead of signal CSV
        #[arg(long)]
        sequence: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check a netlist's behavior against a state chart
    Verify {
        netlist: PathBuf,
        chart: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Minimum dwell time for the state sequence, in seconds
        #[arg(long, default_value_t = 0.05)]
        dwell: f64,
        /// Verify the quantized machine instead of the continuous trace
        #[arg(long)]
        quantized: bool,
    },
    /// Enumerate single-input valve networks that realize a chart
    Synthesize {
        chart: PathBuf,
        /// Print at most this many networks
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Render pressures, valve states and logic rails as an SVG
    Plot {
        netlist: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Parse(String),
    Verification(String),
    Simulation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Verification(_) => 3,
            Failure::Simulation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Parse(m)
            | Failure::Verification(m)
            | Failure::Simulation(m) => m,
        }
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::InvalidConfig(_) => Failure::Usage(e.to_string()),
        SimError::InvalidCircuit(_) | SimError::VentConflict { .. } => {
            Failure::Parse(e.to_string())
        }
        _ => Failure::Simulation(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into())
}

fn load_circuit(path: &Path) -> Result<CircuitModel, Failure> {
    let text = read(path)?;
    let result = parse(&text);
    let rendered = result.render_diagnostics(&file_name(path));
    if result.has_errors() {
        return Err(Failure::Parse(rendered.trim_end().into()));
    }
    if !rendered.is_empty() {
        eprint!("{rendered}");
    }
    Ok(result.circuit.expect("error-free parse yields a circuit"))
}

fn load_chart(path: &Path) -> Result<StateTransitionChart, Failure> {
    let text = read(path)?;
    let result = parse_chart(&text);
    let rendered = result.render_diagnostics(&file_name(path));
    if result.has_errors() {
        return Err(Failure::Parse(rendered.trim_end().into()));
    }
    if !rendered.is_empty() {
        eprint!("{rendered}");
    }
    Ok(result.chart.expect("error-free parse yields a chart"))
}

/// Writes via a sibling temp file so readers never see a partial file.
fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    let Some(path) = out else {
        print!("{content}");
        return Ok(());
    };
    let tmp = path.with_file_name(format!("{}.tmp", file_name(path)));
    let io = |e: std::io::Error| Failure::Usage(format!("{}: {e}", path.display()));
    std::fs::write(&tmp, content).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn run_simulation(circuit: &CircuitModel, flags: &SimFlags) -> Result<Trace, Failure> {
    simulate(circuit, &flags.config()).map_err(sim_failure)
}

fn render_state(bits: &[Bit]) -> String {
    bits.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
}

fn cyclically_equal(a: &[Vec<Bit>], b: &[Vec<Bit>]) -> bool {
    a.len() == b.len()
        && !a.is_empty()
        && (0..a.len()).any(|r| (0..a.len()).all(|i| a[(r + i) % a.len()] == b[i]))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { file } => check(&file),
        Command::Simulate { netlist, sim, out } => {
            let circuit = load_circuit(&netlist)?;
            let trace = run_simulation(&circuit, &sim)?;
            emit(out.as_deref(), &trace.to_csv())
        }
        Command::Discretize { netlist, sim, dwell, sequence, out } => {
            let circuit = load_circuit(&netlist)?;
            let trace = run_simulation(&circuit, &sim)?;
            let discrete = discretize_trace(&trace, &circuit.monitors)
                .map_err(|e| Failure::Parse(e.to_string()))?;
            if sequence {
                let mut text = String::new();
                for state in extract_sequence(&discrete, dwell) {
                    let _ = writeln!(text, "{}", render_state(&state));
                }
                emit(out.as_deref(), &text)
            } else {
                emit(out.as_deref(), &discrete.to_csv())
            }
        }
        Command::Verify { netlist, chart, sim, dwell, quantized } => {
            let circuit = load_circuit(&netlist)?;
            let chart = load_chart(&chart)?;
            if quantized {
                verify_quantized(&circuit, &chart)
            } else {
                verify_continuous(&circuit, &chart, &sim, dwell)
            }
        }
        Command::Synthesize { chart, limit } => synthesize_chart(&chart, limit),
        Command::Plot { netlist, sim, out } => {
            let circuit = load_circuit(&netlist)?;
            let trace = run_simulation(&circuit, &sim)?;
            let discrete = discretize_trace(&trace, &circuit.monitors)
                .map_err(|e| Failure::Parse(e.to_string()))?;
            emit(out.as_deref(), &plot::render(&circuit, &trace, &discrete))
        }
    }
}

fn check(file: &Path) -> Result<(), Failure> {
    if file.extension().is_some_and(|e| e == "chart") {
        let chart = load_chart(file)?;
        println!(
            "ok: chart {} with {} signals, {} states, cycle of {}",
            chart.name,
            chart.signals.len(),
            chart.states.len(),
            chart.cycle.len()
        );
    } else {
        let circuit = load_circuit(file)?;
        println!(
            "ok: {} actuators, {} valves, {} monitors",
            circuit.actuators.len(),
            circuit.valves.len(),
            circuit.monitors.len()
        );
    }
    Ok(())
}

fn verify_continuous(
    circuit: &CircuitModel,
    chart: &StateTransitionChart,
    sim: &SimFlags,
    dwell: f64,
) -> Result<(), Failure> {
    let trace = run_simulation(circuit, sim)?;
    let discrete =
        discretize_trace(&trace, &circuit.monitors).map_err(|e| Failure::Parse(e.to_string()))?;
    let projected = discrete.project(&chart.signals).map_err(|e| Failure::Parse(e.to_string()))?;
    let seq = extract_sequence(&projected, dwell);
    let report = match verify(&seq, chart) {
        Ok(report) => report,
        Err(e @ FsmError::InsufficientData { .. }) => {
            return Err(Failure::Verification(format!(
                "{e}; extend --t-end or lower --dwell"
            )))
        }
        Err(e) => return Err(Failure::Parse(e.to_string())),
    };
    let line = report.render(chart);
    if report.passed() {
        println!("{line}");
        Ok(())
    } else {
        Err(Failure::Verification(line))
    }
}

fn verify_quantized(circuit: &CircuitModel, chart: &StateTransitionChart) -> Result<(), Failure> {
    let machine = AbstractMachine::from_circuit(circuit).map_err(|e| Failure::Parse(e.to_string()))?;
    let cycle = match logic_simulate(&machine) {
        Ok(cycle) => cycle,
        Err(e @ (FsmError::Deadlock { .. } | FsmError::Nonperiodic { .. })) => {
            return Err(Failure::Verification(e.to_string()))
        }
        Err(e) => return Err(Failure::Parse(e.to_string())),
    };
    let reordered = reorder_states(&cycle, machine.signals(), &chart.signals)
        .map_err(|e| Failure::Parse(e.to_string()))?;
    if cyclically_equal(&reordered, &chart.cycle_bits()) {
        println!(
            "pass: quantized machine walks chart {} ({} states per cycle)",
            chart.name,
            reordered.len()
        );
        Ok(())
    } else {
        let mut msg = format!("fail: quantized cycle differs from chart {}\n", chart.name);
        let _ = writeln!(msg, "  machine cycle:");
        for st in &reordered {
            let _ = writeln!(msg, "    [{}]", render_state(st));
        }
        let _ = write!(msg, "  chart cycle:");
        for st in chart.cycle_bits() {
            let _ = write!(msg, "\n    [{}]", render_state(&st));
        }
        Err(Failure::Verification(msg))
    }
}

fn synthesize_chart(path: &Path, limit: Option<usize>) -> Result<(), Failure> {
    let chart = load_chart(path)?;
    let problem = match SynthesisProblem::from_chart(&chart) {
        Ok(problem) => problem,
        Err(e @ FsmError::InconsistentChart { .. }) => {
            return Err(Failure::Verification(e.to_string()))
        }
        Err(e) => return Err(Failure::Parse(e.to_string())),
    };
    let solutions = synthesize(&problem).map_err(|e| Failure::Parse(e.to_string()))?;
    if solutions.is_empty() {
        return Err(Failure::Verification(format!(
            "chart {} admits no single-input valve network",
            chart.name
        )));
    }
    let shown = limit.unwrap_or(solutions.len()).min(solutions.len());
    println!("{} networks realize chart {} (showing {shown})", solutions.len(), chart.name);
    for (i, solution) in solutions.iter().take(shown).enumerate() {
        println!(
            "\n# solution {}: {} valves, {} hysteretic",
            i + 1,
            solution.valve_count(),
            solution.hysteretic_count()
        );
        print!("{}", solution.render());
    }
    Ok(())
}
