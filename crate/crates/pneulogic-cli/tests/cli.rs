use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(format!("{}/../../data/{}", env!("CARGO_MANIFEST_DIR"), name))
}

fn pneu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pneu")).args(args).output().expect("spawn pneu")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_reports_a_clean_netlist() {
    let out = pneu(&["check", data("crawler.pneu").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("3 actuators, 3 valves, 3 monitors"));
}

#[test]
fn check_reports_a_clean_chart() {
    let out = pneu(&["check", data("feet.chart").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("chart feet"));
}

#[test]
fn parse_errors_exit_2_with_located_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.pneu");
    std::fs::write(&path, "actuator A fill=oops vent_coeff=1 p0=0\n").unwrap();
    let out = pneu(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("broken.pneu:1:"), "stderr: {}", stderr(&out));
}

#[test]
fn missing_input_exits_1() {
    let out = pneu(&["check", "no-such-file.pneu"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_1_and_help_exits_0() {
    let out = pneu(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pneu(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("synthesize"));
}

#[test]
fn simulate_writes_csv_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let out = pneu(&[
        "simulate",
        data("oscillator.pneu").to_str().unwrap(),
        "--t-end",
        "5",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("t,A.p,HV.status,HV.mem\n"), "header: {}", &csv[..40]);
    assert!(!dir.path().join("trace.csv.tmp").exists(), "temp file left behind");
}

#[test]
fn simulation_divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runaway.pneu");
    std::fs::write(
        &path,
        "actuator A fill=1 vent_coeff=1 p0=0 vent=closed\n\
         actuator B fill=0 vent_coeff=1 p0=0\n\
         valve V kind=NC sense=A threshold=1 controls=B\n",
    )
    .unwrap();
    let out = pneu(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("diverged"), "stderr: {}", stderr(&out));
}

#[test]
fn bad_sim_flags_exit_1() {
    let out = pneu(&["simulate", data("crawler.pneu").to_str().unwrap(), "--dt-max", "-1"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}

#[test]
fn discretize_sequence_walks_the_gait() {
    let out = pneu(&[
        "discretize",
        data("crawler.pneu").to_str().unwrap(),
        "--sequence",
        "--t-end",
        "12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("0 0 0"));
    assert_eq!(lines.next(), Some("0 1 0"));
    assert_eq!(lines.next(), Some("1 1 0"));
}

#[test]
fn verify_passes_the_crawler_chart() {
    let out = pneu(&[
        "verify",
        data("crawler.pneu").to_str().unwrap(),
        data("crawler.chart").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("pass"), "stdout: {}", stdout(&out));
}

#[test]
fn verify_quantized_passes_the_feet_chart() {
    let out = pneu(&[
        "verify",
        "--quantized",
        data("feet.pneu").to_str().unwrap(),
        data("feet.chart").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("pass"));
}

#[test]
fn verify_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tampered.chart");
    let original = std::fs::read_to_string(data("crawler.chart")).unwrap();
    let tampered = original.replace("cycle S0 S1 S2 S3 S4 S5", "cycle S0 S2 S1 S3 S4 S5");
    assert_ne!(original, tampered);
    std::fs::write(&path, tampered).unwrap();
    let out = pneu(&[
        "verify",
        data("crawler.pneu").to_str().unwrap(),
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("diverges"), "stderr: {}", stderr(&out));
}

#[test]
fn synthesize_lists_ranked_networks() {
    let out = pneu(&["synthesize", data("feet.chart").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("4 networks"), "stdout: {text}");
    assert!(text.contains("kind=NC"), "stdout: {text}");
    assert!(text.contains("kind=HNO"), "stdout: {text}");
}

#[test]
fn unsatisfiable_chart_exits_3() {
    // Both successors flip with the *other* signal's value, so no
    // single-input gate assignment can realize the step function.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("twist.chart");
    std::fs::write(
        &path,
        "chart twist\n\
         signals A[a] B[b]\n\
         state S0 0 0\n\
         state S1 0 1\n\
         state S2 1 0\n\
         state S3 1 1\n\
         cycle S0 S1 S2 S3\n",
    )
    .unwrap();
    let out = pneu(&["synthesize", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("no single-input valve network"));
}

#[test]
fn plot_renders_all_three_panels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.svg");
    let out = pneu(&[
        "plot",
        data("crawler.pneu").to_str().unwrap(),
        "--t-end",
        "12",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.starts_with("<svg "));
    assert!(svg.ends_with("</svg>\n"));
    assert!(svg.contains("pressure (psi)"));
    assert!(svg.contains("valve state"));
    assert!(svg.contains("logic"));
    assert!(svg.matches("<polyline").count() >= 9, "3 pressures + 3 valves + 3 rails");
}
