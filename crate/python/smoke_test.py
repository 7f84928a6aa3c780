#!/usr/bin/env python3
"""Builds the pneulogic extension and drives the full pipeline through it."""

import pathlib
import shutil
import subprocess
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def build_extension() -> None:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "pneulogic-py"], cwd=ROOT, check=True
    )
    shutil.copy2(ROOT / "target/release/libpneulogic_py.so", HERE / "pneulogic.so")


def main() -> None:
    build_extension()
    sys.path.insert(0, str(HERE))
    import pneulogic

    # Scalar quantizers.
    assert pneulogic.discretize_binary(2.0, 1.5) == 1
    assert pneulogic.discretize_binary(1.0, 1.5) == 0
    assert pneulogic.discretize_ternary(1.5, 1.0, 2.0) == [0, 1]
    assert pneulogic.discretize_ternary(0.5, 1.0, 2.0) == [0, 0]
    assert pneulogic.discretize_ternary(2.5, 1.0, 2.0) == [1, 1]
    bit, mem = pneulogic.hysteretic_step(0, 1.0, 0.5, 2.0)
    assert (bit, mem) == (0, 0), "inside the band the latch holds"
    bit, mem = pneulogic.hysteretic_step(0, 2.5, 0.5, 2.0)
    assert (bit, mem) == (1, 1), "crossing the upper rung sets the latch"

    # Slider-crank round trip.
    theta = 37.5
    s_crit = pneulogic.critical_distance(1.0, 2.0, 2.2, theta)
    back = pneulogic.crank_angle(1.0, 2.0, 2.2, theta, s_crit)
    assert abs(back - theta) < 1e-9, f"{back} != {theta}"

    # Full crawler pipeline: parse, simulate, discretize, verify.
    circuit = pneulogic.Circuit.parse((ROOT / "data/crawler.pneu").read_text())
    assert circuit.actuators == ["F", "R", "M"]
    assert len(circuit.valves) == 3
    trace = circuit.simulate(t_end=30.0)
    assert abs(trace.end_time - 30.0) < 1e-9
    seq = trace.sequence(dwell=0.05)
    chart = pneulogic.Chart.parse((ROOT / "data/crawler.chart").read_text())
    passed, report = chart.verify(seq)
    assert passed, report
    print(report)

    # The quantized machine walks the same six-state cycle.
    cycle = circuit.quantized_cycle()
    assert len(cycle) == 6, cycle
    n = len(cycle)
    chart_cycle = chart.cycle()
    assert any(
        all(cycle[(r + i) % n] == chart_cycle[i] for i in range(n)) for r in range(n)
    ), f"{cycle} vs {chart_cycle}"

    # Synthesis reproduces the feet wiring among its ranked networks.
    feet = pneulogic.Chart.parse((ROOT / "data/feet.chart").read_text())
    networks = feet.synthesize()
    assert len(networks) == 4, networks
    assert any("kind=HNO" in n for n in networks), networks

    # Malformed input surfaces as ValueError with located diagnostics.
    try:
        pneulogic.Circuit.parse("actuator A fill=oops vent_coeff=1 p0=0\n")
    except ValueError as e:
        assert "<netlist>:1:" in str(e), e
    else:
        raise AssertionError("malformed netlist did not raise")

    # Serialization is canonical: a second round trip is a fixpoint.
    canon = circuit.serialize()
    assert pneulogic.Circuit.parse(canon).serialize() == canon

    print("smoke test passed")


if __name__ == "__main__":
    main()
