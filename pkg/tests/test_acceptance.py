"""The twelve acceptance criteria, one test each, on the bundled configs.

Each test records a PASS/FAIL line with the measured values; the lines are
printed in the pytest terminal summary (see conftest.py).
"""

import json
import time

import numpy as np
import pytest

from pushguide.cli import main
from pushguide.figures import FIG3_DETUNINGS_GHZ
from pushguide.monte_carlo import mc_config_from_config, run_ensemble
from pushguide.species import capture_velocity
from pushguide.transport import HorizontalTemperature, condition_score, simulate, two_level_model
from pushguide.beam import waist_at
from pushguide.light_atom import pushing_potential

RESULTS = {}


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def verdict(number, checks, elapsed=None, limit=None):
    """Record criterion ``number``; ``checks`` is a list of (label, ok)."""
    if limit is not None:
        checks = list(checks) + [(f"runtime {elapsed:.2f} s < {limit} s", elapsed < limit)]
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{label}{'' if c else ' [X]'}" for label, c in checks)
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[number])
    assert ok, RESULTS[number]


def run(cfg):
    return simulate(cfg.beam, cfg.species, cfg.geometry, cfg.T0, cfg.options)


def test_criterion_01_optical_pumping(rb_sim, cs_sim):
    cs_eta = cs_sim.pumping.eta * 100
    rb_eta = rb_sim.pumping.eta * 100
    verdict(1, [
        (f"Cs eta {cs_eta:.3f}% vs 3.2 +-0.3", abs(cs_eta - 3.2) <= 0.3),
        (f"Rb eta {rb_eta:.3f}% vs 1.6 +-0.3", abs(rb_eta - 1.6) <= 0.3),
    ])


def test_criterion_02_capture_velocity(rb, cs):
    v_cs = capture_velocity(cs.species, cs.geometry)
    v_rb = capture_velocity(rb.species, rb.geometry)
    verdict(2, [
        (f"Cs {v_cs:.2f} m/s vs 21 +-5%", within(v_cs, 21, 0.05)),
        (f"Rb {v_rb:.2f} m/s vs 30 +-5%", within(v_rb, 30, 0.05)),
    ])


def test_criterion_03_entrance_velocity(rb_sim, cs_sim):
    v_rb, v_cs = rb_sim.report.v0, cs_sim.report.v0
    verdict(3, [
        (f"Rb v0 {v_rb:.3f} m/s vs 9 +-10%", within(v_rb, 9.0, 0.10)),
        (f"Cs v0 {v_cs:.3f} m/s vs 3.1 +-15%", within(v_cs, 3.1, 0.15)),
    ])


def test_criterion_04_arrival_velocity(rb_sim, cs_sim):
    v_rb, v_cs = rb_sim.report.v_arrival, cs_sim.report.v_arrival
    verdict(4, [
        (f"Rb v(D) {v_rb:.3f} m/s vs 12.6 +-5%", within(v_rb, 12.6, 0.05)),
        (f"Cs v(D) {v_cs:.3f} m/s vs 5.5 +-15%", within(v_cs, 5.5, 0.15)),
    ])


def test_criterion_05_travel_time(rb, cs):
    t0 = time.perf_counter()
    dt_cs = run(cs).report.travel_time * 1e3
    powers = np.linspace(5, 21, 17)
    curve = [run(rb.with_values({"beam.power_mW": p})).report.travel_time * 1e3 for p in powers]
    elapsed = time.perf_counter() - t0
    verdict(5, [
        (f"Cs dt {dt_cs:.1f} ms vs 130 +-20%", within(dt_cs, 130, 0.20)),
        (f"Rb dt(P) {curve[0]:.1f} -> {curve[-1]:.1f} ms monotone decreasing", bool(np.all(np.diff(curve) < 0))),
    ], elapsed, 1.0)


def test_criterion_06_guide_exit(rb, cs):
    t0 = time.perf_counter()
    z_rb, z_cs = run(rb).report.z_out * 100, run(cs).report.z_out * 100
    elapsed = time.perf_counter() - t0
    verdict(6, [
        (f"Rb z_out {z_rb:.2f} cm vs 28.5 +-10%", within(z_rb, 28.5, 0.10)),
        (f"Cs z_out {z_cs:.2f} cm vs 38 +-10%", within(z_cs, 38, 0.10)),
    ], elapsed, 1.0)


def test_criterion_07_cloud_sizes(rb, cs):
    t0 = time.perf_counter()
    r, c = run(rb).report, run(cs).report
    elapsed = time.perf_counter() - t0
    verdict(7, [
        (f"Rb dr_out {r.delta_r_out * 1e6:.1f} um vs 200 +-10%", within(r.delta_r_out * 1e6, 200, 0.10)),
        (f"Cs dr_out {c.delta_r_out * 1e6:.1f} um vs 470 +-10%", within(c.delta_r_out * 1e6, 470, 0.10)),
        (f"Rb dr(D) {r.delta_r_arrival * 1e3:.3f} mm vs 1.75 +-15%", within(r.delta_r_arrival * 1e3, 1.75, 0.15)),
        (f"Cs dr(D) {c.delta_r_arrival * 1e3:.3f} mm vs 1.0 +-15%", within(c.delta_r_arrival * 1e3, 1.0, 0.15)),
        (f"Rb fall {r.fall_time * 1e3:.1f} ms vs 36 +-10%", within(r.fall_time * 1e3, 36, 0.10)),
    ], elapsed, 1.0)


def test_criterion_08_exit_temperature(rb, cs):
    t0 = time.perf_counter()
    t_rb, t_cs = run(rb).report.T_h_out * 1e6, run(cs).report.T_h_out * 1e6
    elapsed = time.perf_counter() - t0
    verdict(8, [
        (f"Rb T_h(z_out) {t_rb:.2f} uK vs 25 +-20%", within(t_rb, 25, 0.20)),
        (f"Cs T_h(z_out) {t_cs:.2f} uK vs 10 +-20%", within(t_cs, 10, 0.20)),
    ], elapsed, 1.0)


def _window(cfg, power, detunings):
    scores = []
    for d in detunings:
        try:
            scores.append(run(cfg.with_values({"beam.power_mW": power, "beam.detuning_GHz": d})).report.refined_score)
        except Exception:
            scores.append(0.0)
    above = np.asarray(scores) > 0.5
    idx = np.nonzero(above)[0]
    if idx.size == 0:
        return None, True
    contiguous = idx[-1] - idx[0] + 1 == idx.size
    return (detunings[idx[0]], detunings[idx[-1]]), contiguous


def test_criterion_09_efficiency_windows(rb):
    d = np.linspace(-2.5, -0.1, 200)
    t0 = time.perf_counter()
    w21, one21 = _window(rb, 21.0, d)
    elapsed = time.perf_counter() - t0
    w10, one10 = _window(rb, 10.0, d)
    width = lambda w: 0.0 if w is None else w[1] - w[0]
    label = lambda w: "empty" if w is None else f"{w[0]:.3f}..{w[1]:.3f} GHz"
    verdict(9, [
        (f"21 mW window {label(w21)} is one interval", w21 is not None and one21),
        ("contains [-1.5, -0.6]", w21 is not None and w21[0] <= -1.5 and w21[1] >= -0.6),
        ("inside [-2.0, -0.3]", w21 is not None and w21[0] >= -2.0 and w21[1] <= -0.3),
        (f"10 mW window {label(w10)} narrower ({width(w10):.3f} < {width(w21):.3f} GHz)",
         one10 and width(w10) < width(w21)),
    ], elapsed, 10.0)


def test_criterion_10_two_level_figure(cs):
    t0 = time.perf_counter()
    peaks = {}
    for p in (10.0, 46.0):
        scores = []
        for d in FIG3_DETUNINGS_GHZ:
            pt = cs.with_values({"beam.power_mW": p, "beam.detuning_GHz": d})
            scores.append(two_level_model(pt.beam, pt.species, pt.geometry, pt.T0).score)
        peaks[p] = max(scores)
    elapsed = time.perf_counter() - t0
    ratio = peaks[46.0] / peaks[10.0]
    verdict(10, [(f"peak ratio 46/10 mW = {ratio:.0f}, within x3 of 1000", 1000 / 3 <= ratio <= 3000)], elapsed, 10.0)


def _mc_compare(cfg, sim):
    mc = mc_config_from_config(cfg)
    stats = run_ensemble(mc, cfg.beam, cfg.species, cfg.geometry, sim.pumping)
    v_an = float(sim.velocity(cfg.geometry.trap_separation))
    v_mc, se = stats.mean_vz[-1], stats.stderr_vz[-1]
    guided = stats.z <= sim.exit.z_out
    ratio = stats.T_h[guided] / sim.temperature(stats.z[guided])
    worst = float(np.max(np.abs(ratio - 1)))
    name = cfg.species.name
    return [
        (f"{name} MC v(D) {v_mc:.4f} vs {v_an:.4f} ({abs(v_mc - v_an) / se:.2f} SE)", abs(v_mc - v_an) <= 2 * se),
        (f"{name} MC guided T_h/analytic in [{ratio.min():.2f}, {ratio.max():.2f}], worst {worst:.0%} vs 15%",
         worst <= 0.15),
    ]


def test_criterion_11_property_suite(rb, cs, rb_sim, cs_sim):
    t0 = time.perf_counter()
    checks = []
    for cfg, sim in ((rb, rb_sim), (cs, cs_sim)):
        name = cfg.species.name
        z = np.linspace(0, cfg.geometry.trap_separation, 1000)
        ode = sim.temperature.integrate_ode(z)
        err = float(np.max(np.abs(ode / sim.temperature(z) - 1)))
        checks.append((f"{name} ODE vs closed form {err:.1e}", err < 1e-6))

        m, v0 = cfg.species.mass, sim.report.v0
        ke = m * sim.velocity.v_squared(z) / 2
        drop = pushing_potential(cfg.beam, cfg.species, sim.pumping, 0.0) - pushing_potential(
            cfg.beam, cfg.species, sim.pumping, z)
        resid = ke - m * v0 ** 2 / 2 - m * cfg.geometry.gravity * z - drop
        e_err = float(np.max(np.abs(resid) / ke))
        checks.append((f"{name} energy bookkeeping {e_err:.1e}", e_err < 1e-10))

        cold = HorizontalTemperature(cfg.beam, cfg.species, sim.pumping, sim.tof, cfg.T0, heating=False)
        inv = cold(z) * waist_at(cfg.beam, z) ** 2
        spread = float(np.max(np.abs(inv / inv[0] - 1)))
        checks.append((f"{name} T_h w^2 spread {spread:.1e}", spread < 1e-10))

        zo = sim.exit.z_out
        jump = abs(sim.radius(zo + 1e-9) / sim.radius(zo - 1e-9) - 1)
        checks.append((f"{name} dr jump at z_out {jump:.1e}", jump < 1e-6))
    checks.append(("f(0)=1, f(1)=0.5", condition_score(0.0) == 1.0 and condition_score(1.0) == 0.5))
    checks += _mc_compare(rb, rb_sim)
    checks += _mc_compare(cs, cs_sim)
    verdict(11, checks, time.perf_counter() - t0, 60.0)


def _cli_bytes(capsys, tmp_path, tag, *argv):
    out = tmp_path / tag
    code = main(list(argv) + ["--out", str(out)])
    stdout = capsys.readouterr().out
    files = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    return code, stdout, files


def test_criterion_12_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    sim = ["simulate", "--config", "rb_paper", "--json"]
    a = _cli_bytes(capsys, tmp_path, "s1", *sim)
    b = _cli_bytes(capsys, tmp_path, "s2", *sim)
    mc = ["mc", "--config", "cs_paper", "--json", "--set", "mc.n_atoms=1200", "--set", "mc.block_size=300",
          "--set", "mc.record_points=7"]
    c = _cli_bytes(capsys, tmp_path, "m1", *mc, "--threads", "1")
    d = _cli_bytes(capsys, tmp_path, "m2", *mc, "--threads", "3")
    e = _cli_bytes(capsys, tmp_path, "m3", *mc, "--threads", "1")
    elapsed = time.perf_counter() - t0
    verdict(12, [
        ("simulate --json repeat byte-identical", a[0] == 0 and a == b and json.loads(a[1])),
        ("mc threads 1 vs 3 byte-identical", c[0] == 0 and c == d),
        ("mc repeat byte-identical", c == e),
    ], elapsed, 60.0)
