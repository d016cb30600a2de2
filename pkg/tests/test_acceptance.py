"""Acceptance criteria 1-9. A summary line per criterion is printed at the end of the run."""
import cmath
import math
import time
from pathlib import Path

import numpy as np
import pytest

from simcache import bundled_run, fixed_gain_run
from vsupport.cli import main
from vsupport.config import bundled_configs, load
from vsupport.network import (
    FaultScenario,
    capacitor_voltages,
    driving_voltages,
    phase_currents,
    phase_currents_from_sequences,
    sequence_currents,
    support_deviations,
)
from vsupport.phasor import Impedance, deviation_magnitude
from vsupport.sim.control import SequenceExtractor, extract_sequences
from vsupport.sim.runner import phasor_prediction
from vsupport.study import analyze, simulate, sweep
from vsupport.vi import angle_sweep, dense_angles, optimal_angle

# published fault-window magnitudes, quoted only as an informational band
PUBLISHED = {75.0: (69.4, 10.6), 0.0: (62.7, 13.6)}


def random_scenario(rng, v_f_neg=None):
    z_l = Impedance.from_polar(rng.uniform(0.05, 10.0), rng.uniform(0.0, 90.0))
    v_cref = cmath.rect(rng.uniform(20.0, 150.0), rng.uniform(-math.pi, math.pi))
    v_f_pos = cmath.rect(rng.uniform(0.0, 100.0), rng.uniform(-math.pi, math.pi))
    if v_f_neg is None:
        v_f_neg = cmath.rect(rng.uniform(0.5, 60.0), rng.uniform(-math.pi, math.pi))
    return FaultScenario(v_cref, v_f_pos, v_f_neg, z_l)


def feasible_limit(rng, sc):
    """A current limit below the no-VI worst-phase current, so sizing has a root."""
    v_m = max(abs(v) for v in driving_voltages(sc.with_vi(Impedance(0.0, 0.0))))
    return v_m / sc.z_l.magnitude / rng.uniform(1.05, 6.0)


@pytest.mark.criterion(1)
def test_c1_optimal_angle_equals_line_angle(record_property):
    rng = np.random.default_rng(20240401)
    t0 = time.perf_counter()
    worst_err, worst_theta = 0.0, 0.0
    for _ in range(200):
        sc = random_scenario(rng)
        opt = optimal_angle(sc.z_l)
        pts = angle_sweep(sc, feasible_limit(rng, sc), dense_angles(sc.z_l))
        a_pos = min(pts, key=lambda p: p.dev_pos).angle
        a_neg = min(pts, key=lambda p: p.dev_neg).angle
        at = next(p for p in pts if p.angle == opt)
        worst_err = max(worst_err, abs(a_pos - opt), abs(a_neg - opt))
        worst_theta = max(worst_theta, abs(at.theta_pos), abs(at.theta_neg))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max angle error {worst_err:.3g} deg, max theta {worst_theta:.3g}, "
                              f"{elapsed:.2f} s")
    assert worst_err <= 0.1
    assert worst_theta < 1e-9
    assert elapsed < 10.0


@pytest.mark.criterion(2)
def test_c2_sized_points_bind_current_limit(record_property):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        sc = random_scenario(rng)
        i_m = feasible_limit(rng, sc)
        for p in angle_sweep(sc, i_m, np.linspace(0.0, 90.0, 19)):
            worst = max(worst, abs(p.i_max / i_m - 1.0))
    for name in ("tableI_LL.cfg", "sym_3ph.cfg"):
        cfg = load(name)
        for p in sweep(cfg):
            worst = max(worst, abs(p.i_max / cfg.ratings.i_m - 1.0))
    record_property("detail", f"max relative error {worst:.3g}")
    assert worst <= 1e-9


@pytest.mark.criterion(3)
def test_c3_sweep_shape(record_property):
    cfg = load("tableI_LL.cfg")
    assert cfg.ratings.z_l.angle == pytest.approx(75.0, abs=1e-9)
    pts = {p.angle: p for p in sweep(cfg)}
    rising = [pts[a] for a in sorted(pts) if a <= 75.0]
    pos = np.array([p.v_c_pos_mag for p in rising])
    neg = np.array([p.v_c_neg_mag for p in rising])
    record_property("detail", f"v_c_pos {pos[0]:.2f} -> {pts[75.0].v_c_pos_mag:.2f} -> "
                              f"{pts[90.0].v_c_pos_mag:.2f} V at 0/75/90 deg")
    assert np.all(np.diff(pos) > 0)
    assert np.all(np.diff(neg) < 0)
    assert pts[90.0].v_c_pos_mag < pts[75.0].v_c_pos_mag
    assert pts[90.0].v_c_neg_mag > pts[75.0].v_c_neg_mag


@pytest.mark.criterion(4)
def test_c4_time_domain_ordering(record_property):
    runs, elapsed = {}, {}
    for angle, name in ((0.0, "sim_LL_vi0.cfg"), (75.0, "sim_LL_vi75.cfg")):
        t0 = time.perf_counter()
        runs[angle] = simulate(load(name))
        elapsed[angle] = time.perf_counter() - t0
    m0, m75 = runs[0.0].metrics, runs[75.0].metrics
    band = []
    for a, m in ((75.0, m75), (0.0, m0)):
        pub_pos, pub_neg = PUBLISHED[a]
        band.append(f"{a:g} deg: {m.v_c_pos_mag:.1f}/{m.v_c_neg_mag:.2f} V "
                    f"({m.v_c_pos_mag / pub_pos - 1:+.0%}/{m.v_c_neg_mag / pub_neg - 1:+.0%} vs published)")
    record_property("detail", "; ".join(band))
    i_m = load("sim_LL_vi0.cfg").ratings.i_m
    for m in (m0, m75):
        assert m.i_max == pytest.approx(i_m, rel=0.05)
    assert m75.v_c_pos_mag > m0.v_c_pos_mag
    assert m75.v_c_neg_mag < m0.v_c_neg_mag
    assert max(elapsed.values()) < 60.0


def simulatable():
    return [n for n in bundled_configs() if load(n).fault is not None]


@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", simulatable())
def test_c5_cross_validation(name, record_property):
    res = bundled_run(name)
    m = res.metrics
    pos, neg = phasor_prediction(m, res.z_l)
    err_pos = abs(m.v_c_pos_mag - abs(pos)) / abs(pos)
    # a vanishing predicted magnitude is judged on the positive-sequence scale
    err_neg = abs(m.v_c_neg_mag - abs(neg)) / max(abs(neg), abs(pos))
    record_property("detail", f"{name}: {err_pos:.2%}/{err_neg:.2%}")
    assert err_pos < 0.05
    assert err_neg < 0.05


@pytest.mark.criterion(6)
def test_c6_oracle_equivalence(record_property):
    rng = np.random.default_rng(99)
    worst_i, worst_d = 0.0, 0.0
    for _ in range(10_000):
        sc = random_scenario(rng)
        model = sc.with_vi(Impedance.from_polar(rng.uniform(0.0, 20.0), rng.uniform(0.0, 90.0)))
        direct = phase_currents(model)
        composed = phase_currents_from_sequences(model)
        scale = max(max(abs(i) for i in direct), 1e-300)
        worst_i = max(worst_i, max(abs(x - y) for x, y in zip(direct, composed)) / scale)
        v_pos, v_neg = capacitor_voltages(model)
        dev = support_deviations(model)
        # the negative-sequence reference is zero
        for ref_v, v_c, d in ((sc.v_cref_pos, v_pos, dev.dev_pos), (0j, v_neg, dev.dev_neg)):
            scale = max(abs(ref_v), abs(v_c))
            worst_d = max(worst_d, abs(d - abs(ref_v - v_c)) / scale,
                          abs(deviation_magnitude(ref_v, v_c) - abs(ref_v - v_c)) / scale)
    record_property("detail", f"currents {worst_i:.2g}, deviations {worst_d:.2g}")
    assert worst_i < 1e-12
    assert worst_d < 1e-12


@pytest.mark.criterion(7)
def test_c7_symmetric_degeneracy(record_property):
    rng = np.random.default_rng(3)
    for _ in range(500):
        sc = random_scenario(rng, v_f_neg=0j)
        model = sc.with_vi(Impedance.from_polar(rng.uniform(0.0, 20.0), rng.uniform(0.0, 90.0)))
        _, i_neg = sequence_currents(model)
        _, v_neg = capacitor_voltages(model)
        assert i_neg == 0
        assert v_neg == 0
        mags = phase_currents(model).magnitudes()
        assert max(mags) - min(mags) <= 1e-12 * max(mags)
    rep = analyze(load("sym_3ph.cfg"))
    record_property("detail", f"sym_3ph: v_c_neg {rep['v_c_neg_V']} V, phase currents "
                              f"{rep['i_a_A']:.6f}/{rep['i_b_A']:.6f}/{rep['i_c_A']:.6f} A")
    assert rep["v_c_neg_V"] == 0
    assert rep["i_a_A"] == pytest.approx(rep["i_b_A"], rel=1e-12)
    assert rep["i_a_A"] == pytest.approx(rep["i_c_A"], rel=1e-12)


@pytest.mark.criterion(8)
def test_c8_substep_convergence(record_property):
    coarse = fixed_gain_run("sim_LL_vi75.cfg", 10).metrics
    fine = fixed_gain_run("sim_LL_vi75.cfg", 20).metrics
    changes = {k: abs(getattr(fine, k) / getattr(coarse, k) - 1.0)
               for k in ("v_c_pos_mag", "v_c_neg_mag", "i_max")}
    record_property("detail", "substep change " + ", ".join(f"{k} {v:.2g}" for k, v in changes.items()))
    assert max(changes.values()) < 0.005


@pytest.mark.criterion(8)
@pytest.mark.parametrize("opposite", ["neg", "pos"])
def test_c8_extractor_rejection(opposite, record_property):
    w, ts = 314.0, 1e-4
    period = 2 * math.pi / w
    t = np.arange(int(round(4 * period / ts))) * ts
    amp = 80.0
    sign = 1.0 if opposite == "neg" else -1.0
    v = amp * np.exp(1j * (sign * w * t + 0.3))
    pos, neg = extract_sequences(v.real, v.imag, SequenceExtractor(w, ts))
    leak = np.hypot(*np.array(neg if opposite == "neg" else pos).T)[t >= 2 * period]
    record_property("detail", f"{opposite} leakage {leak.max() / amp:.2%} after 2 cycles")
    assert leak.max() < 0.01 * amp


@pytest.mark.criterion(9)
@pytest.mark.parametrize("argv, fname", [
    (["sweep", "--dense"], "sweep.csv"),
    (["simulate", "--config", "sim_LL_vi75.cfg"], "timeseries.csv"),
    (["verify", "--count", "50"], "verify.csv"),
])
def test_c9_byte_identical_outputs(argv, fname, tmp_path, record_property):
    blobs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main([*argv, "--seed", "11", "--out", str(out)]) == 0
        blobs.append((out / fname).read_bytes())
    record_property("detail", f"{fname} {len(blobs[0])} bytes")
    assert blobs[0] == blobs[1]
