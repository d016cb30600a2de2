"""Closed-loop time stepping, waveform logging and fault-window metrics."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ..network import FaultNetworkModel, capacitor_voltages
from ..phasor import Impedance, ThreePhaseSet, to_sequence
from .control import ControllerParams, GfmController
from .plant import IL, IO, VC, DiscretePlant, PlantParams, ab_to_abc, initial_state

CSV_COLUMNS = ("time_s", "v_ca", "v_cb", "v_cc", "i_oa", "i_ob", "i_oc",
               "v_c_pos_mag", "v_c_neg_mag", "r_v", "x_v")


@dataclass(frozen=True)
class Timing:
    duration: float
    settle_cycles: float = 10.0
    measure_cycles: int = 5
    n_sub: int = 10

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.n_sub < 1 or self.measure_cycles < 1 or self.settle_cycles < 0:
            raise ValueError("invalid timing")


@dataclass
class TimeSeries:
    t: np.ndarray
    v_c: np.ndarray          # (n, 3) abc
    i_o: np.ndarray          # (n, 3) abc
    v_c_pos_mag: np.ndarray
    v_c_neg_mag: np.ndarray
    r_v: np.ndarray
    x_v: np.ndarray
    # diagnostics, not exported
    v_ref: np.ndarray        # (n, 2) droop reference, alpha-beta
    v_f: np.ndarray          # (n, 2) fault-bus voltage, alpha-beta
    i_omag: np.ndarray
    omega: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def rows(self):
        for k in range(self.t.size):
            yield (self.t[k], *self.v_c[k], *self.i_o[k], self.v_c_pos_mag[k], self.v_c_neg_mag[k],
                   self.r_v[k], self.x_v[k])


@dataclass(frozen=True)
class FaultMetrics:
    v_c_pos_mag: float
    v_c_neg_mag: float
    i_max: float
    window_start: float
    window_end: float
    # equilibrium quantities for cross-checks (phase-a referenced phasors)
    v_c_pos: complex = 0j
    v_c_neg: complex = 0j
    v_ref_pos: complex = 0j
    v_f_pos: complex = 0j
    v_f_neg: complex = 0j
    r_v: float = 0.0
    x_v: float = 0.0
    i_omag: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def z_v(self) -> Impedance:
        return Impedance(self.r_v, self.x_v)


def fit_phasor(t: np.ndarray, x: np.ndarray, omega: float, harmonics=(0, 2, 3)) -> complex:
    """Least-squares fundamental phasor X with x(t) ~ Re(X e^{j omega t}).

    DC and the listed harmonics are fitted alongside so that ripple does
    not leak into the fundamental.
    """
    cols = [np.cos(omega * t), -np.sin(omega * t)]
    for h in harmonics:
        if h == 0:
            cols.append(np.ones_like(t))
        else:
            cols += [np.cos(h * omega * t), np.sin(h * omega * t)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), x, rcond=None)
    return complex(coef[0], coef[1])


def sequence_phasors(t: np.ndarray, abc: np.ndarray, omega: float):
    ph = ThreePhaseSet(*(fit_phasor(t, abc[:, k], omega) for k in range(3)))
    return to_sequence(ph)


def prefault_operating_point(plant: PlantParams, cp: ControllerParams, iterations: int = 30):
    """Steady state with perfect voltage tracking and no VI.

    Returns (E, delta, i_o, P, Q) where the capacitor voltage is E at angle
    delta relative to the grid source.
    """
    d = cp.droop
    z = complex(plant.r_1 + plant.r_2, plant.omega_g * (plant.l_1 + plant.l_2))
    vg = plant.v_g_peak

    def flows(e, delta):
        vc = cmath.rect(e, delta)
        io = (vc - vg) / z
        s = 1.5 * vc * io.conjugate()
        return io, s.real, s.imag

    e, delta = d.v_n, 0.0
    for _ in range(iterations):
        try:
            delta = brentq(lambda a: flows(e, a)[1] - d.p_set, -math.pi / 2, math.pi / 2)
        except ValueError as exc:
            raise ValueError("no pre-fault operating point delivers the active power set-point") from exc
        _, _, q = flows(e, delta)
        e = d.v_n + d.n_q * (d.q_set - q)
    io, p, q = flows(e, delta)
    return e, delta, io, p, q


def run_scenario(plant: PlantParams, cp: ControllerParams, timing: Timing | float):
    """Simulate and return (TimeSeries, FaultMetrics or None when no fault window fits)."""
    if not isinstance(timing, Timing):
        timing = Timing(float(timing))
    ts = cp.t_s
    n = int(round(timing.duration / ts))
    dp = DiscretePlant(plant, ts, timing.n_sub)

    e0, delta, io0, p0, q0 = prefault_operating_point(plant, cp)
    vc0 = cmath.rect(e0, delta)
    il0 = io0 + 1j * plant.omega_g * plant.c_f * vc0
    rot = cmath.rect(1.0, plant.grid_phase)
    x = initial_state(v_c=vc0 * rot, i_l=il0 * rot, i_o=io0 * rot, v_g=plant.v_g_peak * rot)
    ctrl = GfmController(cp)
    ctrl.preset(delta + plant.grid_phase, p0, q0)
    u0 = vc0 + complex(plant.r_lf, plant.omega_g * plant.l_f) * il0
    ctrl.warm_start(vc0 * rot, io0 * rot, il0 * rot, u0 * rot)

    t = np.arange(n) * ts
    v_c = np.empty((n, 2))
    i_o = np.empty((n, 2))
    v_ref = np.empty((n, 2))
    v_f = np.empty((n, 2))
    cols = {k: np.empty(n) for k in ("vpos", "vneg", "r_v", "x_v", "i_omag", "omega", "p", "q")}
    for k in range(n):
        tk = t[k]
        v_f[k] = dp.fault_bus_voltage(x, tk)
        out = ctrl.step(x[IL], x[VC], x[IO])
        v_c[k] = x[VC]
        i_o[k] = x[IO]
        v_ref[k] = out.v_ref
        cols["vpos"][k] = math.hypot(*out.v_pos)
        cols["vneg"][k] = math.hypot(*out.v_neg)
        cols["r_v"][k] = out.r_v
        cols["x_v"][k] = out.x_v
        cols["i_omag"][k] = out.i_omag
        cols["omega"][k] = out.omega
        cols["p"][k] = out.p
        cols["q"][k] = out.q
        x = dp.advance(x, np.array(out.u), tk)

    series = TimeSeries(
        t=t,
        v_c=np.column_stack(ab_to_abc(v_c[:, 0], v_c[:, 1])),
        i_o=np.column_stack(ab_to_abc(i_o[:, 0], i_o[:, 1])),
        v_c_pos_mag=cols["vpos"], v_c_neg_mag=cols["vneg"],
        r_v=cols["r_v"], x_v=cols["x_v"],
        v_ref=v_ref, v_f=v_f, i_omag=cols["i_omag"], omega=cols["omega"],
        p=cols["p"], q=cols["q"],
    )
    return series, fault_metrics(series, plant, timing)


def measurement_window(plant: PlantParams, timing: Timing) -> tuple[float, float] | None:
    if plant.fault_kind is None or not math.isfinite(plant.t_apply):
        return None
    period = 2.0 * math.pi / plant.omega_g
    start = plant.t_apply + timing.settle_cycles * period
    end = start + timing.measure_cycles * period
    if end > min(plant.t_clear, timing.duration) + 1e-12:
        return None
    return start, end


def fault_metrics(series: TimeSeries, plant: PlantParams, timing: Timing) -> FaultMetrics | None:
    win = measurement_window(plant, timing)
    if win is None:
        return None
    start, end = win
    mask = (series.t >= start) & (series.t < end)
    t = series.t[mask]
    w = plant.omega_g
    vseq = sequence_phasors(t, series.v_c[mask], w)
    ref = series.v_ref[mask]
    vref_seq = sequence_phasors(t, np.column_stack(ab_to_abc(ref[:, 0], ref[:, 1])), w)
    vf = series.v_f[mask]
    vf_seq = sequence_phasors(t, np.column_stack(ab_to_abc(vf[:, 0], vf[:, 1])), w)
    return FaultMetrics(
        v_c_pos_mag=abs(vseq.pos),
        v_c_neg_mag=abs(vseq.neg),
        i_max=float(np.abs(series.i_o[mask]).max()),
        window_start=start,
        window_end=end,
        v_c_pos=vseq.pos,
        v_c_neg=vseq.neg,
        v_ref_pos=vref_seq.pos,
        v_f_pos=vf_seq.pos,
        v_f_neg=vf_seq.neg,
        r_v=float(series.r_v[mask].mean()),
        x_v=float(series.x_v[mask].mean()),
        i_omag=float(series.i_omag[mask].mean()),
        extras={
            "v_ref_neg_mag": abs(vref_seq.neg),
            "omega_mean": float(series.omega[mask].mean()),
            "p_mean": float(series.p[mask].mean()),
        },
    )


def phasor_prediction(m: FaultMetrics, z_l: Impedance) -> tuple[complex, complex]:
    """Sequence-network capacitor voltages at the simulated equilibrium."""
    model = FaultNetworkModel(m.v_ref_pos, m.v_f_pos, m.v_f_neg, z_l, m.z_v)
    return capacitor_voltages(model)


@dataclass(frozen=True)
class TuningStep:
    k_z: float
    i_max: float
    vi_magnitude: float


def tune_vi_gain(plant: PlantParams, cp: ControllerParams, timing: Timing, i_target: float,
                 tol: float = 0.01, max_iter: int = 8):
    """Adjust the adaptive VI gain until the settled worst-phase peak hits ``i_target``.

    The angle and threshold are kept. Each pass rescales the total
    impedance by the current ratio (the phase currents are inversely
    proportional to it) and converts the implied VI magnitude back into a
    gain through the adaptive law. Returns (cp, series, metrics, history).
    """
    from ..vi import InfeasibleSizingError, size_vi

    if cp.vi is None:
        raise ValueError("tuning needs an adaptive virtual impedance")
    vi = cp.vi
    if not i_target > vi.i_th:
        raise ValueError("target current must exceed the VI activation threshold")
    z_l = Impedance(plant.r_1, plant.omega_g * plant.l_1)
    history = []
    for _ in range(max_iter):
        series, m = run_scenario(plant, cp, timing)
        if m is None:
            raise ValueError("timing leaves no measurement window inside the fault")
        history.append(TuningStep(cp.vi.k_z, m.i_max, m.z_v.magnitude))
        if abs(m.i_max / i_target - 1.0) <= tol:
            return cp, series, m, history
        z_now = abs(m.z_v.z + z_l.z)
        try:
            mag = size_vi(vi.angle, z_l, z_now * m.i_max / i_target).magnitude
        except InfeasibleSizingError:
            mag = 0.0
        k_new = mag / (i_target - vi.i_th)
        cp = replace(cp, vi=type(vi).from_angle(vi.angle, k_new, vi.i_th))
    return cp, series, m, history
