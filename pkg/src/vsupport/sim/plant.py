"""Average-model plant: LCL filter, transformer/grid branches and a switched fault.

States live in the amplitude-invariant stationary frame, which is exact
for a three-wire system (no zero sequence can flow). Layout of the state
vector::

    0-1  filter (inverter-side) current i_L      alpha, beta
    2-3  capacitor voltage v_C                   alpha, beta
    4-5  output current i_o (capacitor -> fault bus)
    6-7  grid current i_g (fault bus -> grid source)
    8-9  grid source voltage v_g (harmonic oscillator)

A line-to-line fault between phases b and c through resistance R_f is a
shunt conductance 2/R_f on the beta channel only; a three-phase fault is
1/R_f on both channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..network import FaultKind
from ..ratings import Ratings

N_STATES = 10
IL, VC, IO, IG, VG = slice(0, 2), slice(2, 4), slice(4, 6), slice(6, 8), slice(8, 10)
DIVERGENCE_LIMIT = 1e6

SQRT3_2 = math.sqrt(3.0) / 2.0


class DivergenceError(RuntimeError):
    def __init__(self, t: float, detail: str = ""):
        super().__init__(f"simulation diverged at t = {t:.6f} s {detail}".rstrip())
        self.t = t


@dataclass(frozen=True)
class PlantParams:
    l_f: float
    c_f: float
    l_1: float              # transformer + grid segment 1 (capacitor to fault bus)
    l_2: float              # grid segment 2 (fault bus to source)
    r_1: float = 0.0
    r_2: float = 0.0
    r_lf: float = 0.0
    v_g_peak: float = 0.0
    omega_g: float = 314.0
    grid_phase: float = 0.0  # rad, phase-a source angle at t = 0
    fault_kind: FaultKind | None = None
    r_fault: float = math.inf
    t_apply: float = math.inf
    t_clear: float = math.inf

    def __post_init__(self):
        if min(self.l_f, self.c_f, self.l_1, self.l_2) <= 0:
            raise ValueError("inductances and capacitance must be positive")
        if min(self.r_1, self.r_2, self.r_lf) < 0:
            raise ValueError("resistances must be >= 0")
        if self.fault_kind is not None:
            if self.fault_kind not in (FaultKind.LL, FaultKind.THREE_PHASE):
                raise ValueError(f"time-domain fault kind {self.fault_kind.value} is not supported")
            if not 0 < self.r_fault < math.inf:
                raise ValueError("time-domain faults need a finite positive fault resistance")
            if not self.t_apply < self.t_clear:
                raise ValueError("fault apply time must precede clear time")

    @classmethod
    def from_ratings(cls, r: Ratings, fault_kind: FaultKind | None = None,
                     t_apply: float = math.inf, t_clear: float = math.inf) -> "PlantParams":
        return cls(
            l_f=r.l_f_H, c_f=r.c_f_F,
            l_1=r.l_t_H + r.l_g1_H, r_1=r.r_par_ohm + r.r_g1_ohm,
            l_2=r.l_g2_H, r_2=r.r_g2_ohm,
            v_g_peak=r.v_g_peak, omega_g=r.omega_n,
            fault_kind=fault_kind, r_fault=r.z_f_ohm,
            t_apply=t_apply, t_clear=t_clear,
        )

    def shunt(self, faulted: bool) -> tuple[float, float]:
        """Fault-branch conductance seen by the (alpha, beta) channels."""
        if not faulted or self.fault_kind is None:
            return 0.0, 0.0
        if self.fault_kind is FaultKind.LL:
            return 0.0, 2.0 / self.r_fault
        return 1.0 / self.r_fault, 1.0 / self.r_fault

    def faulted_at(self, t: float) -> bool:
        return self.fault_kind is not None and self.t_apply <= t < self.t_clear


def system_matrices(p: PlantParams, faulted: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(A, B, C_f) with x' = A x + B u and fault-bus voltage v_f = C_f x."""
    a = np.zeros((N_STATES, N_STATES))
    b = np.zeros((N_STATES, 2))
    cf = np.zeros((2, N_STATES))
    for k, g in enumerate(p.shunt(faulted)):
        il, vc, io, ig, vg = 0 + k, 2 + k, 4 + k, 6 + k, 8 + k
        a[il, il] = -p.r_lf / p.l_f
        a[il, vc] = -1.0 / p.l_f
        b[il, k] = 1.0 / p.l_f
        a[vc, il] = 1.0 / p.c_f
        a[vc, io] = -1.0 / p.c_f
        if g == 0.0:
            # series branch: both currents share one derivative
            row = np.zeros(N_STATES)
            row[vc] = 1.0
            row[vg] = -1.0
            row[io] = -p.r_1
            row[ig] = -p.r_2
            row /= p.l_1 + p.l_2
            a[io] = row
            a[ig] = row
            cf[k] = -p.l_1 * row
            cf[k, vc] += 1.0
            cf[k, io] -= p.r_1
        else:
            # v_f = (i_o - i_g) / g
            a[io, vc] = 1.0 / p.l_1
            a[io, io] = -p.r_1 / p.l_1 - 1.0 / (g * p.l_1)
            a[io, ig] = 1.0 / (g * p.l_1)
            a[ig, io] = 1.0 / (g * p.l_2)
            a[ig, ig] = -p.r_2 / p.l_2 - 1.0 / (g * p.l_2)
            a[ig, vg] = -1.0 / p.l_2
            cf[k, io] = 1.0 / g
            cf[k, ig] = -1.0 / g
    a[8, 9] = -p.omega_g
    a[9, 8] = p.omega_g
    return a, b, cf


def rk4_step(a: np.ndarray, b: np.ndarray, x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of x' = A x + B u with u held."""
    bu = b @ u
    k1 = a @ x + bu
    k2 = a @ (x + 0.5 * h * k1) + bu
    k3 = a @ (x + 0.5 * h * k2) + bu
    k4 = a @ (x + h * k3) + bu
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_matrices(a: np.ndarray, b: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Transition pair (P, G) with rk4_step(x, u) == P x + G u exactly."""
    m = h * a
    eye = np.eye(a.shape[0])
    m2 = m @ m
    m3 = m2 @ m
    p = eye + m + m2 / 2.0 + m3 / 6.0 + m3 @ m / 24.0
    q = eye + m / 2.0 + m2 / 6.0 + m3 / 24.0
    return p, h * q @ b


def initial_state(v_c: complex = 0j, i_l: complex = 0j, i_o: complex = 0j, i_g: complex | None = None,
                  v_g: complex = 0j) -> np.ndarray:
    """State vector from positive-sequence space vectors at t = 0."""
    x = np.zeros(N_STATES)
    for sl, z in ((IL, i_l), (VC, v_c), (IO, i_o), (IG, i_o if i_g is None else i_g), (VG, v_g)):
        x[sl] = z.real, z.imag
    return x


def step_plant(x: np.ndarray, u_ab: np.ndarray, p: PlantParams, dt: float, t: float = 0.0) -> np.ndarray:
    """Advance one sub-step with the topology in force at time ``t``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, b, _ = system_matrices(p, p.faulted_at(t))
    x_new = rk4_step(a, b, x, np.asarray(u_ab, dtype=float), dt)
    check_finite(x_new, t + dt)
    return x_new


def check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
        raise DivergenceError(t)


def merge_series(x: np.ndarray, p: PlantParams, was: tuple[float, float], now: tuple[float, float]) -> np.ndarray:
    """Combine i_o and i_g into one series current where a shunt was removed.

    Flux linkage through L_1 + L_2 is conserved.
    """
    x = x.copy()
    for k in range(2):
        if was[k] != 0.0 and now[k] == 0.0:
            i = (p.l_1 * x[4 + k] + p.l_2 * x[6 + k]) / (p.l_1 + p.l_2)
            x[4 + k] = x[6 + k] = i
    return x


def stored_energy(x: np.ndarray, p: PlantParams) -> float:
    """Magnetic plus electric energy of the passive elements (scaled alpha-beta units)."""
    il, vc, io, ig = x[IL], x[VC], x[IO], x[IG]
    return 0.5 * (p.l_f * il @ il + p.c_f * vc @ vc + p.l_1 * io @ io + p.l_2 * ig @ ig)


def ab_to_abc(alpha, beta):
    """Inverse amplitude-invariant Clarke transform (no zero sequence)."""
    return alpha, -0.5 * alpha + SQRT3_2 * beta, -0.5 * alpha - SQRT3_2 * beta


def abc_to_ab(a, b, c):
    return (2.0 * a - b - c) / 3.0, (b - c) / math.sqrt(3.0)


class DiscretePlant:
    """Plant advanced over one controller period by ``n_sub`` RK4 sub-steps.

    The RK4 update is linear in (x, u), so sub-step maps are precomputed per
    topology; results equal repeated :func:`rk4_step` calls up to rounding.
    Topology changes are placed on the nearest sub-step boundary.
    """

    def __init__(self, p: PlantParams, t_s: float, n_sub: int = 10):
        if n_sub < 1 or not t_s > 0:
            raise ValueError("need t_s > 0 and n_sub >= 1")
        self.p = p
        self.t_s = t_s
        self.n_sub = n_sub
        self.h = t_s / n_sub
        self._maps = {}
        self._cf = {}
        for faulted in (False, True):
            a, b, cf = system_matrices(p, faulted)
            step_p, step_g = rk4_matrices(a, b, self.h)
            powers_p = [np.eye(N_STATES)]
            powers_g = [np.zeros((N_STATES, 2))]
            for _ in range(n_sub):
                powers_g.append(step_p @ powers_g[-1] + step_g)
                powers_p.append(step_p @ powers_p[-1])
            self._maps[faulted] = (powers_p, powers_g)
            self._cf[faulted] = cf
        self._faulted = False

    def fault_bus_voltage(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._cf[self.p.faulted_at(t)] @ x

    def _switch(self, x: np.ndarray, now: bool) -> np.ndarray:
        if self._faulted and not now:
            x = merge_series(x, self.p, self.p.shunt(True), self.p.shunt(False))
        self._faulted = now
        return x

    def reset(self) -> None:
        self._faulted = False

    def advance(self, x: np.ndarray, u: np.ndarray, t0: float) -> np.ndarray:
        """State one controller period after ``t0`` with ``u`` held constant."""
        p, h = self.p, self.h
        x = self._switch(x, p.faulted_at(t0 + 0.5 * h))
        cuts = []
        if p.fault_kind is not None:
            for t_event in (p.t_apply, p.t_clear):
                if not math.isfinite(t_event):
                    continue
                k = round((t_event - t0) / h)
                if 0 < k < self.n_sub:
                    cuts.append(k)
        done = 0
        for k in sorted(cuts) + [self.n_sub]:
            if k > done:
                powers_p, powers_g = self._maps[self._faulted]
                x = powers_p[k - done] @ x + powers_g[k - done] @ u
                done = k
            if k < self.n_sub:
                x = self._switch(x, p.faulted_at(t0 + (k + 0.5) * h))
        check_finite(x, t0 + self.t_s)
        return x
