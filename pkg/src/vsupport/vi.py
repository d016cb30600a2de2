"""Virtual-impedance design: adaptive law, current-limited sizing, angle sweeps."""
from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .network import (
    FaultScenario,
    capacitor_voltages,
    driving_voltages,
    phase_currents,
    support_deviations,
)
from .phasor import DegenerateImpedanceError, Impedance

__all__ = [
    "AdaptiveViParams",
    "ViSizing",
    "SweepPoint",
    "InfeasibleSizingError",
    "eval_adaptive_vi",
    "required_total_impedance",
    "size_vi",
    "angle_sweep",
    "default_angles",
    "dense_angles",
    "best_point",
    "optimal_angle",
    "is_unimodal",
    "adaptive_equilibrium",
]


class InfeasibleSizingError(ValueError):
    """Even a zero virtual impedance keeps the current below the limit target.

    Raised when the required total impedance is smaller than the physical
    impedance to the fault, so no VI can make the worst phase hit the limit.
    """

    def __init__(self, message: str, angle: float | None = None):
        super().__init__(message)
        self.angle = angle


@dataclass(frozen=True)
class AdaptiveViParams:
    """Gains of the current-activated virtual impedance.

    ``k_x`` is the reactance gain (ohm per amp above threshold) and
    ``n_xr`` the X/R ratio, so the VI angle is ``atan(n_xr)``. A purely
    resistive VI has no finite X/R ratio representation; it is written
    with ``n_xr = 0`` and its resistance gain in ``k_r``.
    """

    k_x: float
    n_xr: float
    i_th: float
    k_r: float | None = None

    def __post_init__(self):
        if self.k_x < 0 or self.i_th < 0:
            raise ValueError("k_x and i_th must be >= 0")
        if self.n_xr < 0 or math.isnan(self.n_xr):
            raise ValueError("n_xr must be >= 0")
        if self.n_xr == 0:
            if self.k_r is None or self.k_r < 0:
                raise ValueError("a resistive VI (n_xr = 0) needs k_r >= 0")
            if self.k_x != 0:
                raise ValueError("a resistive VI (n_xr = 0) must have k_x = 0")
        elif self.k_r is not None:
            raise ValueError("k_r is only used for the resistive limit n_xr = 0")

    @classmethod
    def from_angle(cls, angle: float, k_z: float, i_th: float) -> "AdaptiveViParams":
        """VI whose magnitude grows by ``k_z`` ohm/A at ``angle`` degrees."""
        if not 0.0 <= angle <= 90.0:
            raise ValueError(f"VI angle {angle} outside [0, 90] degrees")
        if angle == 0.0:
            return cls(k_x=0.0, n_xr=0.0, i_th=i_th, k_r=k_z)
        if angle == 90.0:
            return cls(k_x=k_z, n_xr=math.inf, i_th=i_th)
        rad = math.radians(angle)
        return cls(k_x=k_z * math.sin(rad), n_xr=math.tan(rad), i_th=i_th)

    @property
    def angle(self) -> float:
        if self.n_xr == 0:
            return 0.0
        return math.degrees(math.atan(self.n_xr))

    @property
    def k_z(self) -> float:
        """Magnitude gain in ohm per amp."""
        if self.n_xr == 0:
            return self.k_r
        return self.k_x / math.sin(math.atan(self.n_xr))


@dataclass(frozen=True)
class ViSizing:
    angle: float
    magnitude: float

    @property
    def impedance(self) -> Impedance:
        return Impedance.from_polar(self.magnitude, self.angle)


@dataclass(frozen=True)
class SweepPoint:
    angle: float
    vi_magnitude: float
    v_c_pos_mag: float
    v_c_neg_mag: float
    dev_pos: float
    dev_neg: float
    i_max: float
    theta_pos: float = math.nan
    theta_neg: float = math.nan


def eval_adaptive_vi(i_omag: float, p: AdaptiveViParams) -> tuple[float, float]:
    """Return (r_v, x_v) for the present maximum phase-current magnitude."""
    if i_omag < 0:
        raise ValueError("i_omag must be >= 0")
    excess = i_omag - p.i_th if i_omag >= p.i_th else 0.0
    if p.n_xr == 0:
        return p.k_r * excess, 0.0
    x_v = p.k_x * excess
    return x_v / p.n_xr, x_v


def required_total_impedance(v_m_max: float, i_m: float) -> float:
    """|z_v + z_l| that puts the worst phase current exactly at ``i_m``."""
    if not i_m > 0:
        raise ValueError(f"current limit must be positive, got {i_m}")
    if v_m_max < 0:
        raise ValueError("v_m_max must be >= 0")
    return v_m_max / i_m


def size_vi(angle: float, z_l: Impedance, required: float) -> ViSizing:
    """Smallest VI magnitude at ``angle`` giving ``|z_v + z_l| = required``.

    Solves m^2 + 2 m (R_L cos + X_L sin) + |z_l|^2 - required^2 = 0 for
    its nonnegative root.
    """
    if not 0.0 <= angle <= 90.0:
        raise ValueError(f"VI angle {angle} outside [0, 90] degrees")
    if not required > 0:
        raise ValueError(f"required impedance must be positive, got {required}")
    zl_mag = z_l.magnitude
    if required < zl_mag:
        raise InfeasibleSizingError(
            f"required |z_v + z_l| = {required:.6g} ohm is below |z_l| = {zl_mag:.6g} ohm; "
            "the current stays under the limit even without a virtual impedance",
            angle,
        )
    rad = math.radians(angle)
    b = z_l.resistance * math.cos(rad) + z_l.reactance * math.sin(rad)
    gap = required * required - zl_mag * zl_mag
    disc = b * b + gap
    if disc < 0:
        raise InfeasibleSizingError(f"no real VI magnitude at {angle} degrees", angle)
    root = math.sqrt(disc)
    # cancellation-free form of -b + sqrt(b^2 + gap)
    m = gap / (b + root) if b + root > 0 else root - b
    return ViSizing(angle, max(m, 0.0))


def default_angles(z_l: Impedance | None = None, step: float = 5.0) -> list[float]:
    """0..90 degrees in ``step`` increments, plus the exact angle of ``z_l``."""
    n = int(round(90.0 / step))
    grid = [round(k * step, 10) for k in range(n + 1)]
    if grid[-1] != 90.0:
        grid.append(90.0)
    if z_l is not None and z_l.magnitude > 0:
        opt = optimal_angle(z_l)
        if 0.0 <= opt <= 90.0 and not any(abs(opt - g) < 1e-9 for g in grid):
            grid.append(opt)
    return sorted(grid)


def dense_angles(z_l: Impedance | None = None) -> list[float]:
    return default_angles(z_l, step=0.1)


def _sweep_one(scenario: FaultScenario, required: float, angle: float) -> SweepPoint:
    sizing = size_vi(angle, scenario.z_l, required)
    model = scenario.with_vi(sizing.impedance)
    v_pos, v_neg = capacitor_voltages(model)
    dev = support_deviations(model)
    i_max = max(abs(i) for i in phase_currents(model))
    return SweepPoint(
        angle=angle,
        vi_magnitude=sizing.magnitude,
        v_c_pos_mag=abs(v_pos),
        v_c_neg_mag=abs(v_neg),
        dev_pos=dev.dev_pos,
        dev_neg=dev.dev_neg,
        i_max=i_max,
        theta_pos=dev.theta_pos,
        theta_neg=dev.theta_neg,
    )


def angle_sweep(
    scenario: FaultScenario,
    i_m: float,
    angles: Iterable[float],
    executor: Executor | None = None,
) -> list[SweepPoint]:
    """Size the VI for the current limit at each angle and evaluate support.

    Output is ordered by angle regardless of evaluation order.
    """
    angles = sorted(float(a) for a in angles)
    if not angles:
        raise ValueError("angle grid is empty")
    for a in angles:
        if not 0.0 <= a <= 90.0:
            raise ValueError(f"VI angle {a} outside [0, 90] degrees")
    v_m_max = max(abs(v) for v in driving_voltages(scenario.with_vi(Impedance(0.0, 0.0))))
    required = required_total_impedance(v_m_max, i_m)
    if required == 0:
        raise InfeasibleSizingError("no driving voltage; the fault draws no current", angles[0])
    # infeasibility does not depend on the angle; report it against the first one
    size_vi(angles[0], scenario.z_l, required)
    if executor is None:
        return [_sweep_one(scenario, required, a) for a in angles]
    return list(executor.map(_sweep_one, [scenario] * len(angles), [required] * len(angles), angles))


def best_point(points: Sequence[SweepPoint]) -> SweepPoint:
    """Point with the smallest positive-sequence deviation.

    Near-ties (1e-12 relative) go to the larger angle, so a purely
    inductive ``z_l`` reports 90 degrees.
    """
    dev = np.array([p.dev_pos for p in points])
    floor = dev.min()
    tol = 1e-12 * max(floor, dev.max(), 1.0)
    candidates = [p for p, d in zip(points, dev) if d <= floor + tol]
    return max(candidates, key=lambda p: p.angle)


def optimal_angle(z_l: Impedance) -> float:
    """VI angle that maximizes voltage support: the angle of ``z_l`` itself."""
    if z_l.magnitude == 0:
        raise DegenerateImpedanceError("z_l has zero magnitude; the optimal angle is undefined")
    return z_l.angle


def is_unimodal(values: Sequence[float], rel_tol: float = 1e-12) -> bool:
    """True if the sequence only decreases, then only increases."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return True
    tol = rel_tol * max(np.abs(v).max(), 1.0)
    d = np.diff(v)
    k = int(np.argmin(v))
    return bool(np.all(d[:k] <= tol) and np.all(d[k:] >= -tol))


def adaptive_equilibrium(scenario: FaultScenario, p: AdaptiveViParams) -> tuple[float, Impedance]:
    """Steady state of the adaptive VI in the phasor circuit.

    Returns (worst-phase current, VI) where the current fed back through
    the adaptive law reproduces itself.
    """
    from scipy.optimize import brentq

    v_m_max = max(abs(v) for v in driving_voltages(scenario.with_vi(Impedance(0.0, 0.0))))
    zl = scenario.z_l.z
    if abs(zl) == 0:
        raise DegenerateImpedanceError("z_l has zero magnitude")

    def vi_at(i: float) -> Impedance:
        r_v, x_v = eval_adaptive_vi(i, p)
        return Impedance(r_v, x_v)

    i_free = v_m_max / abs(zl)
    if i_free <= p.i_th or p.k_z == 0:
        return i_free, Impedance(0.0, 0.0)
    i_eq = brentq(lambda i: v_m_max / abs(zl + vi_at(i).z) - i, p.i_th, i_free, xtol=1e-14, rtol=1e-15)
    return i_eq, vi_at(i_eq)
