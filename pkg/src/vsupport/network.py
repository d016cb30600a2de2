"""Positive/negative-sequence equivalent circuits of a GFM inverter in a fault.

The inverter side is a reference voltage behind the virtual impedance and
the composed impedance ``z_l`` (filter capacitor to fault location). The
fault location is represented by ideal sequence sources ``v_f_pos`` and
``v_f_neg``. Three-wire inverters have no zero-sequence path, so no
zero-sequence circuit appears here.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace

from .phasor import (
    A,
    A2,
    DegenerateImpedanceError,
    Impedance,
    SequenceSet,
    ThreePhaseSet,
    deviation_magnitude,
    from_sequence,
)

__all__ = [
    "FaultKind",
    "FaultSpec",
    "GridThevenin",
    "FaultScenario",
    "FaultNetworkModel",
    "Deviations",
    "UnsupportedGroundingError",
    "sequence_currents",
    "driving_voltages",
    "phase_currents",
    "capacitor_voltages",
    "support_deviations",
    "fault_bus_voltages",
]


class UnsupportedGroundingError(ValueError):
    """Ground fault requested without zero-sequence source data."""


class FaultKind(enum.Enum):
    THREE_PHASE = "THREE_PHASE"
    SLG = "SLG"
    LL = "LL"
    LLG = "LLG"

    @classmethod
    def parse(cls, text: str) -> "FaultKind":
        key = text.strip().upper().replace("-", "_")
        aliases = {"3PH": "THREE_PHASE", "ABC": "THREE_PHASE", "LG": "SLG"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class FaultSpec:
    kind: FaultKind
    z_f: Impedance = Impedance(0.0, 0.0)

    def __post_init__(self):
        if self.z_f.resistance < 0:
            raise ValueError("fault resistance must be >= 0")


@dataclass(frozen=True)
class GridThevenin:
    """Grid seen from the fault bus: pre-fault source behind sequence impedances.

    ``z2`` defaults to ``z1`` (passive grid). ``z0`` is only needed for
    ground faults.
    """

    e: complex
    z1: Impedance
    z2: Impedance | None = None
    z0: Impedance | None = None

    @property
    def z_neg(self) -> Impedance:
        return self.z1 if self.z2 is None else self.z2


@dataclass(frozen=True)
class FaultScenario:
    """Everything in the equivalent circuit except the virtual impedance."""

    v_cref_pos: complex
    v_f_pos: complex
    v_f_neg: complex
    z_l: Impedance

    def with_vi(self, z_v: Impedance) -> "FaultNetworkModel":
        return FaultNetworkModel(self.v_cref_pos, self.v_f_pos, self.v_f_neg, self.z_l, z_v)

    def scaled(self, s: float) -> "FaultScenario":
        return replace(self, v_cref_pos=s * self.v_cref_pos, v_f_pos=s * self.v_f_pos,
                       v_f_neg=s * self.v_f_neg)


@dataclass(frozen=True)
class FaultNetworkModel:
    v_cref_pos: complex
    v_f_pos: complex
    v_f_neg: complex
    z_l: Impedance
    z_v: Impedance = Impedance(0.0, 0.0)

    def __post_init__(self):
        if self.z_v.resistance < 0 or self.z_v.reactance < 0:
            raise ValueError(f"virtual impedance must be resistive-inductive, got {self.z_v}")

    @property
    def z_total(self) -> complex:
        return self.z_v.z + self.z_l.z

    def _z_total_checked(self) -> complex:
        zt = self.z_total
        if zt == 0:
            raise DegenerateImpedanceError("|z_v + z_l| is zero")
        return zt


@dataclass(frozen=True)
class Deviations:
    """Capacitor-voltage variations and the phasor-diagram angles.

    A theta is NaN when one of the vectors defining it is zero.
    """

    dev_pos: float
    dev_neg: float
    theta_pos: float
    theta_neg: float


def sequence_currents(m: FaultNetworkModel) -> tuple[complex, complex]:
    zt = m._z_total_checked()
    return (m.v_cref_pos - m.v_f_pos) / zt, -m.v_f_neg / zt


def driving_voltages(m: FaultNetworkModel) -> ThreePhaseSet:
    """Numerators of the phase currents; they do not depend on z_v or z_l."""
    d = m.v_cref_pos - m.v_f_pos
    return ThreePhaseSet(
        d - m.v_f_neg,
        A2 * d - A * m.v_f_neg,
        A * d - A2 * m.v_f_neg,
    )


def phase_currents(m: FaultNetworkModel) -> ThreePhaseSet:
    zt = m._z_total_checked()
    vm = driving_voltages(m)
    return ThreePhaseSet(vm.a / zt, vm.b / zt, vm.c / zt)


def phase_currents_from_sequences(m: FaultNetworkModel) -> ThreePhaseSet:
    """Same quantity as :func:`phase_currents`, composed from sequence currents."""
    i_pos, i_neg = sequence_currents(m)
    return from_sequence(SequenceSet(i_pos, i_neg, 0j))


def capacitor_voltages(m: FaultNetworkModel) -> tuple[complex, complex]:
    i_pos, i_neg = sequence_currents(m)
    zl = m.z_l.z
    return zl * i_pos + m.v_f_pos, zl * i_neg + m.v_f_neg


def _angle_between(u: complex, w: complex) -> float:
    if u == 0 or w == 0:
        return math.nan
    d = cmath.phase(u) - cmath.phase(w)
    return math.degrees(math.atan2(math.sin(d), math.cos(d)))


def support_deviations(m: FaultNetworkModel) -> Deviations:
    """Deviation of each sequence capacitor voltage from its reference.

    The positive reference is ``v_cref_pos``; the negative reference is
    zero. Each deviation is the third side of the triangle formed by the
    drop across ``z_l`` and the reference-to-fault voltage, evaluated with
    the law of cosines.
    """
    i_pos, i_neg = sequence_currents(m)
    zl = m.z_l.z
    drop_pos = zl * i_pos               # capacitor to fault, positive
    span_pos = m.v_cref_pos - m.v_f_pos  # reference to fault, positive
    drop_neg = zl * i_neg
    span_neg = -m.v_f_neg
    return Deviations(
        dev_pos=deviation_magnitude(drop_pos, span_pos),
        dev_neg=deviation_magnitude(drop_neg, span_neg),
        theta_pos=_angle_between(drop_pos, span_pos),
        theta_neg=_angle_between(drop_neg, span_neg),
    )


def fault_bus_voltages(g: GridThevenin, f: FaultSpec) -> tuple[complex, complex]:
    """Positive- and negative-sequence fault-bus voltages from the grid side only.

    The inverter's own contribution to the fault bus is ignored, which is
    what treating the fault-bus voltages as ideal sources implies.
    """
    e = g.e
    z1 = g.z1.z
    z2 = g.z_neg.z
    if f.z_f.is_open:
        return e, 0j
    zf = f.z_f.z

    def _div(num: complex, den: complex) -> complex:
        if den == 0:
            raise DegenerateImpedanceError(f"{f.kind.value} interconnection has zero impedance")
        return num / den

    if f.kind is FaultKind.THREE_PHASE:
        i1 = _div(e, z1 + zf)
        return e - z1 * i1, 0j
    if f.kind is FaultKind.LL:
        i1 = _div(e, z1 + z2 + zf)
        return e - z1 * i1, z2 * i1
    if g.z0 is None:
        raise UnsupportedGroundingError(f"{f.kind.value} fault needs zero-sequence impedance z0")
    z0 = g.z0.z
    if f.kind is FaultKind.SLG:
        i1 = _div(e, z1 + z2 + z0 + 3 * zf)
        return e - z1 * i1, -z2 * i1
    # LLG: negative branch in parallel with (zero + 3 z_f)
    zg = z0 + 3 * zf
    zpar = 0j if z2 == 0 or zg == 0 else _div(z2 * zg, z2 + zg)
    i1 = _div(e, z1 + zpar)
    v1 = e - z1 * i1
    return v1, v1
