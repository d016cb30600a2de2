"""Complex phasor helpers and symmetrical-component transforms.

Phasors are plain Python ``complex`` values. Angles cross the public
boundary in degrees and are handled in radians internally. Magnitudes
follow the phase-to-neutral peak convention used throughout the package.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "A",
    "Impedance",
    "SequenceSet",
    "ThreePhaseSet",
    "DegenerateImpedanceError",
    "phasor",
    "polar",
    "angle_deg",
    "rotator_a",
    "from_sequence",
    "to_sequence",
    "deviation_magnitude",
]


class DegenerateImpedanceError(ZeroDivisionError):
    """An impedance with zero magnitude ended up in a denominator."""


def phasor(magnitude: float, angle: float = 0.0) -> complex:
    """Return ``magnitude∠angle`` with the angle in degrees."""
    return cmath.rect(magnitude, math.radians(angle))


def polar(p: complex) -> tuple[float, float]:
    """Return (magnitude, angle in degrees)."""
    return abs(p), math.degrees(cmath.phase(p))


def angle_deg(p: complex) -> float:
    return math.degrees(cmath.phase(p))


def rotator_a() -> complex:
    """The Fortescue operator 1∠120°."""
    return complex(-0.5, math.sqrt(3.0) / 2.0)


A = rotator_a()
A2 = A * A


@dataclass(frozen=True)
class Impedance:
    """Series impedance in ohms."""

    resistance: float
    reactance: float = 0.0

    def __post_init__(self):
        if math.isnan(self.resistance) or math.isnan(self.reactance):
            raise ValueError("impedance components must not be NaN")
        if self.resistance < 0:
            raise ValueError(f"resistance must be >= 0, got {self.resistance}")

    @classmethod
    def from_complex(cls, z: complex) -> "Impedance":
        return cls(z.real, z.imag)

    @classmethod
    def from_polar(cls, magnitude: float, angle: float) -> "Impedance":
        """Build from magnitude (ohm) and angle (degrees).

        Angles of exactly 0 or 90 degrees produce an exactly zero
        reactance or resistance rather than a 1e-17 residue.
        """
        if angle == 90.0:
            return cls(0.0, magnitude)
        if angle == 0.0:
            return cls(magnitude, 0.0)
        z = phasor(magnitude, angle)
        return cls(z.real, z.imag)

    @classmethod
    def open(cls) -> "Impedance":
        """Open circuit sentinel (infinite resistance)."""
        return cls(math.inf, 0.0)

    @property
    def z(self) -> complex:
        return complex(self.resistance, self.reactance)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.resistance, self.reactance)

    @property
    def angle(self) -> float:
        """Phase angle in degrees."""
        return math.degrees(math.atan2(self.reactance, self.resistance))

    @property
    def is_open(self) -> bool:
        return math.isinf(self.resistance) or math.isinf(self.reactance)

    def __add__(self, other: "Impedance") -> "Impedance":
        return Impedance(self.resistance + other.resistance, self.reactance + other.reactance)

    def __complex__(self) -> complex:
        return self.z


class ThreePhaseSet(NamedTuple):
    a: complex
    b: complex
    c: complex

    def magnitudes(self) -> tuple[float, float, float]:
        return abs(self.a), abs(self.b), abs(self.c)


class SequenceSet(NamedTuple):
    pos: complex
    neg: complex
    zero: complex = 0j


def from_sequence(s: SequenceSet) -> ThreePhaseSet:
    """Synthesize phase quantities from sequence components."""
    pos, neg, zero = s
    return ThreePhaseSet(
        pos + neg + zero,
        A2 * pos + A * neg + zero,
        A * pos + A2 * neg + zero,
    )


def to_sequence(t: ThreePhaseSet) -> SequenceSet:
    """Fortescue analysis of a phase set (inverse of :func:`from_sequence`)."""
    a, b, c = t
    return SequenceSet(
        (a + A * b + A2 * c) / 3.0,
        (a + A2 * b + A * c) / 3.0,
        (a + b + c) / 3.0,
    )


def deviation_magnitude(u: complex, w: complex) -> float:
    """|u - w| evaluated by the law of cosines on the two phasors.

    The angle between them enters only through cos(arg u - arg w), so
    for fixed magnitudes the value is smallest when the phasors are
    aligned.
    """
    mu, mw = abs(u), abs(w)
    if mu == 0.0 or mw == 0.0:
        return mu + mw
    theta = cmath.phase(u) - cmath.phase(w)
    # mu^2 + mw^2 - 2 mu mw cos(theta), rewritten to avoid cancellation
    # when the phasors nearly coincide
    half = math.sin(0.5 * theta)
    return math.sqrt((mu - mw) ** 2 + 4.0 * mu * mw * half * half)
