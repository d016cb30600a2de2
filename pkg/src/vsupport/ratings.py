"""Bench ratings and derived base quantities.

Values default to the 500 VA, 104 V laboratory system. Everything
derived (base impedance, transformer inductance, peak current base) is
computed here rather than stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .network import FaultKind, FaultScenario, FaultSpec, GridThevenin, fault_bus_voltages
from .phasor import Impedance, phasor


@dataclass(frozen=True)
class Ratings:
    s_n_VA: float = 500.0
    v_g_ll_rms_V: float = 104.0
    omega_n: float = 314.0
    v_n_V: float = 84.85            # nominal peak phase voltage
    i_m_pu: float = 1.5
    l_f_H: float = 3e-3
    c_f_F: float = 30e-6
    x_t_pu: float = 0.028
    l_g1_H: float = 3e-3
    r_g1_ohm: float = 0.0
    l_g2_H: float = 5e-3
    r_g2_ohm: float = 1.0
    r_par_ohm: float = 0.0          # parasitic resistance of the capacitor-to-fault path
    z_f_ohm: float = 6.8
    p_set_pu: float = 1.0
    q_set_pu: float = 0.0
    t_s: float = 100e-6

    @property
    def z_base(self) -> float:
        return self.v_g_ll_rms_V ** 2 / self.s_n_VA

    @property
    def l_t_H(self) -> float:
        return self.x_t_pu * self.z_base / self.omega_n

    @property
    def i_base_peak(self) -> float:
        """Rated peak phase current."""
        return self.s_n_VA / (math.sqrt(3.0) * self.v_g_ll_rms_V) * math.sqrt(2.0)

    @property
    def i_m(self) -> float:
        return self.i_m_pu * self.i_base_peak

    @property
    def v_g_peak(self) -> float:
        """Grid source as a peak phase voltage."""
        return self.v_g_ll_rms_V * math.sqrt(2.0 / 3.0)

    @property
    def z_l(self) -> Impedance:
        """Composed impedance, capacitor to fault location (transformer + grid segment 1)."""
        return Impedance(
            self.r_par_ohm + self.r_g1_ohm,
            self.omega_n * (self.l_t_H + self.l_g1_H),
        )

    @property
    def z_g2(self) -> Impedance:
        return Impedance(self.r_g2_ohm, self.omega_n * self.l_g2_H)

    @property
    def p_set(self) -> float:
        return self.p_set_pu * self.s_n_VA

    @property
    def q_set(self) -> float:
        return self.q_set_pu * self.s_n_VA


def r_par_for_angle(angle: float, ratings: Ratings = Ratings()) -> float:
    """Parasitic resistance that puts the composed impedance at ``angle`` degrees."""
    x = ratings.omega_n * (ratings.l_t_H + ratings.l_g1_H)
    return x / math.tan(math.radians(angle)) - ratings.r_g1_ohm


def ll_scenario(ratings: Ratings = Ratings(), relative_angle: float = 0.0,
                kind: FaultKind = FaultKind.LL) -> FaultScenario:
    """Phasor scenario for the bench fault, fault-bus voltages from the grid Thevenin.

    The positive-sequence fault-bus voltage is placed ``relative_angle``
    degrees from the capacitor reference; the negative-sequence phasor is
    rotated with it (a common time shift).
    """
    grid = GridThevenin(e=phasor(ratings.v_g_peak, 0.0), z1=ratings.z_g2)
    v_f_pos, v_f_neg = fault_bus_voltages(grid, FaultSpec(kind, Impedance(ratings.z_f_ohm, 0.0)))
    return align_fault_bus(phasor(ratings.v_n_V, 0.0), v_f_pos, v_f_neg, ratings.z_l, relative_angle)


def align_fault_bus(v_cref_pos: complex, v_f_pos: complex, v_f_neg: complex, z_l: Impedance,
                    relative_angle: float = 0.0) -> FaultScenario:
    if v_f_pos == 0:
        rot = 1.0
    else:
        rot = phasor(1.0, relative_angle) * (v_cref_pos / abs(v_cref_pos) if v_cref_pos else 1.0) \
            * abs(v_f_pos) / v_f_pos
    return FaultScenario(v_cref_pos, v_f_pos * rot, v_f_neg * rot, z_l)
