"""Config-level operations shared by the CLI and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ConfigError, ScenarioConfig
from .network import (
    FaultKind,
    capacitor_voltages,
    driving_voltages,
    phase_currents,
    support_deviations,
)
from .phasor import Impedance, angle_deg
from .vi import (
    AdaptiveViParams,
    InfeasibleSizingError,
    adaptive_equilibrium,
    angle_sweep,
    default_angles,
    dense_angles,
    optimal_angle,
    required_total_impedance,
    size_vi,
)


def vi_angle(cfg: ScenarioConfig) -> float:
    """Configured VI angle, or the support-optimal one when left open."""
    if cfg.vi_angle is not None:
        return cfg.vi_angle
    return optimal_angle(cfg.ratings.z_l)


def _v_m_max(scenario) -> float:
    return max(abs(v) for v in driving_voltages(scenario.with_vi(Impedance(0.0, 0.0))))


def sized_vi(cfg: ScenarioConfig, angle: float | None = None) -> Impedance:
    scenario = cfg.scenario()
    angle = vi_angle(cfg) if angle is None else angle
    required = required_total_impedance(_v_m_max(scenario), cfg.ratings.i_m)
    if required == 0:
        raise InfeasibleSizingError("no driving voltage; the fault draws no current", angle)
    return size_vi(angle, scenario.z_l, required).impedance


def initial_gain(cfg: ScenarioConfig, angle: float) -> float:
    """Adaptive gain whose phasor-model equilibrium sits at the current limit."""
    mag = sized_vi(cfg, angle).magnitude
    return mag / (cfg.ratings.i_m - cfg.i_th)


def analyze(cfg: ScenarioConfig) -> dict:
    """Sequence-network evaluation for the configured VI."""
    scenario = cfg.scenario()
    angle = vi_angle(cfg)
    v_m_max = _v_m_max(scenario)
    if cfg.vi_mode == "explicit":
        z_v = Impedance.from_polar(cfg.vi_magnitude, angle)
    elif cfg.vi_mode == "adaptive" and cfg.k_z is not None:
        _, z_v = adaptive_equilibrium(scenario, cfg.adaptive_params())
    else:
        z_v = sized_vi(cfg, angle)
    model = scenario.with_vi(z_v)
    v_pos, v_neg = capacitor_voltages(model)
    dev = support_deviations(model)
    currents = phase_currents(model)
    v_m = driving_voltages(model)
    z_l = scenario.z_l
    return {
        "source": cfg.source,
        "fault": cfg.fault.kind.value if cfg.fault is not None else "direct",
        "v_cref_pos": scenario.v_cref_pos,
        "v_f_pos": scenario.v_f_pos,
        "v_f_neg": scenario.v_f_neg,
        "z_l_ohm": z_l.z,
        "z_l_angle_deg": z_l.angle,
        "vi_mode": cfg.vi_mode,
        "vi_angle_deg": angle,
        "vi_magnitude_ohm": z_v.magnitude,
        "z_v_ohm": z_v.z,
        "i_limit_A": cfg.ratings.i_m,
        "required_total_ohm": v_m_max / cfg.ratings.i_m,
        "v_m_A": v_m.a, "v_m_B": v_m.b, "v_m_C": v_m.c,
        "i_a_A": abs(currents.a), "i_b_A": abs(currents.b), "i_c_A": abs(currents.c),
        "i_max_A": max(currents.magnitudes()),
        "v_c_pos": v_pos,
        "v_c_neg": v_neg,
        "v_c_pos_V": abs(v_pos),
        "v_c_neg_V": abs(v_neg),
        "dev_pos_V": dev.dev_pos,
        "dev_neg_V": dev.dev_neg,
        "theta_pos_deg": dev.theta_pos,
        "theta_neg_deg": dev.theta_neg,
        "optimal_angle_deg": optimal_angle(z_l) if z_l.magnitude > 0 else math.nan,
        "v_f_pos_angle_deg": angle_deg(scenario.v_f_pos) if scenario.v_f_pos else 0.0,
    }


def sweep_angles(cfg: ScenarioConfig, angles=None, dense: bool = False) -> list[float]:
    if angles is not None:
        return sorted(set(float(a) for a in angles))
    if dense:
        return dense_angles(cfg.ratings.z_l)
    if cfg.sweep_angles is not None:
        return sorted(set(cfg.sweep_angles))
    return default_angles(cfg.ratings.z_l, cfg.sweep_step)


def sweep(cfg: ScenarioConfig, angles=None, dense: bool = False):
    return angle_sweep(cfg.scenario(), cfg.ratings.i_m, sweep_angles(cfg, angles, dense))


@dataclass
class SimulationResult:
    series: object
    metrics: object
    plant: object
    controller: object
    tuning: list
    angle: float

    @property
    def z_l(self) -> Impedance:
        return Impedance(self.plant.r_1, self.plant.omega_g * self.plant.l_1)


def simulation_inputs(cfg: ScenarioConfig, substeps: int | None = None):
    """(plant, controller params, timing, angle, tune?) for a configured run."""
    from .sim.control import ControllerParams
    from .sim.plant import PlantParams
    from .sim.runner import Timing

    if cfg.fault is None:
        raise ConfigError("fault", "time-domain runs need a [fault] section, not direct phasors")
    kind = cfg.fault.kind
    if kind not in (FaultKind.LL, FaultKind.THREE_PHASE):
        raise ConfigError("fault.kind", f"time-domain runs support LL and 3PH faults, not {kind.value}")
    z_f = cfg.fault.z_f
    if z_f.is_open or z_f.reactance != 0 or not z_f.resistance > 0:
        raise ConfigError("fault.r_f_ohm", "time-domain runs need a finite positive resistive fault")
    s = cfg.simulation
    plant = PlantParams.from_ratings(cfg.ratings, kind, s.t_fault, s.t_clear)
    timing = Timing(s.duration, s.settle_cycles, s.measure_cycles, substeps or s.substeps)
    angle = vi_angle(cfg)
    ctrl_kw = dict(cfg.controller)
    ctrl_kw["vi_tau"] = cfg.vi_tau
    tune = False
    if cfg.vi_mode == "explicit":
        z_v = Impedance.from_polar(cfg.vi_magnitude, angle)
        cp = ControllerParams.defaults(cfg.ratings, None, vi_fixed=(z_v.resistance, z_v.reactance), **ctrl_kw)
    else:
        k_z = cfg.k_z
        if k_z is None:
            k_z = initial_gain(cfg, angle)
            tune = True
        vi = AdaptiveViParams.from_angle(angle, k_z, cfg.i_th)
        cp = ControllerParams.defaults(cfg.ratings, vi, **ctrl_kw)
    return plant, cp, timing, angle, tune


def simulate(cfg: ScenarioConfig, substeps: int | None = None) -> SimulationResult:
    """Closed-loop run; an 'auto' gain is tuned so the settled peak current meets the limit."""
    from .sim.runner import run_scenario, tune_vi_gain

    plant, cp, timing, angle, tune = simulation_inputs(cfg, substeps)
    if tune:
        cp, series, metrics, history = tune_vi_gain(plant, cp, timing, cfg.ratings.i_m,
                                                    tol=cfg.simulation.tune_tolerance)
    else:
        series, metrics = run_scenario(plant, cp, timing)
        history = []
    return SimulationResult(series, metrics, plant, cp, history, angle)
