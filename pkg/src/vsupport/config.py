"""Scenario files: INI sections with unit-suffixed keys.

See ``data/SCHEMA.md`` for the full key list. Every error names the
offending ``section.key`` so a bad file can be fixed without reading code.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .network import FaultKind, FaultScenario, FaultSpec, GridThevenin, fault_bus_voltages
from .phasor import Impedance, phasor
from .ratings import Ratings, align_fault_bus, r_par_for_angle
from .vi import AdaptiveViParams

VI_MODES = ("sized", "explicit", "adaptive")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# section -> key -> Ratings field
_RATING_KEYS = {
    "system": {
        "s_n_VA": "s_n_VA",
        "v_g_ll_rms_V": "v_g_ll_rms_V",
        "omega_n_rad_s": "omega_n",
        "v_n_V": "v_n_V",
        "i_m_pu": "i_m_pu",
        "p_set_pu": "p_set_pu",
        "q_set_pu": "q_set_pu",
        "t_s_s": "t_s",
    },
    "plant": {
        "l_f_H": "l_f_H",
        "c_f_F": "c_f_F",
        "x_t_pu": "x_t_pu",
        "l_g1_H": "l_g1_H",
        "r_g1_ohm": "r_g1_ohm",
        "l_g2_H": "l_g2_H",
        "r_g2_ohm": "r_g2_ohm",
        "r_par_ohm": "r_par_ohm",
    },
}

_ALLOWED = {
    "system": set(_RATING_KEYS["system"]),
    "plant": set(_RATING_KEYS["plant"]) | {"z_l_angle_deg"},
    "fault": {"kind", "r_f_ohm", "x_f_ohm", "relative_angle_deg", "r_0_ohm", "x_0_ohm"},
    "fault.direct": {"v_f_pos_V", "v_f_pos_deg", "v_f_neg_V", "v_f_neg_deg"},
    "vi": {"mode", "angle_deg", "magnitude_ohm", "k_z_ohm_per_A", "i_th_pu", "tau_s"},
    "controller": {"m_p_rad_s_per_W", "n_q_V_per_var", "k_oq", "koq_channel", "omega_pf_rad_s",
                   "kp_v_S", "kr_v_S_per_s", "kp_i_ohm", "kr_i_ohm_per_s", "sogi_k", "quadrature"},
    "sweep": {"step_deg", "angles_deg"},
    "simulation": {"t_fault_s", "t_clear_s", "duration_s", "settle_cycles", "measure_cycles",
                   "substeps", "tune_tolerance"},
    "output": {"dir", "seed"},
}

# config key -> ControllerParams / DroopParams keyword
_CONTROLLER_KEYS = {
    "m_p_rad_s_per_W": "m_p",
    "n_q_V_per_var": "n_q",
    "k_oq": "k_oq",
    "koq_channel": "koq_channel",
    "omega_pf_rad_s": "omega_pf",
    "kp_v_S": "kp_v",
    "kr_v_S_per_s": "kr_v",
    "kp_i_ohm": "kp_i",
    "kr_i_ohm_per_s": "kr_i",
    "sogi_k": "sogi_k",
    "quadrature": "quadrature",
}
_STRING_KEYS = {"kind", "mode", "koq_channel", "quadrature", "dir", "angles_deg", "k_z_ohm_per_A"}


@dataclass(frozen=True)
class SimulationSettings:
    t_fault: float = 0.4
    t_clear: float = 0.75
    duration: float = 0.8
    settle_cycles: float = 10.0
    measure_cycles: int = 5
    substeps: int = 10
    tune_tolerance: float = 0.01


@dataclass(frozen=True)
class ScenarioConfig:
    ratings: Ratings
    fault: FaultSpec | None = None
    z0: Impedance | None = None
    relative_angle: float = 0.0
    direct: tuple[complex, complex] | None = None
    vi_mode: str = "sized"
    vi_angle: float | None = None
    vi_magnitude: float | None = None
    k_z: float | None = None             # None: tuned to the current limit
    i_th_pu: float = 1.1
    vi_tau: float = 5e-3
    controller: dict = field(default_factory=dict)
    sweep_step: float = 5.0
    sweep_angles: tuple[float, ...] | None = None
    simulation: SimulationSettings = SimulationSettings()
    output_dir: str = "out"
    seed: int = 0
    source: str = "<memory>"

    @property
    def i_th(self) -> float:
        return self.i_th_pu * self.ratings.i_base_peak

    def scenario(self) -> FaultScenario:
        """Phasor fault scenario (no VI yet)."""
        r = self.ratings
        v_cref = phasor(r.v_n_V, 0.0)
        if self.direct is not None:
            return FaultScenario(v_cref, self.direct[0], self.direct[1], r.z_l)
        grid = GridThevenin(e=phasor(r.v_g_peak, 0.0), z1=r.z_g2, z0=self.z0)
        v_f_pos, v_f_neg = fault_bus_voltages(grid, self.fault)
        return align_fault_bus(v_cref, v_f_pos, v_f_neg, r.z_l, self.relative_angle)

    def adaptive_params(self, k_z: float | None = None) -> AdaptiveViParams:
        k = self.k_z if k_z is None else k_z
        if k is None:
            raise ConfigError("vi.k_z_ohm_per_A", "gain is 'auto' and has not been tuned")
        return AdaptiveViParams.from_angle(self._angle(), k, self.i_th)

    def _angle(self) -> float:
        if self.vi_angle is None:
            raise ConfigError("vi.angle_deg", "required for this command")
        return self.vi_angle


def _number(path: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(path, f"expected a number, got {text!r}") from None
    if math.isnan(value):
        raise ConfigError(path, "NaN is not allowed")
    return value


def _positive(path: str, value: float) -> float:
    if not value > 0 or math.isinf(value):
        raise ConfigError(path, f"must be positive and finite, got {value}")
    return value


def _nonnegative(path: str, value: float) -> float:
    if not value >= 0 or math.isinf(value):
        raise ConfigError(path, f"must be >= 0 and finite, got {value}")
    return value


def parse_angles(text: str, path: str = "angles") -> tuple[float, ...]:
    parts = [s for s in text.replace(";", ",").replace(" ", ",").split(",") if s]
    if not parts:
        raise ConfigError(path, "empty angle list")
    out = []
    for s in parts:
        a = _number(path, s)
        if not 0.0 <= a <= 90.0:
            raise ConfigError(path, f"angle {a} outside [0, 90] degrees")
        out.append(a)
    return tuple(out)


def _read(source) -> tuple[configparser.ConfigParser, str]:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keep unit suffixes case-sensitive
    if isinstance(source, configparser.ConfigParser):
        return source, "<parser>"
    path = Path(source)
    if not path.is_file():
        bundled = resources.files("vsupport") / "data" / path.name
        if path.parent == Path(".") and bundled.is_file():
            cp.read_string(bundled.read_text(), source=str(path.name))
            return cp, f"bundled:{path.name}"
        raise ConfigError(str(source), "no such file (and no bundled config by that name)")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(source), f"malformed file: {exc}") from None
    return cp, str(path)


def load_text(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<text>", f"malformed file: {exc}") from None
    return parse(cp, "<text>")


def load(source) -> ScenarioConfig:
    """Read a scenario from a path, a bundled file name, or a parser."""
    cp, name = _read(source)
    return parse(cp, name)


def bundled_configs() -> list[str]:
    root = resources.files("vsupport") / "data"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def parse(cp: configparser.ConfigParser, name: str = "<parser>") -> ScenarioConfig:
    for section in cp.sections():
        if section not in _ALLOWED:
            raise ConfigError(section, "unknown section")
        for key in cp[section]:
            if key not in _ALLOWED[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")

    def get(section, key, default=None):
        if cp.has_option(section, key):
            raw = cp.get(section, key).strip()
            return raw if key in _STRING_KEYS else _number(f"{section}.{key}", raw)
        return default

    # ratings
    kw = {}
    for section, keys in _RATING_KEYS.items():
        for key, attr in keys.items():
            v = get(section, key)
            if v is not None:
                if attr in ("r_g1_ohm", "r_g2_ohm", "r_par_ohm", "q_set_pu", "p_set_pu"):
                    kw[attr] = v if attr.endswith("_pu") else _nonnegative(f"{section}.{key}", v)
                else:
                    kw[attr] = _positive(f"{section}.{key}", v)
    z_angle = get("plant", "z_l_angle_deg")
    if z_angle is not None:
        if "r_par_ohm" in kw:
            raise ConfigError("plant.z_l_angle_deg", "give either r_par_ohm or z_l_angle_deg, not both")
        if not 0.0 < z_angle <= 90.0:
            raise ConfigError("plant.z_l_angle_deg", "must be in (0, 90] degrees")
        r_par = 0.0 if z_angle == 90.0 else r_par_for_angle(z_angle, Ratings(**kw))
        if r_par < 0:
            raise ConfigError("plant.z_l_angle_deg", "needs a negative parasitic resistance")
        kw["r_par_ohm"] = r_par
    has_fault = cp.has_section("fault")
    has_direct = cp.has_section("fault.direct")
    if has_fault == has_direct:
        raise ConfigError("fault", "exactly one of [fault] and [fault.direct] must be given")

    fault = z0 = direct = None
    relative_angle = 0.0
    if has_fault:
        kind_text = get("fault", "kind")
        if kind_text is None:
            raise ConfigError("fault.kind", "missing")
        try:
            kind = FaultKind.parse(kind_text)
        except ValueError as exc:
            raise ConfigError("fault.kind", str(exc)) from None
        r_f = get("fault", "r_f_ohm")
        if r_f is None:
            raise ConfigError("fault.r_f_ohm", "missing")
        r_f = _nonnegative("fault.r_f_ohm", r_f) if r_f != math.inf else r_f
        x_f = _nonnegative("fault.x_f_ohm", get("fault", "x_f_ohm", 0.0))
        z_f = Impedance.open() if r_f == math.inf else Impedance(r_f, x_f)
        if r_f != math.inf:
            kw["z_f_ohm"] = r_f
        fault = FaultSpec(kind, z_f)
        relative_angle = get("fault", "relative_angle_deg", 0.0)
        r0, x0 = get("fault", "r_0_ohm"), get("fault", "x_0_ohm")
        if (r0 is None) != (x0 is None):
            raise ConfigError("fault.r_0_ohm", "give both r_0_ohm and x_0_ohm")
        if r0 is not None:
            z0 = Impedance(_nonnegative("fault.r_0_ohm", r0), _nonnegative("fault.x_0_ohm", x0))
        if kind in (FaultKind.SLG, FaultKind.LLG) and z0 is None:
            raise ConfigError("fault.r_0_ohm", f"{kind.value} faults need the zero-sequence grid impedance")
    else:
        vals = {}
        for key in _ALLOWED["fault.direct"]:
            v = get("fault.direct", key)
            if v is None:
                raise ConfigError(f"fault.direct.{key}", "missing")
            vals[key] = v
        for key in ("v_f_pos_V", "v_f_neg_V"):
            _nonnegative(f"fault.direct.{key}", vals[key])
        direct = (phasor(vals["v_f_pos_V"], vals["v_f_pos_deg"]),
                  phasor(vals["v_f_neg_V"], vals["v_f_neg_deg"]))

    try:
        ratings = Ratings(**kw)
    except TypeError as exc:  # pragma: no cover - keys are whitelisted above
        raise ConfigError("system", str(exc)) from None

    # virtual impedance
    mode = (get("vi", "mode") or "sized").lower()
    if mode not in VI_MODES:
        raise ConfigError("vi.mode", f"must be one of {', '.join(VI_MODES)}")
    vi_angle = get("vi", "angle_deg")
    if vi_angle is not None and not 0.0 <= vi_angle <= 90.0:
        raise ConfigError("vi.angle_deg", "must be in [0, 90] degrees")
    vi_mag = get("vi", "magnitude_ohm")
    if mode == "explicit":
        if vi_angle is None or vi_mag is None:
            raise ConfigError("vi.magnitude_ohm", "explicit mode needs angle_deg and magnitude_ohm")
        _nonnegative("vi.magnitude_ohm", vi_mag)
    elif vi_mag is not None:
        raise ConfigError("vi.magnitude_ohm", f"only used in explicit mode, not {mode}")
    k_text = get("vi", "k_z_ohm_per_A")
    k_z = None
    if k_text is not None and k_text.lower() != "auto":
        k_z = _nonnegative("vi.k_z_ohm_per_A", _number("vi.k_z_ohm_per_A", k_text))
    if mode == "adaptive" and vi_angle is None:
        raise ConfigError("vi.angle_deg", "adaptive mode needs an angle")
    i_th_pu = _nonnegative("vi.i_th_pu", get("vi", "i_th_pu", 1.1))
    if i_th_pu >= ratings.i_m_pu:
        raise ConfigError("vi.i_th_pu", "activation threshold must be below the current limit")
    vi_tau = _nonnegative("vi.tau_s", get("vi", "tau_s", 5e-3))

    # controller overrides
    ctrl = {}
    for key, attr in _CONTROLLER_KEYS.items():
        v = get("controller", key)
        if v is None:
            continue
        if key not in ("koq_channel", "quadrature"):
            v = _nonnegative(f"controller.{key}", v)
        ctrl[attr] = v
    if ctrl.get("koq_channel", "frequency") not in ("frequency", "magnitude"):
        raise ConfigError("controller.koq_channel", "must be frequency or magnitude")
    if ctrl.get("quadrature", "derivative") not in ("derivative", "integral"):
        raise ConfigError("controller.quadrature", "must be derivative or integral")

    step = _positive("sweep.step_deg", get("sweep", "step_deg", 5.0))
    if step > 90.0:
        raise ConfigError("sweep.step_deg", "must not exceed 90 degrees")
    angles_text = get("sweep", "angles_deg")
    angles = parse_angles(angles_text, "sweep.angles_deg") if angles_text else None

    defaults = SimulationSettings()
    sim_kw = {}
    for f in fields(SimulationSettings):
        key = {"t_fault": "t_fault_s", "t_clear": "t_clear_s", "duration": "duration_s"}.get(f.name, f.name)
        v = get("simulation", key)
        if v is None:
            continue
        path = f"simulation.{key}"
        if f.name in ("measure_cycles", "substeps"):
            if v != int(v) or v < 1:
                raise ConfigError(path, "must be a positive integer")
            v = int(v)
        elif f.name == "settle_cycles":
            _nonnegative(path, v)
        else:
            _positive(path, v)
        sim_kw[f.name] = v
    sim = SimulationSettings(**{**{f.name: getattr(defaults, f.name) for f in fields(defaults)}, **sim_kw})
    if not sim.t_fault < sim.t_clear:
        raise ConfigError("simulation.t_clear_s", "must be after t_fault_s")

    out_dir = get("output", "dir", "out")
    seed = get("output", "seed", 0.0)
    if seed != int(seed) or seed < 0:
        raise ConfigError("output.seed", "must be a nonnegative integer")

    return ScenarioConfig(
        ratings=ratings, fault=fault, z0=z0, relative_angle=relative_angle, direct=direct,
        vi_mode=mode, vi_angle=vi_angle, vi_magnitude=vi_mag, k_z=k_z, i_th_pu=i_th_pu,
        vi_tau=vi_tau, controller=ctrl, sweep_step=step, sweep_angles=angles,
        simulation=sim, output_dir=out_dir, seed=int(seed), source=name,
    )
