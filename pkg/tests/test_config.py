import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from vsupport.config import ConfigError, bundled_configs, load, load_text, parse_angles
from vsupport.network import FaultKind
from vsupport.ratings import r_par_for_angle
from vsupport.study import simulation_inputs

BASE = (Path(__file__).parents[1] / "src/vsupport/data/tableI_LL.cfg").read_text()


def edit(text=BASE, **subs):
    for old, new in subs.items():
        assert old in text
        text = text.replace(old, new)
    return text


def test_bundled_configs_load():
    names = bundled_configs()
    assert {"tableI_LL.cfg", "tableI_LL_direct.cfg", "sim_LL_vi0.cfg", "sim_LL_vi75.cfg",
            "sym_3ph.cfg"} <= set(names)
    for name in names:
        load(name)


def test_table_values_and_derived_quantities():
    cfg = load("tableI_LL.cfg")
    r = cfg.ratings
    assert r.s_n_VA == 500 and r.v_g_ll_rms_V == 104 and r.v_n_V == 84.85
    assert r.l_t_H == pytest.approx(0.028 * 104**2 / 500 / 314)
    assert r.r_par_ohm == pytest.approx(r_par_for_angle(75.0))
    assert r.z_l.angle == pytest.approx(75.0, abs=1e-12)
    assert cfg.fault.kind is FaultKind.LL and cfg.fault.z_f.resistance == 6.8


def test_direct_phasors_reproduce_fault_calculation():
    a = load("tableI_LL.cfg").scenario()
    b = load("tableI_LL_direct.cfg").scenario()
    assert abs(a.v_f_pos - b.v_f_pos) < 1e-12 * abs(a.v_f_pos)
    assert abs(a.v_f_neg - b.v_f_neg) < 1e-12 * abs(a.v_f_pos)
    assert a.z_l == b.z_l and a.v_cref_pos == b.v_cref_pos


def test_both_fault_sections_rejected():
    text = BASE + "\n[fault.direct]\nv_f_pos_V = 1\nv_f_pos_deg = 0\nv_f_neg_V = 0\nv_f_neg_deg = 0\n"
    with pytest.raises(ConfigError) as err:
        load_text(text)
    assert err.value.path == "fault"


def test_missing_fault_section_rejected():
    text = BASE.split("[fault]")[0] + "[vi]\nmode = sized\n"
    with pytest.raises(ConfigError) as err:
        load_text(text)
    assert err.value.path == "fault"


@pytest.mark.parametrize("text, path", [
    (edit(**{"l_f_H = 3e-3": "l_f_H = 3 mH"}), "plant.l_f_H"),
    (edit(**{"l_f_H = 3e-3": "l_f_H = -1"}), "plant.l_f_H"),
    (edit(**{"l_f_H = 3e-3": "l_f_mH = 3"}), "plant.l_f_mH"),
    (edit(**{"kind = LL": "kind = XY"}), "fault.kind"),
    (edit(**{"kind = LL": "kind = SLG"}), "fault.r_0_ohm"),
    (edit(**{"r_f_ohm = 6.8": "r_f_ohm = nan"}), "fault.r_f_ohm"),
    (edit(**{"mode = sized": "mode = magic"}), "vi.mode"),
    (edit(**{"mode = sized": "mode = explicit\nangle_deg = 30"}), "vi.magnitude_ohm"),
    (edit(**{"mode = sized": "mode = sized\nangle_deg = 120"}), "vi.angle_deg"),
    (edit(**{"mode = sized": "mode = sized\ni_th_pu = 2"}), "vi.i_th_pu"),
    (edit(**{"step_deg = 5": "step_deg = 0"}), "sweep.step_deg"),
    (edit(**{"step_deg = 5": "angles_deg = 10, 95"}), "sweep.angles_deg"),
    (edit(**{"seed = 0": "seed = 1.5"}), "output.seed"),
    (edit(**{"z_l_angle_deg = 75": "z_l_angle_deg = 75\nr_par_ohm = 0.1"}), "plant.z_l_angle_deg"),
    (BASE + "\n[extras]\nfoo = 1\n", "extras"),
    (BASE + "\n[simulation]\nduration_s = 0\n", "simulation.duration_s"),
    (BASE + "\n[simulation]\nt_fault_s = 0.5\nt_clear_s = 0.4\n", "simulation.t_clear_s"),
    (BASE + "\n[simulation]\nsubsteps = 2.5\n", "simulation.substeps"),
    (BASE + "\n[controller]\nkoq_channel = phase\n", "controller.koq_channel"),
    (BASE + "\n[controller]\nkp_v_S = -1\n", "controller.kp_v_S"),
])
def test_validation_names_the_field(text, path):
    with pytest.raises(ConfigError) as err:
        load_text(text)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_malformed_file():
    with pytest.raises(ConfigError):
        load_text("no section header\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "absent.cfg")


def test_loads_from_path(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text(BASE)
    assert load(p).source == str(p)


def test_ground_fault_with_zero_sequence():
    cfg = load_text(edit(**{"kind = LL": "kind = SLG\nr_0_ohm = 0\nx_0_ohm = 4.7"}))
    v1, v2 = cfg.scenario().v_f_pos, cfg.scenario().v_f_neg
    assert abs(v1) > abs(v2) > 0


def test_open_fault_branch():
    cfg = load_text(edit(**{"r_f_ohm = 6.8": "r_f_ohm = inf"}))
    assert cfg.fault.z_f.is_open
    assert cfg.scenario().v_f_neg == 0


def test_auto_gain_and_explicit_values():
    assert load("sim_LL_vi0.cfg").k_z is None
    cfg = load_text(edit(**{"mode = sized": "mode = adaptive\nangle_deg = 30\nk_z_ohm_per_A = 2.5"}))
    assert cfg.k_z == 2.5
    assert cfg.adaptive_params().k_z == pytest.approx(2.5)


def test_time_domain_needs_fault_section():
    with pytest.raises(ConfigError) as err:
        simulation_inputs(load("tableI_LL_direct.cfg"))
    assert err.value.path == "fault"


def test_time_domain_rejects_ground_faults():
    cfg = load_text(edit(**{"kind = LL": "kind = LLG\nr_0_ohm = 0\nx_0_ohm = 4.7"}))
    with pytest.raises(ConfigError) as err:
        simulation_inputs(cfg)
    assert err.value.path == "fault.kind"


def test_parse_angles():
    assert parse_angles("0, 15;30 45") == (0.0, 15.0, 30.0, 45.0)
    with pytest.raises(ConfigError):
        parse_angles("")


@given(st.floats(1e-4, 1e-2), st.floats(1e-6, 1e-4), st.floats(0.5, 20.0))
def test_numeric_fields_round_trip(l_f, c_f, r_f):
    text = edit(**{"l_f_H = 3e-3": f"l_f_H = {l_f!r}", "c_f_F = 30e-6": f"c_f_F = {c_f!r}",
                   "r_f_ohm = 6.8": f"r_f_ohm = {r_f!r}"})
    cfg = load_text(text)
    assert cfg.ratings.l_f_H == l_f and cfg.ratings.c_f_F == c_f
    assert cfg.fault.z_f.resistance == r_f and cfg.ratings.z_f_ohm == r_f
    assert not math.isnan(cfg.scenario().v_f_pos.real)
