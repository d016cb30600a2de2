import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vsupport.cli import OUT_ENV, SWEEP_COLUMNS, main
from vsupport.csvio import CONVENTION, comment_value, read_csv
from vsupport.sim.runner import CSV_COLUMNS

BASE = (Path(__file__).parents[1] / "src/vsupport/data/tableI_LL.cfg").read_text()


def write_cfg(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_analyze_sized_report(tmp_path, capsys):
    assert main(["analyze", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "analysis.json").read_text())
    assert rep["i_max_A"] == pytest.approx(rep["i_limit_A"], rel=1e-9)
    assert rep["vi_angle_deg"] == pytest.approx(75.0)
    assert abs(rep["theta_pos_deg"]) < 1e-9 and abs(rep["theta_neg_deg"]) < 1e-9
    assert "best angle" in capsys.readouterr().out


def test_analyze_explicit_angle_override(tmp_path):
    assert main(["analyze", "--angle", "30", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "analysis.json").read_text())
    assert rep["vi_angle_deg"] == 30.0
    assert rep["i_max_A"] == pytest.approx(rep["i_limit_A"], rel=1e-9)
    assert rep["theta_pos_deg"] != pytest.approx(0.0, abs=1e-3)


def test_direct_and_fault_configs_give_the_same_report(tmp_path):
    main(["analyze", "--config", "tableI_LL.cfg", "--out", str(tmp_path / "a")])
    main(["analyze", "--config", "tableI_LL_direct.cfg", "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a/analysis.json").read_text())
    b = json.loads((tmp_path / "b/analysis.json").read_text())
    for key in set(a) - {"source", "fault"}:
        va, vb = a[key], b[key]
        if isinstance(va, dict):
            assert va["mag"] == pytest.approx(vb["mag"], rel=1e-12, abs=1e-12)
        elif isinstance(va, float):
            assert va == pytest.approx(vb, rel=1e-12, abs=1e-9)
        else:
            assert va == vb


def test_symmetric_fault_report(tmp_path):
    assert main(["analyze", "--config", "sym_3ph.cfg", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "analysis.json").read_text())
    assert rep["v_c_neg_V"] == 0.0
    assert rep["i_a_A"] == pytest.approx(rep["i_b_A"], rel=1e-12)
    assert rep["i_b_A"] == pytest.approx(rep["i_c_A"], rel=1e-12)


def test_sweep_csv(tmp_path, capsys):
    assert main(["sweep", "--out", str(tmp_path)]) == 0
    comments, cols, data = read_csv(tmp_path / "sweep.csv")
    assert cols == SWEEP_COLUMNS
    assert CONVENTION in comments
    best = float(comment_value(comments, "best_angle_deg"))
    assert best == pytest.approx(75.0)
    vpos = data[:, 2][data[:, 0] <= best]
    assert np.all(np.diff(vpos) >= 0)
    assert np.allclose(data[:, 6], data[0, 6], rtol=1e-9)
    assert (tmp_path / "plot_sweep.py").exists()
    assert "best angle 75" in capsys.readouterr().out


def test_sweep_single_angle(tmp_path):
    assert main(["sweep", "--angles", "40", "--out", str(tmp_path)]) == 0
    _, _, data = read_csv(tmp_path / "sweep.csv")
    assert data.shape == (1, len(SWEEP_COLUMNS))


def test_sweep_dense_grid(tmp_path):
    assert main(["sweep", "--dense", "--out", str(tmp_path)]) == 0
    _, _, data = read_csv(tmp_path / "sweep.csv")
    assert data.shape[0] >= 901
    assert data[np.argmin(data[:, 4]), 0] == pytest.approx(75.0, abs=0.1)


def test_infeasible_sweep_leaves_no_csv(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE.replace("i_m_pu = 1.5", "i_m_pu = 40"))
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 3
    assert not (out / "sweep.csv").exists()
    assert "infeasible" in capsys.readouterr().err


def test_infeasible_analyze_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, BASE.replace("i_m_pu = 1.5", "i_m_pu = 40"))
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_config_error_exit_code_and_path(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE.replace("c_f_F = 30e-6", "c_f_F = -30e-6"))
    assert main(["analyze", "--config", cfg]) == 2
    assert "plant.c_f_F" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_bad_angle_list(tmp_path):
    assert main(["sweep", "--angles", "10,abc", "--out", str(tmp_path)]) == 2


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["sweep"]) == 0
    assert (tmp_path / "env/sweep.csv").exists()
    assert main(["sweep", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag/sweep.csv").exists()


def test_simulate_outputs(tmp_path):
    assert main(["simulate", "--config", "sim_LL_vi75.cfg", "--out", str(tmp_path)]) == 0
    comments, cols, data = read_csv(tmp_path / "timeseries.csv")
    assert cols == CSV_COLUMNS
    assert data.shape[0] == 8000
    assert CONVENTION in comments
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["i_max_A"] == pytest.approx(metrics["i_limit_A"], rel=0.05)
    assert metrics["v_c_pos_V"] == pytest.approx(metrics["phasor_v_c_pos_V"], rel=0.05)
    assert (tmp_path / "plot_timeseries.py").exists()


def test_simulate_zero_duration_guard(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "\n[simulation]\nduration_s = 0\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_simulate_divergence_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE + "\n[controller]\nkp_i_ohm = 80\n[vi]\n".replace("[vi]\n", "")
                    .replace("mode = sized", "mode = adaptive\nangle_deg = 75\nk_z_ohm_per_A = 1.0"))
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 4
    assert "diverged at t =" in capsys.readouterr().err
    assert not (out / "timeseries.csv").exists()


def test_simulate_rejects_direct_phasors(tmp_path):
    assert main(["simulate", "--config", "tableI_LL_direct.cfg", "--out", str(tmp_path)]) == 2


def test_verify_seeded(tmp_path):
    assert main(["verify", "--count", "20", "--seed", "7", "--out", str(tmp_path)]) == 0
    comments, cols, data = read_csv(tmp_path / "verify.csv")
    assert comment_value(comments, "seed") == "7"
    assert np.all(data[:, 4] == 1)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "vsupport", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "vsupport" in out.stdout


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["sweep", "--angles", "10", "--dense"])
    assert err.value.code == 2
