"""Command-line entry point: ``vsupport analyze | sweep | simulate | verify``.

Exit codes: 0 success, 1 failed verification, 2 bad configuration or
input, 3 infeasible VI sizing, 4 simulation divergence.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, bundled_configs, load, parse_angles
from .csvio import write_csv, write_text_atomic
from .phasor import DegenerateImpedanceError
from .sim.plant import DivergenceError
from .vi import InfeasibleSizingError, best_point

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_DIVERGED = 0, 1, 2, 3, 4
OUT_ENV = "VSUPPORT_OUT"
DEFAULT_CONFIG = "tableI_LL.cfg"

SWEEP_COLUMNS = ("angle_deg", "vi_mag_ohm", "v_c_pos_V", "v_c_neg_V", "dev_pos_V", "dev_neg_V", "i_max_A")

_SWEEP_PLOT = '''\
"""Plot a sweep CSV written by vsupport (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
angle = [float(r["angle_deg"]) for r in rows]
fig, (top, bottom) = plt.subplots(2, 1, sharex=True)
top.plot(angle, [float(r["v_c_pos_V"]) for r in rows], label="|v_c+|")
top.plot(angle, [float(r["v_c_neg_V"]) for r in rows], label="|v_c-|")
top.set_ylabel("V (peak)")
top.legend()
bottom.plot(angle, [float(r["dev_pos_V"]) for r in rows], label="dev+")
bottom.plot(angle, [float(r["dev_neg_V"]) for r in rows], label="dev-")
bottom.set_xlabel("VI angle (deg)")
bottom.set_ylabel("V (peak)")
bottom.legend()
plt.show()
'''

_SERIES_PLOT = '''\
"""Plot a time-series CSV written by vsupport (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
t = [float(r["time_s"]) for r in rows]
fig, axes = plt.subplots(3, 1, sharex=True)
for ph in "abc":
    axes[0].plot(t, [float(r["v_c" + ph]) for r in rows], label="v_c" + ph)
    axes[1].plot(t, [float(r["i_o" + ph]) for r in rows], label="i_o" + ph)
axes[2].plot(t, [float(r["v_c_pos_mag"]) for r in rows], label="|v_c+|")
axes[2].plot(t, [float(r["v_c_neg_mag"]) for r in rows], label="|v_c-|")
for ax in axes:
    ax.legend(loc="upper right")
axes[2].set_xlabel("time (s)")
plt.show()
'''


def _jsonable(v):
    if isinstance(v, complex):
        return {"mag": abs(v), "deg": math.degrees(math.atan2(v.imag, v.real)) if v else 0.0}
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _dump_json(path: Path, data: dict) -> Path:
    return write_text_atomic(path, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.output_dir)


def _load(args):
    cfg = load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "angle", None) is not None:
        if not 0.0 <= args.angle <= 90.0:
            raise ConfigError("--angle", "must be in [0, 90] degrees")
        cfg = replace(cfg, vi_angle=args.angle)
    return cfg


def cmd_analyze(args) -> int:
    from .study import analyze

    cfg = _load(args)
    rep = analyze(cfg)
    out = _out_dir(args, cfg)
    print(f"scenario          {rep['source']} ({rep['fault']})")
    print(f"v_f+  / v_f-      {abs(rep['v_f_pos']):.4f} V / {abs(rep['v_f_neg']):.4f} V")
    print(f"z_l               {rep['z_l_ohm'].real:.4f} + j{rep['z_l_ohm'].imag:.4f} ohm "
          f"({rep['z_l_angle_deg']:.2f} deg)")
    print(f"VI ({rep['vi_mode']})       {rep['vi_magnitude_ohm']:.4f} ohm at {rep['vi_angle_deg']:.2f} deg")
    print(f"|v_c+| / |v_c-|   {rep['v_c_pos_V']:.4f} V / {rep['v_c_neg_V']:.4f} V")
    print(f"dev+  / dev-      {rep['dev_pos_V']:.4f} V / {rep['dev_neg_V']:.4f} V")
    print(f"phase currents    {rep['i_a_A']:.4f} {rep['i_b_A']:.4f} {rep['i_c_A']:.4f} A "
          f"(limit {rep['i_limit_A']:.4f} A)")
    print(f"best angle        {rep['optimal_angle_deg']:.4f} deg")
    path = _dump_json(out / "analysis.json", rep)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .study import sweep, sweep_angles

    cfg = _load(args)
    angles = parse_angles(args.angles, "--angles") if args.angles else None
    points = sweep(cfg, angles, args.dense)
    best = best_point(points)
    out = _out_dir(args, cfg)
    rows = [(p.angle, p.vi_magnitude, p.v_c_pos_mag, p.v_c_neg_mag, p.dev_pos, p.dev_neg, p.i_max)
            for p in points]
    comments = (
        f"source = {cfg.source}",
        f"i_limit_A = {cfg.ratings.i_m:.12g}",
        f"best_angle_deg = {best.angle:.12g}",
        f"angles = {len(sweep_angles(cfg, angles, args.dense))}",
    )
    path = write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows, comments)
    write_text_atomic(out / "plot_sweep.py", _SWEEP_PLOT.format(csv=path.name))
    print(f"best angle {best.angle:.4f} deg: |v_c+| = {best.v_c_pos_mag:.4f} V, "
          f"|v_c-| = {best.v_c_neg_mag:.4f} V, dev+ = {best.dev_pos:.4f} V")
    print(f"wrote {path} ({len(rows)} angles)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .sim.runner import CSV_COLUMNS, phasor_prediction
    from .study import simulate

    cfg = _load(args)
    res = simulate(cfg, args.substeps)
    out = _out_dir(args, cfg)
    m = res.metrics
    comments = [f"source = {cfg.source}", f"vi_angle_deg = {res.angle:.12g}"]
    if res.controller.vi is not None:
        comments.append(f"k_z_ohm_per_A = {res.controller.vi.k_z:.12g}")
    path = write_csv(out / "timeseries.csv", CSV_COLUMNS, res.series.rows(), comments)
    write_text_atomic(out / "plot_timeseries.py", _SERIES_PLOT.format(csv=path.name))
    report = {"source": cfg.source, "vi_angle_deg": res.angle,
              "k_z_ohm_per_A": res.controller.vi.k_z if res.controller.vi else None,
              "tuning": [{"k_z": h.k_z, "i_max": h.i_max} for h in res.tuning]}
    if m is not None:
        pred_pos, pred_neg = phasor_prediction(m, res.z_l)
        report.update({
            "window_s": [m.window_start, m.window_end],
            "v_c_pos_V": m.v_c_pos_mag, "v_c_neg_V": m.v_c_neg_mag,
            "i_max_A": m.i_max, "i_limit_A": cfg.ratings.i_m,
            "r_v_ohm": m.r_v, "x_v_ohm": m.x_v,
            "phasor_v_c_pos_V": abs(pred_pos), "phasor_v_c_neg_V": abs(pred_neg),
        })
        print(f"fault window {m.window_start:.4f}-{m.window_end:.4f} s: |v_c+| = {m.v_c_pos_mag:.4f} V, "
              f"|v_c-| = {m.v_c_neg_mag:.4f} V, i_max = {m.i_max:.4f} A")
    else:
        print("no fault window inside the run; metrics skipped")
    mpath = _dump_json(out / "metrics.json", report)
    print(f"wrote {path} and {mpath}")
    return EXIT_OK


def cmd_verify(args) -> int:
    """Seeded random scenarios: the support-optimal VI angle equals the angle of z_l."""
    from .network import FaultScenario
    from .phasor import Impedance, phasor
    from .vi import angle_sweep, dense_angles, optimal_angle

    cfg = _load(args)
    rng = random.Random(cfg.seed)
    rows, failures = [], 0
    for k in range(args.count):
        z_l = Impedance.from_polar(rng.uniform(0.5, 5.0), rng.uniform(5.0, 89.0))
        v_f_pos = phasor(rng.uniform(10.0, 70.0), rng.uniform(-30.0, 30.0))
        v_f_neg = phasor(rng.uniform(0.0, 40.0), rng.uniform(-180.0, 180.0))
        scen = FaultScenario(phasor(84.85, 0.0), v_f_pos, v_f_neg, z_l)
        try:
            best = best_point(angle_sweep(scen, 5.0, dense_angles(z_l)))
        except InfeasibleSizingError:
            continue
        err = abs(best.angle - optimal_angle(z_l))
        ok = err <= 0.05 + 1e-9
        failures += not ok
        rows.append((k, z_l.angle, best.angle, err, int(ok)))
    out = _out_dir(args, cfg)
    path = write_csv(out / "verify.csv", ("case", "z_l_angle_deg", "best_angle_deg", "error_deg", "ok"),
                     rows, (f"seed = {cfg.seed}",))
    print(f"{len(rows)} feasible scenarios, {failures} failures; wrote {path}")
    return EXIT_VERIFY if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vsupport", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=DEFAULT_CONFIG,
                       help=f"scenario file, or a bundled name ({', '.join(bundled_configs())})")
        p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and [output] dir)")
        p.add_argument("--seed", type=int, help="random seed for randomized runs")

    p = sub.add_parser("analyze", help="phasor evaluation of one VI setting")
    common(p)
    p.add_argument("--angle", type=float, help="VI angle in degrees (overrides the config)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="current-limited VI sweep over angle")
    common(p)
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--angles", help="comma-separated angle list in degrees")
    grid.add_argument("--dense", action="store_true", help="0.1 degree grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="closed-loop time-domain run")
    common(p)
    p.add_argument("--angle", type=float, help="VI angle in degrees (overrides the config)")
    p.add_argument("--substeps", type=int, help="plant sub-steps per control period")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="seeded random check of the optimal-angle property")
    common(p)
    p.add_argument("--count", type=int, default=200)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleSizingError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, DegenerateImpedanceError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
