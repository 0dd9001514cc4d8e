"""Batch command-line harness: run episodes, sweep parameter grids, validate
models, and extract plot-ready data from traces.

Exit codes: 0 success, 2 config/validation error, 3 planning infeasibility,
4 episode failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import trace as trace_io
from .errors import (ConfigError, ModelValidationError, PlanningError,
                     ProbewalkError)
from .gait import plan_gait
from .kinematics import (LegJointVector, Pose, forward_leg, inverse_leg,
                         numeric_ik_oracle)
from .model import default_model, load_model
from .scenario import (MODEL_ENV_VAR, ScenarioConfig, load_scenario_file,
                       with_overrides)
from .sim import run_episode

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PLANNING = 3
EXIT_EPISODE = 4


def _parse_onoff(value):
    value = value.lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on|off, got {value!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="probewalk",
        description="Bipedal walking simulation with probe-based landing adaptation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario episode")
    p_run.add_argument("--config", required=True, help="scenario TOML file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--adaptation", type=_parse_onoff, default=None,
                       metavar="on|off")
    p_run.add_argument("--deflection", type=float, default=None, metavar="M",
                       help="constant tip-error magnitude in meters")
    p_run.add_argument("--out", default="out", help="output directory")

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    p_sweep.add_argument("--config", required=True, help="base scenario TOML file")
    p_sweep.add_argument("--sweep", required=True, help="sweep spec TOML file")
    p_sweep.add_argument("--out", default="out", help="output directory")

    p_val = sub.add_parser("validate", help="validate a model file")
    p_val.add_argument("model", nargs="?", default=None,
                       help=f"model TOML (default: built-in or ${MODEL_ENV_VAR})")

    p_plot = sub.add_parser("plot-data", help="extract a two-column data file")
    p_plot.add_argument("trace", help="trace CSV produced by run")
    p_plot.add_argument("--column", required=True)
    p_plot.add_argument("--out", required=True)
    return parser


def _execute(scenario: ScenarioConfig, out_dir: Path, tag=""):
    """Plan and run one scenario; returns (exit_code, metrics)."""
    model = scenario.resolve_model()
    plan = plan_gait(scenario.gait, model, zmp_margin=scenario.zmp_margin)
    result = run_episode(
        plan, model, terrain=scenario.terrain, deflection=scenario.deflection,
        controller_cfg=scenario.controller, sim_cfg=scenario.sim,
        seed=scenario.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = f"_{tag}" if tag else ""
    trace_io.write_trace(result, out_dir / f"trace{suffix}.csv")
    trace_io.write_metrics(result.metrics, out_dir / f"metrics{suffix}.json")
    code = EXIT_OK if result.metrics.success else EXIT_EPISODE
    return code, result.metrics


def cmd_run(args):
    scenario = load_scenario_file(args.config)
    scenario = with_overrides(scenario, seed=args.seed,
                              adaptation=args.adaptation,
                              deflection=args.deflection)
    code, metrics = _execute(scenario, Path(args.out))
    status = "success" if metrics.success else f"FAILED: {metrics.failure_reason}"
    print(f"episode {status}; steps={metrics.steps_completed} "
          f"max_impact={metrics.max_impact_speed:.4f} m/s")
    return code


def _sweep_cells(spec):
    """Cartesian grid over the sweep spec's [grid] lists, sorted by key."""
    grid = spec.get("grid", {})
    known = {"deflection", "adaptation", "obstacle_height", "slope_deg", "seed"}
    bad = set(grid) - known
    if bad:
        raise ConfigError(f"unknown sweep parameter(s): {', '.join(sorted(bad))}")
    cells = [{}]
    for key in sorted(grid):
        cells = [dict(c, **{key: v}) for c in cells for v in grid[key]]
    return cells


def _apply_cell(scenario: ScenarioConfig, cell):
    from .terrain import SlopeRegion, StepRegion, TerrainMap

    out = with_overrides(
        scenario,
        seed=cell.get("seed"),
        adaptation=cell.get("adaptation"),
        deflection=cell.get("deflection"),
    )
    if "obstacle_height" in cell:
        h = float(cell["obstacle_height"])
        features = tuple(f for f in out.terrain.features) if h == 0 else (
            StepRegion(x0=0.36, x1=0.64, height=h, y0=-0.25, y1=-0.02),)
        out = replace(out, terrain=TerrainMap(features))
    if "slope_deg" in cell:
        deg = float(cell["slope_deg"])
        features = () if deg == 0 else (
            SlopeRegion(x0=0.35, x1=1.45, grade=float(np.tan(np.radians(deg)))),)
        out = replace(out, terrain=TerrainMap(features))
    return out


def _cell_tag(cell):
    return "_".join(f"{k}-{cell[k]}" for k in sorted(cell))


def cmd_sweep(args):
    try:
        import tomllib as _toml
    except ImportError:
        import tomli as _toml
    scenario = load_scenario_file(args.config)
    with open(args.sweep, "rb") as fh:
        spec = _toml.load(fh)
    cells = _sweep_cells(spec)
    if not cells:
        raise ConfigError("sweep grid is empty")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    worst = EXIT_OK
    for cell in cells:
        cell_scenario = _apply_cell(scenario, cell)
        code, metrics = _execute(cell_scenario, out_dir / "cells",
                                 tag=_cell_tag(cell))
        worst = max(worst, code)
        rows.append((
            _cell_tag(cell), dict(cell),
            {"success": metrics.success,
             "max_impact_speed": metrics.max_impact_speed,
             "steps_completed": metrics.steps_completed},
        ))
    rows.sort(key=lambda r: r[0])
    with open(out_dir / "sweep_results.csv", "w") as fh:
        fh.write("cell,success,max_impact_speed,steps_completed\n")
        for tag, _, res in rows:
            fh.write(f"{tag},{int(res['success'])},"
                     f"{res['max_impact_speed']:.9g},{res['steps_completed']}\n")
    with open(out_dir / "sweep_results.json", "w") as fh:
        json.dump([{"cell": c, **res} for _, c, res in rows], fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    print(f"{len(rows)} cells -> {out_dir / 'sweep_results.csv'}")
    return worst


def cmd_validate(args):
    import os

    ref = args.model or os.environ.get(MODEL_ENV_VAR)
    if ref is None:
        model = default_model()
        print("model: built-in default")
    else:
        with open(ref) as fh:
            model = load_model(fh.read())
        print(f"model: {ref}")
    print(f"  total mass {model.total_mass:.3f} kg, "
          f"leg reach {model.leg.reach:.3f} m, "
          f"sensor range {model.foot.sensor_range * 100:.1f} cm")

    # kinematic self-checks: zero pose plus an IK/FK grid
    pelvis = Pose.from_xyz_rpy(z=model.com_height_nominal)
    worst = 0.0
    checked = 0
    for side in ("left", "right"):
        zero = LegJointVector.zeros(side)
        forward_leg(zero, model)  # raises if zero pose violates a limit
        sign = 1.0 if side == "left" else -1.0
        for dx in (-0.08, 0.0, 0.08):
            for dy in (-0.04, 0.0, 0.04):
                for dz in (0.0, 0.04, 0.08):
                    sole = Pose.from_xyz_rpy(
                        dx, sign * model.leg.hip_offset_y + dy, dz)
                    joints = inverse_leg(pelvis, sole, model, side)
                    again = forward_leg(joints, model, check=False)
                    err = float(np.max(np.abs(
                        (pelvis.position + pelvis.matrix() @ again.position)
                        - sole.position)))
                    oracle = numeric_ik_oracle(pelvis, sole, model, joints)
                    err = max(err, float(np.max(np.abs(
                        oracle.angles - joints.angles))))
                    worst = max(worst, err)
                    checked += 1
    print(f"  IK/FK grid: {checked} targets, worst error {worst:.2e}")
    if worst > 1e-6:
        print("validation FAILED: kinematic round-trip error above 1e-6")
        return EXIT_CONFIG
    print("validation OK")
    return EXIT_OK


def cmd_plot_data(args):
    rows = trace_io.read_trace(args.trace)
    trace_io.write_plot_data(rows, args.column, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "validate": cmd_validate,
        "plot-data": cmd_plot_data,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ModelValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlanningError as exc:
        print(f"planning error: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except ProbewalkError as exc:
        print(f"episode error: {exc}", file=sys.stderr)
        return EXIT_EPISODE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
