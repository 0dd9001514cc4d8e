"""Trace and metrics serialization.

Traces are line-delimited CSV with a header row; floats print with 9
significant digits, which is stable enough for byte-level regression diffs.
The metrics summary is JSON and is recomputable from the trace file alone;
:func:`verify_metrics_replay` checks that property.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .sim import ImpactMetrics, SimTrace, StepImpact

JOINT_COLUMNS = [
    f"{side}_{name}"
    for side in ("l", "r")
    for name in ("hip_yaw", "hip_roll", "hip_pitch", "knee_pitch",
                 "ankle_pitch", "ankle_roll")
]
POSE_COLUMNS = ["x", "y", "z", "roll", "pitch", "yaw"]
COLUMNS = (
    ["t", "phase"]
    + JOINT_COLUMNS
    + [f"cmd_{c}" for c in POSE_COLUMNS]
    + [f"true_{c}" for c in POSE_COLUMNS]
    + ["d_a", "d_b", "d_c", "d_d", "d_avg", "phi_avg", "alpha_avg",
       "phi_ce", "alpha_ce", "zmp_x", "zmp_y", "event"]
)


def _fmt(value):
    return format(float(value), ".9g")


def record_to_row(rec):
    row = [_fmt(rec.t), rec.phase]
    row += [_fmt(v) for v in rec.joints.ravel()]
    row += [_fmt(v) for v in rec.cmd_sole]
    row += [_fmt(v) for v in rec.true_sole]
    row += [_fmt(v) for v in rec.probes]
    row += [_fmt(rec.d_avg), _fmt(rec.phi_avg), _fmt(rec.alpha_avg),
            _fmt(rec.phi_ce), _fmt(rec.alpha_ce),
            _fmt(rec.zmp[0]), _fmt(rec.zmp[1]), rec.event]
    return row


def write_trace(trace: SimTrace, path):
    with open(path, "w") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for rec in trace.records:
            fh.write(",".join(record_to_row(rec)) + "\n")


def read_trace(path):
    """Parse a trace file into a list of column dicts (floats where numeric)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header != COLUMNS:
            raise ValueError(f"unexpected trace header in {path}")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row = {}
            for key, value in zip(header, parts):
                if key in ("phase", "event"):
                    row[key] = value
                else:
                    row[key] = float(value)
            rows.append(row)
    return rows


def metrics_to_dict(metrics: ImpactMetrics):
    return {
        "episode": {
            "success": metrics.success,
            "max_impact_speed": metrics.max_impact_speed,
            "steps_completed": metrics.steps_completed,
            "failure_reason": metrics.failure_reason,
        },
        "steps": [asdict(s) for s in metrics.steps],
    }


def write_metrics(metrics: ImpactMetrics, path):
    with open(path, "w") as fh:
        json.dump(metrics_to_dict(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_metrics(path):
    with open(path) as fh:
        return json.load(fh)


def replay_step_metrics(rows, dt, severe_speed):
    """Recompute per-step touchdown metrics from trace rows alone.

    Touchdown rows are marked by the ``touchdown`` event; the impact speed
    is the descent rate over the trace's own preceding two samples, matching
    the in-sim estimator.
    """
    steps = []
    for i, row in enumerate(rows):
        if "touchdown" not in row["event"].split(";"):
            continue
        z2 = rows[i - 2]["true_z"] if i >= 2 else row["true_z"]
        z1 = rows[i - 1]["true_z"] if i >= 1 else row["true_z"]
        speed = max(0.0, (z2 - z1) / dt)
        steps.append({
            "index": len(steps),
            "t_touchdown": row["t"],
            "impact_speed": speed,
            "pitch_misalign": abs(row["phi_avg"]),
            "roll_misalign": abs(row["alpha_avg"]),
            "severe": speed > severe_speed,
        })
    return steps


def verify_metrics_replay(trace_path, metrics_path, dt, severe_speed=0.05,
                          tol=1e-6):
    """Check that the written metrics agree with a pure trace-file replay.

    Returns a list of mismatch descriptions (empty when consistent).
    """
    rows = read_trace(trace_path)
    metrics = read_metrics(metrics_path)
    replayed = replay_step_metrics(rows, dt, severe_speed)
    problems = []
    recorded = metrics["steps"]
    if len(recorded) != len(replayed):
        problems.append(
            f"step count mismatch: metrics {len(recorded)} vs replay {len(replayed)}")
        return problems
    for rec, rep in zip(recorded, replayed):
        for key in ("impact_speed", "pitch_misalign", "roll_misalign"):
            if abs(rec[key] - rep[key]) > tol:
                problems.append(
                    f"step {rep['index']}: {key} {rec[key]!r} vs replay {rep[key]!r}")
        if abs(rec["t_touchdown"] - rep["t_touchdown"]) > tol:
            problems.append(f"step {rep['index']}: touchdown time mismatch")
    max_speed = max((s["impact_speed"] for s in replayed), default=0.0)
    if abs(max_speed - metrics["episode"]["max_impact_speed"]) > tol:
        problems.append("episode max_impact_speed mismatch")
    return problems


def write_plot_data(rows, column, path, x_column="t"):
    """Two-column whitespace-separated data file for external plot tools."""
    if column not in COLUMNS or column in ("phase", "event"):
        raise ValueError(f"not a plottable column: {column!r}")
    with open(path, "w") as fh:
        fh.write(f"# {x_column} {column}\n")
        for row in rows:
            fh.write(f"{_fmt(row[x_column])} {_fmt(row[column])}\n")
