"""Walking pattern generation: footsteps, SS/DS phase schedule, polynomial
task-space trajectories, and pelvis optimization against a ZMP reference.

The pelvis x/y polynomials are chosen by linear least squares so that the
multi-link ZMP tracks a reference (stance-foot center during single support,
linear transfer during double support), subject to C2 continuity at the
phase knots and rest boundary conditions.  The ZMP model is affine in the
pelvis coefficients for fixed pelvis height; an optional refinement pass
re-targets the least squares against the exact forward-kinematics ZMP.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InfeasiblePlanError, PlanningError, WorkspaceError, JointLimitError
from .kinematics import LegJointVector, Pose
from .model import RobotModel
from .polynomial import (
    PiecewisePolynomial,
    SegmentBuilder,
    constant_coefficients,
    linear_coefficients,
    quintic_coefficients,
    shift_coefficients,
)
from .zmp import GRAVITY, compute_zmp, polygon_margin, support_polygon

PHASE_DS = "ds"
PHASE_SS_LEFT = "ss_left"
PHASE_SS_RIGHT = "ss_right"


def ss_phase(side):
    return PHASE_SS_LEFT if side == "left" else PHASE_SS_RIGHT


def phase_swing_side(kind):
    if kind == PHASE_SS_LEFT:
        return "left"
    if kind == PHASE_SS_RIGHT:
        return "right"
    return None


@dataclass(frozen=True)
class GaitParams:
    """Walk shape and timing; ``control_dt`` is the 5 ms control tick.

    ``t_startup`` lengthens the initial double support so the pelvis can
    build its lateral sway from rest before the first swing.
    """

    step_length: float = 0.2
    step_width: float = 0.23
    step_height: float = 0.05
    t_ss: float = 0.8
    t_ds: float = 0.4
    n_steps: int = 6
    control_dt: float = 0.005
    t_startup: float = 0.8

    def validate(self):
        if self.control_dt <= 0:
            raise PlanningError("control_dt must be positive")
        if self.t_startup < 0:
            raise PlanningError("t_startup must be >= 0")
        for name in ("t_ss", "t_ds", "t_startup"):
            value = getattr(self, name)
            if name != "t_startup" and value <= 0:
                raise PlanningError(f"{name} must be positive")
            ticks = value / self.control_dt
            if abs(ticks - round(ticks)) > 1e-9:
                raise PlanningError(
                    f"{name} = {value} is not an integer multiple of control_dt"
                )
        if self.n_steps < 0:
            raise PlanningError("n_steps must be >= 0")
        if self.step_width <= 0:
            raise PlanningError("step_width must be positive")
        if self.step_height < 0:
            raise PlanningError("step_height must be >= 0")
        return self


@dataclass(frozen=True)
class Footstep:
    side: str
    pose: Pose


@dataclass(frozen=True)
class PhaseInterval:
    """One element of the SS/DS timeline."""

    kind: str
    t0: float
    t1: float
    swing_target: int = -1   # footstep index the swing lands on (SS only)

    @property
    def duration(self):
        return self.t1 - self.t0

    @property
    def swing_side(self):
        return phase_swing_side(self.kind)


@dataclass(frozen=True)
class GaitPlan:
    """Complete, immutable walking plan on nominally flat ground."""

    params: GaitParams
    footsteps: tuple
    phases: tuple
    pelvis_traj: PiecewisePolynomial
    left_foot_traj: PiecewisePolynomial
    right_foot_traj: PiecewisePolynomial
    zmp_ref: PiecewisePolynomial
    zmp_residual: float = field(default=0.0, compare=False)

    @property
    def duration(self):
        return self.phases[-1].t1

    def foot_traj(self, side):
        return self.left_foot_traj if side == "left" else self.right_foot_traj

    def phase_at(self, t):
        for ph in self.phases:
            if t < ph.t1:
                return ph
        return self.phases[-1]

    def swing_phases(self):
        return [ph for ph in self.phases if ph.kind != PHASE_DS]

    def stance_sides(self, phase):
        if phase.kind == PHASE_DS:
            return ("left", "right")
        return ("right",) if phase.kind == PHASE_SS_LEFT else ("left",)

    def footstep_positions_at(self, t):
        """Planned (x, y) placement of each foot active at time t."""
        pos = {}
        for step in self.footsteps[:2]:
            pos[step.side] = step.pose
        for ph in self.phases:
            if ph.kind == PHASE_DS:
                continue
            if ph.t1 <= t:
                step = self.footsteps[ph.swing_target]
                pos[step.side] = step.pose
            else:
                break
        return pos

    def to_dict(self):
        return {
            "params": {
                "step_length": self.params.step_length,
                "step_width": self.params.step_width,
                "step_height": self.params.step_height,
                "t_ss": self.params.t_ss,
                "t_ds": self.params.t_ds,
                "n_steps": self.params.n_steps,
                "control_dt": self.params.control_dt,
            },
            "footsteps": [
                {"side": s.side, "pose": s.pose.as_array().tolist()}
                for s in self.footsteps
            ],
            "phases": [
                {"kind": p.kind, "t0": p.t0, "t1": p.t1, "swing_target": p.swing_target}
                for p in self.phases
            ],
            "pelvis_traj": self.pelvis_traj.to_dict(),
            "left_foot_traj": self.left_foot_traj.to_dict(),
            "right_foot_traj": self.right_foot_traj.to_dict(),
            "zmp_ref": self.zmp_ref.to_dict(),
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)


# ---------------------------------------------------------------------------
# footsteps and phases
# ---------------------------------------------------------------------------


def plan_footsteps(params: GaitParams, start_pose: Pose = None):
    """Footstep sequence for a straight walk along the start-pose x axis.

    Layout: both feet side by side, then alternating placements (first swing
    is the right foot) at ``x = (k - 1/2) * step_length``, and a final
    closing step that brings the trailing foot alongside the leading one.
    """
    params.validate()
    if start_pose is None:
        start_pose = Pose.identity()
    x0 = float(start_pose.position[0])
    y0 = float(start_pose.position[1])
    half_w = params.step_width / 2.0

    def foot_pose(x, side):
        y = y0 + (half_w if side == "left" else -half_w)
        return Pose.from_xyz_rpy(x, y, 0.0)

    steps = [Footstep("left", foot_pose(x0, "left")),
             Footstep("right", foot_pose(x0, "right"))]
    if params.n_steps == 0:
        return steps

    side = "right"  # first swing
    x = x0
    for k in range(1, params.n_steps + 1):
        x = x0 + (k - 0.5) * params.step_length
        steps.append(Footstep(side, foot_pose(x, side)))
        side = "left" if side == "right" else "right"
    steps.append(Footstep(side, foot_pose(x, side)))  # closing half step
    return steps


def build_phases(params: GaitParams, footsteps):
    """SS/DS timeline: leading DS (with startup), then (SS, DS) per swing."""
    t_first = params.t_ds + params.t_startup
    phases = [PhaseInterval(PHASE_DS, 0.0, t_first)]
    t = t_first
    for idx in range(2, len(footsteps)):
        side = footsteps[idx].side
        phases.append(PhaseInterval(ss_phase(side), t, t + params.t_ss, idx))
        t += params.t_ss
        phases.append(PhaseInterval(PHASE_DS, t, t + params.t_ds))
        t += params.t_ds
    return tuple(phases)


# ---------------------------------------------------------------------------
# task-space trajectories
# ---------------------------------------------------------------------------


def generate_swing_trajectory(start: Pose, end: Pose, t_ss: float, apex: float,
                              t0: float = 0.0) -> PiecewisePolynomial:
    """Swing-foot trajectory: quintic per channel, zero velocity and
    acceleration at both ends, z peaking ``apex`` above the higher endpoint
    at mid-swing.
    """
    if t_ss <= 0:
        raise PlanningError("t_ss must be positive")
    p0 = start.as_array()
    p1 = end.as_array()
    half = t_ss / 2.0
    z_apex = max(p0[2], p1[2]) + apex

    coeffs = np.zeros((2, 6, 6))
    for d in range(6):
        if d == 2:
            coeffs[0, 2] = quintic_coefficients(half, p0[2], 0.0, 0.0, z_apex, 0.0, 0.0)
            coeffs[1, 2] = quintic_coefficients(half, z_apex, 0.0, 0.0, p1[2], 0.0, 0.0)
        else:
            full = quintic_coefficients(t_ss, p0[d], 0.0, 0.0, p1[d], 0.0, 0.0)
            coeffs[0, d] = full
            coeffs[1, d] = shift_coefficients(full, half)
    return PiecewisePolynomial(np.array([t0, t0 + half, t0 + t_ss]), coeffs)


def build_foot_trajectories(params: GaitParams, footsteps, phases):
    """Per-foot 6-channel trajectories across the whole plan horizon."""
    builders = {"left": SegmentBuilder(6), "right": SegmentBuilder(6)}
    current = {"left": footsteps[0].pose, "right": footsteps[1].pose}
    for ph in phases:
        if ph.kind == PHASE_DS:
            for side in ("left", "right"):
                builders[side].add_constant(ph.duration, current[side].as_array())
            continue
        swing = ph.swing_side
        stance = "left" if swing == "right" else "right"
        builders[stance].add_constant(ph.duration, current[stance].as_array())
        target = footsteps[ph.swing_target].pose
        sw = generate_swing_trajectory(current[swing], target, ph.duration,
                                       params.step_height, t0=ph.t0)
        builders[swing].add(sw.knots[1] - sw.knots[0], sw.coeffs[0])
        builders[swing].add(sw.knots[2] - sw.knots[1], sw.coeffs[1])
        current[swing] = target
    return builders["left"].build(), builders["right"].build()


def reference_zmp(params: GaitParams, footsteps, phases) -> PiecewisePolynomial:
    """ZMP reference: stance-foot center during SS, linear transfer in DS."""
    current = {"left": footsteps[0].pose, "right": footsteps[1].pose}

    def center_xy(side):
        return current[side].position[:2].copy()

    def midpoint():
        return (center_xy("left") + center_xy("right")) / 2.0

    builder = SegmentBuilder(2)
    point = midpoint()
    for i, ph in enumerate(phases):
        if ph.kind == PHASE_DS:
            nxt = phases[i + 1] if i + 1 < len(phases) else None
            if nxt is None:
                target = midpoint()
            else:
                stance = "left" if nxt.swing_side == "right" else "right"
                target = center_xy(stance)
            coeffs = np.stack([
                linear_coefficients(point[d], (target[d] - point[d]) / ph.duration)
                for d in range(2)
            ])
            builder.add(ph.duration, coeffs)
            point = target
        else:
            builder.add_constant(ph.duration, point)
            current[ph.swing_side] = footsteps[ph.swing_target].pose
    return builder.build()


# ---------------------------------------------------------------------------
# pelvis optimization
# ---------------------------------------------------------------------------

#: Leg-link interpolation factors between the hip point (0) and ankle (1).
LINK_ALPHAS = {"thigh": 0.25, "shank": 0.75, "foot": 1.0}


def _link_table(model: RobotModel):
    """(mass, alpha, side_sign, z_extra) rows for the affine ZMP model.

    Link CoM ~ (1 - alpha) * hip + alpha * ankle (+ fixed vertical offset);
    hip = pelvis + lateral offset, ankle = sole + ankle_height.
    """
    masses = dict(model.link_masses)
    h = model.leg.ankle_height
    rows = [(masses["pelvis"], 0.0, 0.0, model.pelvis_com_offset_z)]
    for side, sign in (("left", 1.0), ("right", -1.0)):
        for part, alpha in LINK_ALPHAS.items():
            z_extra = alpha * h if part != "foot" else h / 2.0
            rows.append((masses[f"{part}_{side}"], alpha, sign, z_extra))
    return rows


def _segment_basis_row(seg_len, tau, degree, deriv):
    row = np.zeros(degree + 1)
    for p in range(degree + 1):
        if deriv == 0:
            row[p] = tau ** p
        elif deriv == 1 and p >= 1:
            row[p] = p * tau ** (p - 1)
        elif deriv == 2 and p >= 2:
            row[p] = p * (p - 1) * tau ** (p - 2)
    return row


def _build_constraints(knots, degree, p0, axis_dim):
    """C2 continuity plus rest boundary conditions for one axis."""
    nseg = len(knots) - 1
    ncoef = degree + 1
    rows = []
    rhs = []
    knot_of_row = []
    for k in range(1, nseg):
        seg_len = knots[k] - knots[k - 1]
        for deriv in range(3):
            row = np.zeros(nseg * ncoef)
            row[(k - 1) * ncoef: k * ncoef] = _segment_basis_row(seg_len, seg_len, degree, deriv)
            row[k * ncoef: (k + 1) * ncoef] -= _segment_basis_row(seg_len, 0.0, degree, deriv)
            rows.append(row)
            rhs.append(0.0)
            knot_of_row.append(k)
    for deriv, value in ((0, p0), (1, 0.0), (2, 0.0)):
        row = np.zeros(nseg * ncoef)
        row[:ncoef] = _segment_basis_row(0.0, 0.0, degree, deriv)
        rows.append(row)
        rhs.append(value)
        knot_of_row.append(0)
    last_len = knots[-1] - knots[-2]
    for deriv in (1, 2):
        row = np.zeros(nseg * ncoef)
        row[-ncoef:] = _segment_basis_row(last_len, last_len, degree, deriv)
        rows.append(row)
        rhs.append(0.0)
        knot_of_row.append(nseg)
    return np.array(rows), np.array(rhs), knot_of_row


def _solve_constrained_lsq(a_mat, b_vec, c_mat, d_vec, knot_of_row):
    ncoef = a_mat.shape[1]
    ncon = c_mat.shape[0]
    kkt = np.zeros((ncoef + ncon, ncoef + ncon))
    kkt[:ncoef, :ncoef] = 2.0 * a_mat.T @ a_mat
    kkt[:ncoef, ncoef:] = c_mat.T
    kkt[ncoef:, :ncoef] = c_mat
    rhs = np.concatenate([2.0 * a_mat.T @ b_vec, d_vec])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        rank = np.linalg.matrix_rank(c_mat)
        if rank < ncon:
            # walk the constraint rows to find where independence is lost
            for i in range(1, ncon + 1):
                if np.linalg.matrix_rank(c_mat[:i]) < i:
                    raise PlanningError(
                        f"rank-deficient continuity constraints at knot "
                        f"{knot_of_row[i - 1]}"
                    ) from exc
        raise PlanningError(f"pelvis optimization system is singular: {exc}") from exc
    coeffs = sol[:ncoef]
    residual = float(np.sum((a_mat @ coeffs - b_vec) ** 2))
    return coeffs, residual


def sampled_link_positions(pelvis_traj, left_traj, right_traj, model, ts):
    """Exact per-tick link CoM positions via IK + FK along the plan."""
    leg = model.leg
    rows = np.empty((len(ts), 7, 3))
    h = leg.ankle_height
    for i, t in enumerate(ts):
        pel = pelvis_traj.value(t)
        pel_pos = pel[:3]
        pel_rot = kernels.rpy_to_matrix(pel[3], pel[4], pel[5])
        rows[i, 0] = pel_pos + pel_rot @ np.array([0.0, 0.0, model.pelvis_com_offset_z])
        for j, (traj, sign) in enumerate(((left_traj, 1.0), (right_traj, -1.0))):
            foot = traj.value(t)
            rel_pos = pel_rot.T @ (foot[:3] - pel_pos)
            rel_rot = pel_rot.T @ kernels.rpy_to_matrix(foot[3], foot[4], foot[5])
            q, status, shortfall = kernels.ik_leg(
                rel_pos, np.ascontiguousarray(rel_rot), sign,
                leg.hip_offset_y, leg.thigh_length, leg.shank_length, h, 5e-4,
            )
            if status != 0:
                raise PlanningError(
                    f"plan unreachable at t={t:.3f}s "
                    f"({'left' if sign > 0 else 'right'} leg, shortfall {shortfall:.4f} m)"
                )
            pts, r_sole = kernels.leg_chain_points(
                q, sign, leg.hip_offset_y, leg.thigh_length, leg.shank_length, h)
            hip, knee, ankle = pts[0], pts[1], pts[2]
            rows[i, 1 + j] = pel_pos + pel_rot @ ((hip + knee) / 2.0)
            rows[i, 3 + j] = pel_pos + pel_rot @ ((knee + ankle) / 2.0)
            rows[i, 5 + j] = pel_pos + pel_rot @ (ankle - (h / 2.0) * r_sole[:, 2])
    return rows


def _model_zmp_terms(model, params, phases, foot_trajs, ts):
    """Per-tick coefficients a, b, r_x, r_y, D of the affine ZMP model."""
    g = GRAVITY
    z_p = model.com_height_nominal
    table = _link_table(model)
    n = len(ts)
    a = np.zeros(n)
    b = np.zeros(n)
    d = np.zeros(n)
    r = np.zeros((n, 2))
    foot_val = {s: foot_trajs[s].sample(ts, 0) for s in ("left", "right")}
    foot_acc = {s: foot_trajs[s].sample(ts, 2) for s in ("left", "right")}
    hip_y = model.leg.hip_offset_y
    for mass, alpha, sign, z_extra in table:
        if alpha == 0.0:
            z_i = np.full(n, z_p + z_extra)
            zdd = np.zeros(n)
            u = {0: np.zeros(n), 1: np.zeros(n)}
            udd = {0: np.zeros(n), 1: np.zeros(n)}
            c_off = {0: 0.0, 1: 0.0}
        else:
            side = "left" if sign > 0 else "right"
            z_i = (1 - alpha) * z_p + alpha * foot_val[side][:, 2] + z_extra
            zdd = alpha * foot_acc[side][:, 2]
            u = {0: alpha * foot_val[side][:, 0], 1: alpha * foot_val[side][:, 1]}
            udd = {0: alpha * foot_acc[side][:, 0], 1: alpha * foot_acc[side][:, 1]}
            c_off = {0: 0.0, 1: (1 - alpha) * sign * hip_y}
        w = mass * (zdd + g)
        a += w * (1 - alpha)
        b += -mass * z_i * (1 - alpha)
        d += w
        for axis in (0, 1):
            r[:, axis] += w * (u[axis] + c_off[axis]) - mass * z_i * udd[axis]
    return a, b, r, d


def optimize_pelvis_trajectory(params: GaitParams, phases, foot_trajs: dict,
                               zmp_ref: PiecewisePolynomial, model: RobotModel,
                               pelvis_start_xy=None, degree: int = 5,
                               refine: int = 1):
    """Pelvis x/y piecewise polynomials minimizing ZMP tracking error.

    Returns ``(trajectory, residual)``; the trajectory carries all six pose
    channels with z fixed at ``com_height_nominal`` and level orientation.
    """
    if not 3 <= degree <= 5:
        raise PlanningError("pelvis polynomial degree must be in [3, 5]")
    knots = np.array([phases[0].t0] + [ph.t1 for ph in phases])
    nseg = len(knots) - 1
    ncoef = degree + 1
    dt = params.control_dt
    n_ticks = int(round(knots[-1] / dt)) + 1
    ts = np.arange(n_ticks) * dt

    if pelvis_start_xy is None:
        ref0 = zmp_ref.value(0.0)
        pelvis_start_xy = (float(ref0[0]), float(ref0[1]))

    a, b, r, d_vec = _model_zmp_terms(model, params, phases, foot_trajs, ts)
    ref = zmp_ref.sample(ts, 0)

    # design matrix: rows indexed by tick, cols by (segment, power)
    a_mat = np.zeros((n_ticks, nseg * ncoef))
    seg_idx = np.minimum(np.searchsorted(knots, ts, side="right") - 1, nseg - 1)
    for i in range(n_ticks):
        k = seg_idx[i]
        tau = ts[i] - knots[k]
        base = _segment_basis_row(0.0, tau, degree, 0)
        base2 = _segment_basis_row(0.0, tau, degree, 2)
        a_mat[i, k * ncoef:(k + 1) * ncoef] = (a[i] * base + b[i] * base2) / d_vec[i]

    def solve(extra_target):
        coeffs = np.zeros((nseg, 2, 6))
        residual = 0.0
        for axis in (0, 1):
            c_mat, c_rhs, knot_rows = _build_constraints(
                knots, degree, pelvis_start_xy[axis], axis)
            b_vec = extra_target[:, axis] - r[:, axis] / d_vec
            sol, res = _solve_constrained_lsq(a_mat, b_vec, c_mat, c_rhs, knot_rows)
            coeffs[:, axis, :ncoef] = sol.reshape(nseg, ncoef)
            residual += res
        return coeffs, residual

    def assemble(coeffs_xy):
        coeffs = np.zeros((nseg, 6, 6))
        coeffs[:, :2] = coeffs_xy[:, :, :6]
        coeffs[:, 2, 0] = model.com_height_nominal
        return PiecewisePolynomial(knots, coeffs)

    coeffs_xy, residual = solve(ref)
    traj = assemble(coeffs_xy)
    for _ in range(max(0, refine)):
        link_pos = sampled_link_positions(
            traj, foot_trajs["left"], foot_trajs["right"], model, ts)
        exact = compute_zmp(link_pos, np.array([m for m, *_ in _link_table(model)]), dt)
        model_pred = np.empty_like(exact)
        for axis in (0, 1):
            u = traj.sample(ts, 0)[:, axis]
            udd = traj.sample(ts, 2)[:, axis]
            model_pred[:, axis] = (a * u + b * udd + r[:, axis]) / d_vec
        coeffs_xy, residual = solve(ref - (exact - model_pred))
        traj = assemble(coeffs_xy)
    return traj, residual


# ---------------------------------------------------------------------------
# plan assembly, validation
# ---------------------------------------------------------------------------


def plan_zmp(plan: GaitPlan, model: RobotModel):
    """Exact multi-link ZMP of the plan, sampled at every control tick."""
    dt = plan.params.control_dt
    n = int(round(plan.duration / dt)) + 1
    ts = np.arange(n) * dt
    link_pos = sampled_link_positions(
        plan.pelvis_traj, plan.left_foot_traj, plan.right_foot_traj, model, ts)
    masses = np.array([m for m, *_ in _link_table(model)])
    return ts, compute_zmp(link_pos, masses, dt)


def support_margins(plan: GaitPlan, model: RobotModel, zmp=None):
    """Distance of the planned ZMP to the active support polygon per tick."""
    if zmp is None:
        ts, zmp = plan_zmp(plan, model)
    else:
        ts = np.arange(len(zmp)) * plan.params.control_dt
    margins = np.empty(len(ts))
    hull_cache = {}
    for i, t in enumerate(ts):
        ph = plan.phase_at(min(t, plan.duration - 1e-12))
        key = (id(ph),)
        if key not in hull_cache:
            positions = plan.footstep_positions_at(ph.t0 + 1e-9)
            stance = plan.stance_sides(ph)
            hull_cache[key] = support_polygon(
                [positions[s] for s in stance], model.foot)
        margins[i] = polygon_margin(hull_cache[key], zmp[i])
    return ts, margins


def joint_trajectories(plan: GaitPlan, model: RobotModel):
    """Per-tick leg joint vectors (ticks, 2, 6); raises on any limit breach.

    Also enforces the per-joint speed bounds via finite differences between
    adjacent ticks.
    """
    dt = plan.params.control_dt
    n = int(round(plan.duration / dt)) + 1
    ts = np.arange(n) * dt
    leg = model.leg
    out = np.empty((n, 2, 6))
    limits = {s: model.leg_limits(s) for s in ("left", "right")}
    specs = {s: model.leg_joint_specs(s) for s in ("left", "right")}
    for i, t in enumerate(ts):
        pel = plan.pelvis_traj.value(t)
        pel_rot = kernels.rpy_to_matrix(pel[3], pel[4], pel[5])
        for j, side in enumerate(("left", "right")):
            foot = plan.foot_traj(side).value(t)
            rel_pos = pel_rot.T @ (foot[:3] - pel[:3])
            rel_rot = pel_rot.T @ kernels.rpy_to_matrix(foot[3], foot[4], foot[5])
            sign = 1.0 if side == "left" else -1.0
            q, status, shortfall = kernels.ik_leg(
                np.ascontiguousarray(rel_pos), np.ascontiguousarray(rel_rot),
                sign, leg.hip_offset_y, leg.thigh_length, leg.shank_length,
                leg.ankle_height, 5e-4)
            if status != 0:
                raise InfeasiblePlanError(i, f"{side} leg target unreachable "
                                             f"(shortfall {shortfall:.4f} m)")
            lo, hi = limits[side]
            for k in range(6):
                if not lo[k] <= q[k] <= hi[k]:
                    raise InfeasiblePlanError(
                        i, f"{specs[side][k].name} = {q[k]:.4f} rad outside "
                           f"[{lo[k]:.4f}, {hi[k]:.4f}]")
            out[i, j] = q
    max_speed = np.array([
        [s.max_speed for s in specs["left"]],
        [s.max_speed for s in specs["right"]],
    ])
    rates = np.abs(np.diff(out, axis=0)) / dt
    bad = rates > max_speed[None, :, :] + 1e-12
    if np.any(bad):
        tick = int(np.argwhere(bad)[0][0]) + 1
        raise InfeasiblePlanError(tick, "joint speed limit exceeded")
    return out


def plan_gait(params: GaitParams, model: RobotModel, start_pose: Pose = None,
              zmp_margin: float = 0.02, degree: int = 5, refine: int = 1,
              validate_joints: bool = True) -> GaitPlan:
    """Full pipeline: footsteps -> phases -> trajectories -> ZMP optimization.

    The returned plan is validated: planned ZMP keeps ``zmp_margin`` to the
    support polygon at every tick and joint limits/speeds hold throughout.
    """
    params.validate()
    if params.step_height <= model.foot.sensor_range:
        warnings.warn(
            "step_height does not clear the probe sensing range; "
            "swing probes may stay in contact range the whole step",
            stacklevel=2,
        )
    footsteps = tuple(plan_footsteps(params, start_pose))
    phases = build_phases(params, footsteps)
    left_traj, right_traj = build_foot_trajectories(params, footsteps, phases)
    zmp_ref = reference_zmp(params, footsteps, phases)
    foot_trajs = {"left": left_traj, "right": right_traj}
    pelvis_traj, residual = optimize_pelvis_trajectory(
        params, phases, foot_trajs, zmp_ref, model, degree=degree, refine=refine)
    plan = GaitPlan(
        params=params,
        footsteps=footsteps,
        phases=phases,
        pelvis_traj=pelvis_traj,
        left_foot_traj=left_traj,
        right_foot_traj=right_traj,
        zmp_ref=zmp_ref,
        zmp_residual=residual,
    )
    if zmp_margin is not None:
        _, margins = support_margins(plan, model)
        worst = float(np.min(margins))
        if worst < zmp_margin:
            tick = int(np.argmin(margins))
            raise PlanningError(
                f"planned ZMP margin {worst:.4f} m below {zmp_margin} m "
                f"at tick {tick}")
    if validate_joints:
        joint_trajectories(plan, model)
    return plan
