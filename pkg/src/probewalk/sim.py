"""Deterministic kinematic plant: closed-loop execution of a gait plan over
real terrain with the deflection disturbance and the adaptation controller.

Each 5 ms tick: evaluate the planned task poses, apply the ankle corrections
and any replanned vertical motion, solve IK, perturb the swing foot by the
deflection model, resolve ground contact, read the probes, and update the
controller and phase machine.  Contact is scored kinematically: touchdown
vertical speed and orientation misalignment, not reaction forces.

Phase semantics follow the plan's half-open intervals: the touchdown tick is
the first tick of the following double support, so an undisturbed episode
reproduces the planned phase boundaries exactly.  A guarded or late landing
shifts the remaining schedule; single support never ends before settled
contact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from . import kernels
from .deflection import DeflectionModel, apply_deflection, swing_extension
from .errors import DynamicInfeasibilityError, ProbewalkError
from .gait import PHASE_DS, GaitPlan, _link_table, phase_swing_side
from .kinematics import Pose, relative_pose
from .model import RobotModel
from .sensor import aggregate, raw_probe_gaps, read_probes
from .terrain import TerrainMap
from .zmp import compute_zmp

#: Gap at or below which a descending foot is considered in contact (m).
CONTACT_EPS = 1e-9


def _blend(u):
    """Minimum-jerk scalar (value, derivative) for liftoff-offset decay."""
    if u <= 0.0:
        return 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0
    s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    ds = u * u * (30.0 + u * (-60.0 + 30.0 * u))
    return s, ds


@dataclass(frozen=True)
class SimConfig:
    """Plant-side thresholds; the controller has its own config."""

    severe_impact_speed: float = 0.05   # collision proxy -> episode failure
    soft_impact_speed: float = 0.01     # reporting threshold for soft landings
    noise_amp: float = 0.0              # probe noise amplitude (m), 0 = off


@dataclass
class FootState:
    landed: bool = True
    landed_cmd: np.ndarray = None    # commanded pose (6,) held while planted
    landed_true: np.ndarray = None   # plant-truth pose (6,) while planted
    liftoff_offset: np.ndarray = None
    last_cmd: np.ndarray = None
    last_true: np.ndarray = None
    prev_true_z: float = None
    prev2_true_z: float = None
    prev_d_avg: float = None         # last swing-phase probe average
    creep_z: float = None            # late-touchdown slow-descent state
    has_lifted: bool = False         # broke ground contact this swing


@dataclass
class StepImpact:
    index: int
    side: str
    t_touchdown: float
    impact_speed: float
    pitch_misalign: float
    roll_misalign: float
    early_contact: bool
    guard_triggered: bool


@dataclass
class ImpactMetrics:
    steps: list
    success: bool
    max_impact_speed: float
    steps_completed: int
    failure_reason: str = ""


@dataclass
class TraceRecord:
    t: float
    phase: str
    joints: np.ndarray        # (2, 6) left then right
    cmd_sole: np.ndarray      # (6,) active foot commanded pose
    true_sole: np.ndarray     # (6,) active foot plant-truth pose
    probes: np.ndarray        # (4,) corner distances A..D
    d_avg: float
    phi_avg: float
    alpha_avg: float
    phi_ce: float
    alpha_ce: float
    zmp: np.ndarray           # (2,) filled after the episode
    event: str


@dataclass
class SimTrace:
    records: list
    metrics: ImpactMetrics
    dt: float
    plan: GaitPlan = field(repr=False, default=None)


@dataclass
class SimState:
    """Mutable per-episode state owned by the stepping loop."""

    plan: GaitPlan
    model: RobotModel
    terrain: TerrainMap
    deflection: DeflectionModel
    controller_cfg: ctl.ControllerConfig
    sim_cfg: SimConfig
    rng: np.random.Generator
    k: int = 0
    phase_idx: int = 0
    phase_entered: float = 0.0
    adaptation: ctl.AdaptationState = field(default_factory=ctl.AdaptationState)
    feet: dict = None
    last_active: str = None
    impacts: list = field(default_factory=list)
    pelvis_log: list = field(default_factory=list)
    failed: bool = False
    failure_reason: str = ""
    done: bool = False

    def __post_init__(self):
        plan = self.plan
        self.feet = {}
        for side, idx in (("left", 0), ("right", 1)):
            pose6 = plan.footsteps[idx].pose.as_array()
            # feet start planted on the actual terrain under the footprint
            true6 = pose6.copy()
            true6[2] = self.terrain.query(pose6[0], pose6[1])
            self.feet[side] = FootState(
                landed=True, landed_cmd=pose6.copy(), landed_true=true6,
                last_cmd=pose6.copy(), last_true=true6.copy(),
                prev_true_z=true6[2], prev2_true_z=true6[2],
            )
        swings = plan.swing_phases()
        self.last_active = swings[0].swing_side if swings else "right"

    @property
    def t(self):
        return self.k * self.plan.params.control_dt

    def current_phase(self):
        return self.plan.phases[self.phase_idx]


def _pose_from6(arr):
    return Pose(arr[:3], arr[3:])


def step(sim: SimState):
    """Advance one control tick and return its TraceRecord (None when the
    episode horizon is already complete)."""
    if sim.done:
        return None
    plan = sim.plan
    model = sim.model
    dt = plan.params.control_dt
    ccfg = sim.controller_cfg
    t = sim.t
    events = []

    ph = sim.current_phase()
    elapsed = t - sim.phase_entered
    plan_clock = ph.t0 + min(elapsed, ph.duration)
    swing_side = phase_swing_side(ph.kind)
    active = swing_side if swing_side is not None else sim.last_active

    pelvis6 = plan.pelvis_traj.value(plan_clock)
    pelvis = _pose_from6(pelvis6)
    sim.pelvis_log.append(pelvis6)

    # -- commanded task poses ------------------------------------------------
    cmd = {}
    phi_des = alpha_des = 0.0
    swing_base_z = swing_base_zvel = None
    for side in ("left", "right"):
        foot = sim.feet[side]
        if foot.landed:
            cmd[side] = foot.landed_cmd.copy()
            continue
        # airborne swing foot: plan value plus the decaying liftoff offset
        traj = plan.foot_traj(side)
        base = traj.value(plan_clock)
        base_vel = traj.velocity(plan_clock)
        u = elapsed / ph.duration
        s, ds_du = _blend(u)
        base = base + foot.liftoff_offset * (1.0 - s)
        base_vel = base_vel - foot.liftoff_offset * (ds_du / ph.duration)
        phi_des, alpha_des = float(base[4]), float(base[3])
        swing_base_z, swing_base_zvel = float(base[2]), float(base_vel[2])

        if sim.adaptation.replanned_z is not None:
            base[2] = sim.adaptation.replanned_z.value(t)[0]
        elif elapsed > ph.duration + 0.25 * dt:
            # planned motion exhausted without contact: creep down slowly
            if foot.creep_z is None:
                foot.creep_z = float(base[2])
            foot.creep_z -= ccfg.v_max_land * dt
            base[2] = foot.creep_z
        cmd[side] = base

    # -- IK and ankle corrections -------------------------------------------
    joints = np.empty((2, 6))
    corr_phi, corr_alpha = ctl.effective_corrections(sim.adaptation)
    if not ccfg.adaptation_enabled:
        corr_phi = corr_alpha = 0.0
    for j, side in enumerate(("left", "right")):
        q = _solve_leg(sim, pelvis, _pose_from6(cmd[side]), side, events)
        if q is None:
            return _fail_record(sim, t, ph, active, cmd, events)
        if side == sim.last_active:
            q = _apply_ankle_correction(sim, q, side, corr_phi, corr_alpha, events)
        joints[j] = q

    # commanded sole pose of the active foot after corrections
    leg = model.leg
    sign = 1.0 if active == "left" else -1.0
    pos_rel, rot_rel = kernels.fk_leg(
        joints[0 if active == "left" else 1], sign,
        leg.hip_offset_y, leg.thigh_length, leg.shank_length, leg.ankle_height)
    pel_rot = pelvis.matrix()
    cmd_active = np.empty(6)
    cmd_active[:3] = pelvis.position + pel_rot @ pos_rel
    rot_world = pel_rot @ rot_rel
    cmd_active[3:] = kernels.matrix_to_rpy(np.ascontiguousarray(rot_world))
    sim.feet[active].last_cmd = cmd_active.copy()

    # -- plant: deflection + contact ----------------------------------------
    foot = sim.feet[active]
    if foot.landed:
        true_active = foot.landed_true.copy()
    else:
        cmd_pose = _pose_from6(cmd_active)
        ext = swing_extension(pelvis, cmd_pose, model)
        true_pose = apply_deflection(cmd_pose, ph.kind, sim.deflection, model, ext)
        true_active = _resolve_contact(sim, t, ph, active, true_pose.as_array(), events)
    foot.last_true = true_active.copy()

    # -- sensing -------------------------------------------------------------
    reading = read_probes(_pose_from6(true_active), sim.terrain, model.foot,
                          timestamp=t, noise_amp=sim.sim_cfg.noise_amp,
                          rng=sim.rng)
    fb = aggregate(reading, model.foot)

    # -- controller updates ----------------------------------------------------
    if swing_side is not None and not foot.landed:
        if ccfg.adaptation_enabled:
            sim.adaptation = ctl.update_cumulative(
                sim.adaptation, (phi_des, alpha_des), fb, ccfg.leak)
        if ccfg.guard_enabled and not sim.adaptation.guard_triggered:
            gap_rate = 0.0
            if foot.prev_d_avg is not None:
                gap_rate = (fb.d_avg - foot.prev_d_avg) / dt
            new_state = ctl.landing_guard(
                sim.adaptation, fb, plan.foot_traj(swing_side), t,
                sim.phase_entered + ph.duration, model.foot.sensor_range,
                ccfg, dt, current_z=swing_base_z, current_zdot=swing_base_zvel,
                gap_rate=gap_rate)
            if new_state.guard_triggered:
                events.append("guard_trigger")
            sim.adaptation = new_state
        foot.prev_d_avg = fb.d_avg
    if ph.kind == PHASE_DS:
        window = ccfg.ds_reset_frac * plan.params.t_ds
        sim.adaptation = ctl.ds_reset(sim.adaptation, elapsed, window)

    foot.prev2_true_z = foot.prev_true_z
    foot.prev_true_z = float(true_active[2])

    phase_label = _end_of_tick_transitions(sim, t, ph, events)

    record = TraceRecord(
        t=t, phase=phase_label, joints=joints, cmd_sole=cmd_active,
        true_sole=true_active, probes=reading.distances.copy(),
        d_avg=fb.d_avg, phi_avg=fb.phi_avg, alpha_avg=fb.alpha_avg,
        phi_ce=sim.adaptation.phi_ce, alpha_ce=sim.adaptation.alpha_ce,
        zmp=np.zeros(2), event=";".join(events),
    )
    sim.k += 1
    return record


def _solve_leg(sim, pelvis, sole, side, events):
    leg = sim.model.leg
    rel = relative_pose(pelvis, sole)
    sign = 1.0 if side == "left" else -1.0
    q, status, shortfall = kernels.ik_leg(
        rel.position, rel.matrix(), sign, leg.hip_offset_y,
        leg.thigh_length, leg.shank_length, leg.ankle_height, 5e-4)
    if status != 0:
        sim.failed = True
        sim.done = True
        sim.failure_reason = (f"{side} leg IK infeasible at t={sim.t:.3f}s "
                              f"(shortfall {shortfall:.4f} m)")
        events.append("ik_failure")
        return None
    lo, hi = sim.model.leg_limits(side)
    if np.any(q < lo - 1e-9) or np.any(q > hi + 1e-9):
        idx = int(np.argmax((q < lo - 1e-9) | (q > hi + 1e-9)))
        sim.failed = True
        sim.done = True
        sim.failure_reason = (f"{side} leg joint {idx} limit violated "
                              f"at t={sim.t:.3f}s")
        events.append("limit_failure")
        return None
    return q


def _apply_ankle_correction(sim, q, side, corr_phi, corr_alpha, events):
    if corr_phi == 0.0 and corr_alpha == 0.0:
        return q
    q = q.copy()
    specs = sim.model.leg_joint_specs(side)
    for idx, corr in ((4, corr_phi), (5, corr_alpha)):
        value = q[idx] + corr
        lo, hi = specs[idx].range_min, specs[idx].range_max
        if value < lo or value > hi:
            events.append("ankle_clamp")
            value = min(max(value, lo), hi)
        q[idx] = value
    return q


#: A swing foot counts as airborne once every probe clears this gap (m).
LIFT_EPS = 1e-3


def _resolve_contact(sim, t, ph, side, true6, events):
    """Clamp the sole onto the terrain; record touchdown on descent.

    Touchdown requires the foot to have broken contact first (hysteresis):
    a sagging foot that drags along the ground right after liftoff scuffs
    without re-landing until it has been properly airborne.
    """
    foot = sim.feet[side]
    raw = raw_probe_gaps(_pose_from6(true6), sim.terrain, sim.model.foot)
    min_gap = float(np.min(raw))
    if not foot.has_lifted and min_gap > LIFT_EPS:
        foot.has_lifted = True
    descending = foot.prev_true_z is not None and true6[2] < foot.prev_true_z - 1e-15
    if min_gap <= CONTACT_EPS and descending and foot.has_lifted:
        true6 = true6.copy()
        if min_gap < 0.0:
            true6[2] -= min_gap
        _record_touchdown(sim, t, ph, side, true6, events)
    elif min_gap < 0.0:
        # still in ground contact (sagging liftoff): slide along the surface
        true6 = true6.copy()
        true6[2] -= min_gap
        events.append("scuff")
    return true6


def _record_touchdown(sim, t, ph, side, true6, events, speed=None):
    foot = sim.feet[side]
    dt = sim.plan.params.control_dt
    if speed is None:
        if foot.prev2_true_z is not None and foot.prev_true_z is not None:
            speed = max(0.0, (foot.prev2_true_z - foot.prev_true_z) / dt)
        else:
            speed = 0.0
    reading = read_probes(_pose_from6(true6), sim.terrain, sim.model.foot, t)
    fb = aggregate(reading, sim.model.foot)
    planned_touchdown = sim.phase_entered + ph.duration
    impact = StepImpact(
        index=len(sim.impacts), side=side, t_touchdown=t,
        impact_speed=float(speed),
        pitch_misalign=abs(fb.phi_avg), roll_misalign=abs(fb.alpha_avg),
        early_contact=bool(t < planned_touchdown - 0.5 * dt),
        guard_triggered=sim.adaptation.guard_triggered,
    )
    sim.impacts.append(impact)
    events.append("touchdown")
    if impact.impact_speed > sim.sim_cfg.severe_impact_speed:
        events.append("severe_impact")
    foot.landed = True
    foot.landed_true = true6.copy()
    foot.landed_cmd = foot.last_cmd.copy()
    foot.creep_z = None


def _try_hover_snap(sim, t, ph, side, events):
    """Plant a foot hovering within the settle band (no hard contact yet)."""
    foot = sim.feet[side]
    dt = sim.plan.params.control_dt
    true6 = foot.last_true.copy()
    raw = raw_probe_gaps(_pose_from6(true6), sim.terrain, sim.model.foot)
    gap = float(np.mean(np.clip(raw, 0.0, None)))
    zdot = 0.0
    if foot.prev2_true_z is not None:
        zdot = (foot.prev_true_z - foot.prev2_true_z) / dt
    ccfg = sim.controller_cfg
    if gap <= ccfg.settle_gap and abs(zdot) <= ccfg.settle_speed:
        true6[2] -= float(np.min(raw))
        _record_touchdown(sim, t, ph, side, true6, events, speed=abs(zdot))
        foot.prev_true_z = float(true6[2])
        return True
    return False


def _end_of_tick_transitions(sim, t, ph, events):
    """Advance the phase machine; returns the phase label for this tick.

    The settle tick of a swing is relabeled as the first double-support tick
    so that undisturbed runs reproduce the planned boundaries exactly.
    """
    plan = sim.plan
    dt = plan.params.control_dt
    ccfg = sim.controller_cfg
    label = ph.kind

    if ph.kind == PHASE_DS:
        ds_end = sim.phase_entered + ph.duration
        if t + dt + 0.25 * dt >= ds_end:
            if sim.phase_idx == len(plan.phases) - 1:
                if t + 0.25 * dt >= ds_end:
                    sim.done = True
                return label
            # DS -> SS at the next tick: release the swing foot.  The blend
            # offset is command-relative so the command stream stays
            # continuous; the plant truth follows through the deflection map.
            nxt = plan.phases[sim.phase_idx + 1]
            side = nxt.swing_side
            foot = sim.feet[side]
            plan_start = plan.foot_traj(side).value(nxt.t0)
            foot.liftoff_offset = foot.landed_cmd - plan_start
            foot.landed = False
            foot.has_lifted = False
            foot.creep_z = None
            foot.prev_d_avg = None
            foot.prev_true_z = float(foot.landed_true[2])
            foot.prev2_true_z = float(foot.landed_true[2])
            sim.adaptation = ctl.enter_ss(sim.adaptation, side)
            sim.last_active = side
            sim.phase_idx += 1
            sim.phase_entered = ds_end
        return label

    # single support
    side = ph.swing_side
    foot = sim.feet[side]
    planned_end = sim.phase_entered + ph.duration
    replanned = sim.adaptation.replanned_z
    replanned_done = replanned is None or t + 1e-9 >= replanned.end_time
    due = t + 0.25 * dt >= planned_end and replanned_done
    if not foot.landed and due:
        _try_hover_snap(sim, t, ph, side, events)
    if foot.landed and due:
        # touchdown/boundary tick belongs to the following double support
        on_time = t <= planned_end + 0.25 * dt
        sim.adaptation = ctl.enter_ds(sim.adaptation)
        sim.phase_idx += 1
        sim.phase_entered = planned_end if on_time else t
        events.append("phase:ds")
        return PHASE_DS
    if t - planned_end > ccfg.max_extension:
        sim.failed = True
        sim.done = True
        sim.failure_reason = (f"settled contact not reached within "
                              f"{ccfg.max_extension}s extension of {ph.kind}")
        events.append("step_failure")
    return label


def run_episode(plan: GaitPlan, model: RobotModel, terrain: TerrainMap = None,
                deflection: DeflectionModel = None,
                controller_cfg: ctl.ControllerConfig = None,
                sim_cfg: SimConfig = None, seed: int = 0) -> SimTrace:
    """Run the plan to completion (or failure) and return the full trace.

    Bit-identical across runs with equal seeds.
    """
    terrain = terrain if terrain is not None else TerrainMap.flat()
    deflection = deflection if deflection is not None else DeflectionModel.off()
    controller_cfg = controller_cfg or ctl.ControllerConfig()
    sim_cfg = sim_cfg or SimConfig()
    rng = np.random.default_rng(seed)
    sim = SimState(plan=plan, model=model, terrain=terrain, deflection=deflection,
                   controller_cfg=controller_cfg, sim_cfg=sim_cfg, rng=rng)

    dt = plan.params.control_dt
    n_swings = len(plan.swing_phases())
    max_ticks = int(round((plan.duration + n_swings * controller_cfg.max_extension)
                          / dt)) + 8
    records = []
    try:
        while not sim.done and sim.k <= max_ticks:
            rec = step(sim)
            if rec is None:
                break
            records.append(rec)
    except ProbewalkError as exc:
        sim.failed = True
        sim.failure_reason = str(exc)
    if not sim.done and not sim.failed:
        sim.failed = True
        sim.failure_reason = "episode exceeded maximum tick budget"

    _fill_zmp(sim, records)
    impacts = list(sim.impacts)
    max_speed = max((s.impact_speed for s in impacts), default=0.0)
    hard = max_speed > sim_cfg.severe_impact_speed
    if hard and not sim.failure_reason:
        sim.failure_reason = (f"severe collision: impact speed {max_speed:.3f} m/s "
                              f"exceeds {sim_cfg.severe_impact_speed} m/s")
    metrics = ImpactMetrics(
        steps=impacts,
        success=bool(sim.done and not sim.failed and not hard),
        max_impact_speed=float(max_speed),
        steps_completed=len(impacts),
        failure_reason=sim.failure_reason,
    )
    return SimTrace(records=records, metrics=metrics, dt=dt, plan=plan)


def _fail_record(sim, t, ph, active, cmd, events):
    sim.done = True
    arr = cmd.get(active)
    arr = arr if arr is not None else np.zeros(6)
    return TraceRecord(
        t=t, phase=ph.kind, joints=np.zeros((2, 6)), cmd_sole=arr,
        true_sole=arr.copy(), probes=np.zeros(4), d_avg=0.0, phi_avg=0.0,
        alpha_avg=0.0, phi_ce=sim.adaptation.phi_ce,
        alpha_ce=sim.adaptation.alpha_ce, zmp=np.zeros(2),
        event=";".join(events) or "failure",
    )


def _fill_zmp(sim, records):
    """Compute the executed multi-link ZMP from the recorded motion."""
    if len(records) < 3:
        return
    model = sim.model
    leg = model.leg
    n = len(records)
    link_pos = np.empty((n, 7, 3))
    for i, rec in enumerate(records):
        pel6 = sim.pelvis_log[i]
        pel_pos = pel6[:3]
        pel_rot = kernels.rpy_to_matrix(pel6[3], pel6[4], pel6[5])
        link_pos[i, 0] = pel_pos + pel_rot @ np.array(
            [0.0, 0.0, model.pelvis_com_offset_z])
        for j, sign in ((0, 1.0), (1, -1.0)):
            pts, r_sole = kernels.leg_chain_points(
                rec.joints[j], sign, leg.hip_offset_y, leg.thigh_length,
                leg.shank_length, leg.ankle_height)
            hip, knee, ankle = pts[0], pts[1], pts[2]
            link_pos[i, 1 + j] = pel_pos + pel_rot @ ((hip + knee) / 2.0)
            link_pos[i, 3 + j] = pel_pos + pel_rot @ ((knee + ankle) / 2.0)
            link_pos[i, 5 + j] = pel_pos + pel_rot @ (
                ankle - (leg.ankle_height / 2.0) * r_sole[:, 2])
    masses = np.array([m for m, *_ in _link_table(model)])
    try:
        zmp = compute_zmp(link_pos, masses, sim.plan.params.control_dt)
    except DynamicInfeasibilityError:
        # failure-path records can hold discontinuous joints; leave zeros
        return
    for rec, z in zip(records, zmp):
        rec.zmp = z
