"""Swing-foot adaptation: cumulative ankle-angle corrections, the early-
touchdown landing guard, and the SS/DS phase machine with DS-phase reset.

The cumulative controller integrates desired-minus-measured relative ankle
angles each tick,

    phi_ce(k+1)   = phi_ce(k)   + [phi_des(k+1)   - phi_avg(k+1)]
    alpha_ce(k+1) = alpha_ce(k) + [alpha_des(k+1) - alpha_avg(k+1)]

and adds them to the commanded ankle pitch/roll.  The landing guard watches
the average probe gap: when it reaches 20 % of the sensing range while the
*planned* trajectory still expects substantially more clearance (an early
contact), the vertical swing motion is replaced by a braking + slow-descent
spline that reaches the sensed contact height with zero velocity.  During
the first part of each double support the accumulated corrections ramp back
to exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ControllerFaultError
from .gait import PHASE_DS, ss_phase
from .polynomial import (
    PiecewisePolynomial,
    SegmentBuilder,
    cubic_coefficients,
    quintic_coefficients,
)


@dataclass(frozen=True)
class ControllerConfig:
    """Tunables for the adaptation pipeline (defaults follow the design)."""

    guard_threshold_frac: float = 0.20   # fraction of sensor_range
    guard_plan_slack: float = 0.002      # planned gap must exceed thr by this (m)
    guard_predict_ticks: float = 1.0     # lead on the measured gap closure rate
    v_max_land: float = 0.02             # lay-down peak descent speed cap (m/s)
    min_descent_ticks: int = 5
    brake_ticks: int = 2                 # max braking-arc length, in ticks
    hold_duration: float = 0.0           # optional pause after braking (s)
    ds_reset_frac: float = 0.30          # fraction of t_ds used for the reset ramp
    settle_gap: float = 5e-4             # settled-contact gap epsilon (m)
    settle_speed: float = 0.01           # settled-contact |zdot| bound (m/s)
    max_extension: float = 1.0           # allowed SS overrun waiting for contact (s)
    leak: float = 0.0                    # optional cumulative leak, 0 = pure sum
    adaptation_enabled: bool = True
    guard_enabled: bool = True

    def guard_threshold(self, sensor_range):
        return self.guard_threshold_frac * sensor_range


@dataclass(frozen=True)
class AdaptationState:
    """Controller state; new instances are returned by every update."""

    phi_ce: float = 0.0
    alpha_ce: float = 0.0
    guard_triggered: bool = False
    guard_trigger_time: float = None
    replanned_z: PiecewisePolynomial = None
    phase: str = PHASE_DS
    ds_reset_progress: float = 1.0
    ds_entry_phi: float = 0.0
    ds_entry_alpha: float = 0.0


@dataclass(frozen=True)
class AnkleCommand:
    """Ankle-level inputs after adding corrections; z_override replaces the
    planned swing-foot height when the landing guard is active."""

    pitch_input: float
    roll_input: float
    z_override: float = None


def update_cumulative(state: AdaptationState, desired, feedback,
                      leak: float = 0.0) -> AdaptationState:
    """One tick of the cumulative recurrences.

    ``desired`` is (phi_des, alpha_des): the planned sole pitch/roll relative
    to the believed (flat) ground.  Skipped unless the phase is single
    support and all probes are in range; saturated readings are never
    integrated.
    """
    if state.phase == PHASE_DS:
        return state
    if not feedback.all_in_range:
        return state
    phi_des, alpha_des = desired
    if not (math.isfinite(phi_des) and math.isfinite(alpha_des)
            and math.isfinite(feedback.phi_avg) and math.isfinite(feedback.alpha_avg)):
        raise ControllerFaultError("non-finite controller input")
    keep = 1.0 - leak
    return replace(
        state,
        phi_ce=keep * state.phi_ce + (phi_des - feedback.phi_avg),
        alpha_ce=keep * state.alpha_ce + (alpha_des - feedback.alpha_avg),
    )


def effective_corrections(state: AdaptationState):
    """Corrections to apply this tick; ramped residuals during DS."""
    if state.phase == PHASE_DS:
        scale = 1.0 - min(state.ds_reset_progress, 1.0)
        return state.ds_entry_phi * scale, state.ds_entry_alpha * scale
    return state.phi_ce, state.alpha_ce


def ankle_command(state: AdaptationState, desired, z_override=None) -> AnkleCommand:
    """Commanded ankle pitch/roll: desired plus the active corrections."""
    phi_des, alpha_des = desired
    phi_corr, alpha_corr = effective_corrections(state)
    return AnkleCommand(
        pitch_input=phi_des + phi_corr,
        roll_input=alpha_des + alpha_corr,
        z_override=z_override,
    )


def ds_reset(state: AdaptationState, ds_elapsed: float,
             ds_reset_window: float) -> AdaptationState:
    """Linear ramp-down of the corrections during early double support.

    At and after ``ds_reset_window`` the residuals are exactly zero.
    """
    if state.phase != PHASE_DS:
        return state
    progress = 1.0 if ds_elapsed >= ds_reset_window else ds_elapsed / ds_reset_window
    scale = 1.0 - min(progress, 1.0)
    return replace(
        state,
        ds_reset_progress=progress,
        phi_ce=state.ds_entry_phi * scale,
        alpha_ce=state.ds_entry_alpha * scale,
    )


# ---------------------------------------------------------------------------
# landing guard
# ---------------------------------------------------------------------------


def build_touchdown_spline(t0, z0, v0, gap, remaining, config: ControllerConfig,
                           dt: float) -> PiecewisePolynomial:
    """Replacement vertical trajectory from the trigger point to contact.

    C1 at the splice (matches z0, v0), monotone non-increasing, and reaches
    ``z0 - gap`` with zero velocity and acceleration.  A fast approach gets a
    short braking arc first; the remainder is laid down over the remaining
    planned swing time (extended when that is too short).
    """
    builder = SegmentBuilder(1, t0=t0)
    target = z0 - gap
    min_time = config.min_descent_ticks * dt

    if remaining < dt:
        # degenerate: essentially no planned time left; set down at the cap
        duration = max(gap / config.v_max_land, 2 * dt)
        builder.add(duration, cubic_coefficients(duration, z0, min(v0, 0.0), target, 0.0)[None, :])
        return builder.build()

    total = remaining if remaining >= min_time else max(min_time, gap / config.v_max_land)

    z = z0
    if v0 < -config.v_max_land:
        # hard stop: a short cubic arc using at most half the sensed gap
        t_brake = max(dt, min(config.brake_ticks * dt, gap / (-v0), 0.5 * total))
        drop = -v0 * t_brake / 2.0
        builder.add(t_brake, cubic_coefficients(t_brake, z, v0, z - drop, 0.0)[None, :])
        z -= drop
        total = max(total - t_brake, min_time)
        v0 = 0.0
    if config.hold_duration > 0.0:
        builder.add_constant(config.hold_duration, [z])

    span = z - target
    if v0 < 0.0:
        # slow approach: single monotone cubic (secant-slope ratio kept <= 3)
        limit = 2.9 * span / (-v0) if span > 0 else total
        duration = max(min(total, limit), 2 * dt)
        builder.add(duration, cubic_coefficients(duration, z, v0, target, 0.0)[None, :])
    else:
        # lay down with zero end velocity; cap the quintic's peak speed
        duration = max(total, 2 * dt, 1.875 * max(span, 0.0) / config.v_max_land)
        builder.add(duration, quintic_coefficients(duration, z, 0.0, 0.0, target, 0.0, 0.0)[None, :])
    return builder.build()


def landing_guard(state: AdaptationState, feedback, planned_z: PiecewisePolynomial,
                  t: float, t_touchdown_planned: float, sensor_range: float,
                  config: ControllerConfig, dt: float,
                  current_z: float = None, current_zdot: float = None,
                  gap_rate: float = 0.0,
                  believed_ground: float = 0.0) -> AdaptationState:
    """Arm the early-touchdown guard when contact comes sooner than planned.

    Trigger condition: single support, not yet latched, measured average gap
    at or below the threshold (20 % of the sensing range) while the planned
    trajectory still expects ``guard_plan_slack`` more clearance and is
    descending, before the planned touchdown.  ``gap_rate`` (the measured
    closure speed, negative while approaching) extends the check to the gap
    predicted one actuation cycle ahead, since a 200 Hz loop can only take
    effect on the next tick.  A triggered guard freezes the current vertical
    state and splices in :func:`build_touchdown_spline`; re-triggering within
    the same swing is ignored (latch).
    """
    if not config.guard_enabled or state.phase == PHASE_DS or state.guard_triggered:
        return state
    threshold = config.guard_threshold(sensor_range)
    lookahead = min(gap_rate, 0.0) * config.guard_predict_ticks * dt
    predicted_gap = feedback.d_avg + lookahead
    if predicted_gap > threshold:
        return state
    z0 = planned_z.value(t)[0] if current_z is None else current_z
    v0 = planned_z.velocity(t)[0] if current_zdot is None else current_zdot
    planned_gap = z0 - believed_ground
    if planned_gap < threshold + config.guard_plan_slack:
        return state
    if v0 >= 0.0:
        return state
    if t >= t_touchdown_planned:
        return state
    spline = build_touchdown_spline(
        t, z0, v0, feedback.d_avg, t_touchdown_planned - t, config, dt)
    return replace(state, guard_triggered=True, guard_trigger_time=t,
                   replanned_z=spline)


# ---------------------------------------------------------------------------
# phase machine
# ---------------------------------------------------------------------------


def enter_ss(state: AdaptationState, side: str) -> AdaptationState:
    """Single-support entry clears the cumulative terms and the guard latch."""
    return AdaptationState(phase=ss_phase(side))


def enter_ds(state: AdaptationState) -> AdaptationState:
    """Double-support entry snapshots the corrections for the reset ramp."""
    return replace(
        state,
        phase=PHASE_DS,
        ds_reset_progress=0.0,
        ds_entry_phi=state.phi_ce,
        ds_entry_alpha=state.alpha_ce,
        guard_triggered=False,
        guard_trigger_time=None,
        replanned_z=None,
    )


def ss_complete(state: AdaptationState, t: float, phase_t0: float,
                planned_duration: float, settled: bool) -> bool:
    """Whether single support may hand over to double support.

    The planned duration must have elapsed, any replanned descent must have
    run to its end, and the swing foot must be in settled contact.
    """
    if t + 1e-12 < phase_t0 + planned_duration:
        return False
    if state.replanned_z is not None and t + 1e-12 < state.replanned_z.end_time:
        return False
    return settled
