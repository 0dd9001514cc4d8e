"""Structural-deflection disturbance on the swing foot.

Cheap manufacturing leaves the swing leg acting like a loaded cantilever:
the foot sags and tilts away from its commanded pose by several centimeters
of tip error.  The model splits a tip-error budget ``E`` into a vertical
drop and pitch/roll biases:

    z drop        = z_sag_gain * E
    pitch offset  = pitch_bias_gain * E / L_leg
    roll offset   = roll_bias_gain  * E / L_leg

so each angular term displaces the foot by ``gain * E`` at the leg's lever
arm and the gain budget (summing to <= 1) allocates the total tip error.
The effect applies to the swing foot during single support only; it
vanishes in double support when the foot takes load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gait import PHASE_DS
from .kinematics import Pose
from .model import RobotModel

MODE_OFF = "off"
MODE_CONSTANT = "constant"
MODE_LOAD_PROPORTIONAL = "load_proportional"
MODES = (MODE_OFF, MODE_CONSTANT, MODE_LOAD_PROPORTIONAL)


@dataclass(frozen=True)
class DeflectionModel:
    mode: str = MODE_OFF
    tip_error_max: float = 0.07
    z_sag_gain: float = 0.5
    pitch_bias_gain: float = 0.3
    roll_bias_gain: float = 0.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown deflection mode {self.mode!r}")
        if self.tip_error_max < 0:
            raise ConfigError("tip_error_max must be >= 0")
        gains = (self.z_sag_gain, self.pitch_bias_gain, self.roll_bias_gain)
        if any(g < 0 for g in gains):
            raise ConfigError("deflection gains must be >= 0")
        if sum(gains) > 1.0 + 1e-9:
            raise ConfigError("deflection gains must sum to at most 1")

    @classmethod
    def off(cls):
        return cls(mode=MODE_OFF)

    def tip_error(self, extension: float = 1.0) -> float:
        """Effective tip-error magnitude E for the current leg extension."""
        if self.mode == MODE_OFF:
            return 0.0
        if self.mode == MODE_CONSTANT:
            return self.tip_error_max
        return self.tip_error_max * min(max(extension, 0.0), 1.0)


def apply_deflection(commanded_sole: Pose, phase: str, dm: DeflectionModel,
                     model: RobotModel, extension: float = 1.0) -> Pose:
    """True sole pose under the disturbance.

    Identity during double support and in ``off`` mode.  ``extension`` is
    the normalized hip-to-ankle stretch of the swing leg (only used by the
    ``load_proportional`` mode).
    """
    if dm.mode == MODE_OFF or phase == PHASE_DS:
        return commanded_sole
    e = dm.tip_error(extension)
    if e == 0.0:
        return commanded_sole
    l_leg = model.leg.reach
    pos = commanded_sole.position.copy()
    rpy = commanded_sole.rpy.copy()
    pos[2] -= dm.z_sag_gain * e
    rpy[1] += dm.pitch_bias_gain * e / l_leg
    rpy[0] += dm.roll_bias_gain * e / l_leg
    return Pose(pos, rpy)


def tip_displacement(dm: DeflectionModel, model: RobotModel,
                     extension: float = 1.0) -> float:
    """Total foot tip displacement implied by the gain decomposition.

    Vertical sag plus each angular bias times the leg lever; with the
    default gains this reproduces the full tip-error budget.
    """
    e = dm.tip_error(extension)
    l_leg = model.leg.reach
    return (dm.z_sag_gain * e
            + (dm.pitch_bias_gain * e / l_leg) * l_leg
            + (dm.roll_bias_gain * e / l_leg) * l_leg)


def swing_extension(pelvis: Pose, sole: Pose, model: RobotModel) -> float:
    """Normalized hip-to-ankle distance of a swing leg, in [0, 1]."""
    side = 1.0 if sole.position[1] >= pelvis.position[1] else -1.0
    rot = pelvis.matrix()
    hip = pelvis.position + rot @ np.array([0.0, side * model.leg.hip_offset_y, 0.0])
    ankle = sole.position + sole.matrix() @ np.array([0.0, 0.0, model.leg.ankle_height])
    return float(np.linalg.norm(ankle - hip) / model.leg.reach)
