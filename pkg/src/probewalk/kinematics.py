"""Forward/inverse leg kinematics and whole-robot center of mass.

Pose orientation convention: (roll, pitch, yaw) applied Z-Y-X intrinsic,
``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.  Pitch and roll are therefore the
independent small-tilt channels the ankle controller manipulates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import JointLimitError, OracleFailure, WorkspaceError
from .model import LEG_JOINT_ORDER, RobotModel

#: Targets closer than this to the straight-knee singularity are rejected.
WORKSPACE_MARGIN = 5e-4


def _freeze(arr):
    arr = np.asarray(arr, dtype=float).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pose:
    """Rigid-body pose: position (m) and (roll, pitch, yaw) in radians."""

    position: np.ndarray
    rpy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(self.position))
        object.__setattr__(self, "rpy", _freeze(self.rpy))

    @classmethod
    def from_xyz_rpy(cls, x=0.0, y=0.0, z=0.0, roll=0.0, pitch=0.0, yaw=0.0):
        return cls(np.array([x, y, z]), np.array([roll, pitch, yaw]))

    @classmethod
    def identity(cls):
        return cls.from_xyz_rpy()

    @classmethod
    def from_matrix(cls, position, rot):
        roll, pitch, yaw = kernels.matrix_to_rpy(np.ascontiguousarray(rot, dtype=float))
        return cls(np.asarray(position, dtype=float), np.array([roll, pitch, yaw]))

    def matrix(self):
        return kernels.rpy_to_matrix(self.rpy[0], self.rpy[1], self.rpy[2])

    def as_array(self):
        """(x, y, z, roll, pitch, yaw) as a 6-vector."""
        return np.concatenate([self.position, self.rpy])

    @property
    def roll(self):
        return float(self.rpy[0])

    @property
    def pitch(self):
        return float(self.rpy[1])

    @property
    def yaw(self):
        return float(self.rpy[2])

    def replace(self, position=None, rpy=None):
        return Pose(
            self.position if position is None else np.asarray(position, dtype=float),
            self.rpy if rpy is None else np.asarray(rpy, dtype=float),
        )


def relative_pose(base: Pose, target: Pose) -> Pose:
    """Pose of ``target`` expressed in the ``base`` frame."""
    rb = base.matrix()
    rt = target.matrix()
    pos = rb.T @ (target.position - base.position)
    return Pose.from_matrix(pos, rb.T @ rt)


def compose_pose(base: Pose, local: Pose) -> Pose:
    """World pose of ``local`` given in the ``base`` frame."""
    rb = base.matrix()
    return Pose.from_matrix(base.position + rb @ local.position, rb @ local.matrix())


@dataclass(frozen=True)
class LegJointVector:
    """Six leg joint angles, ordered proximal to distal, plus the side tag."""

    angles: np.ndarray
    side: str

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        if angles.shape != (6,):
            raise ValueError("LegJointVector needs exactly 6 angles")
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        object.__setattr__(self, "angles", _freeze(angles))

    @classmethod
    def zeros(cls, side):
        return cls(np.zeros(6), side)

    @property
    def side_sign(self):
        return 1.0 if self.side == "left" else -1.0

    def named(self):
        return dict(zip(LEG_JOINT_ORDER, self.angles))


def _side_sign(side):
    return 1.0 if side == "left" else -1.0


def check_limits(joints: LegJointVector, model: RobotModel):
    """Raise JointLimitError for the first out-of-range joint angle."""
    specs = model.leg_joint_specs(joints.side)
    for spec, angle in zip(specs, joints.angles):
        if not spec.contains(angle):
            raise JointLimitError(spec.name, float(angle), spec.range_min, spec.range_max)


def forward_leg(joints: LegJointVector, model: RobotModel, check: bool = True) -> Pose:
    """Sole pose in the pelvis frame for the given joint angles."""
    if check:
        check_limits(joints, model)
    leg = model.leg
    pos, rot = kernels.fk_leg(
        joints.angles, joints.side_sign,
        leg.hip_offset_y, leg.thigh_length, leg.shank_length, leg.ankle_height,
    )
    return Pose.from_matrix(pos, rot)


def inverse_leg(pelvis: Pose, sole: Pose, model: RobotModel, side: str,
                check: bool = True) -> LegJointVector:
    """Analytic IK: joint angles placing the sole at the requested pose.

    ``pelvis`` and ``sole`` may be in any common frame.  Raises
    WorkspaceError when the target is outside the reachable band and
    JointLimitError when the unique knee-forward solution violates a range.
    """
    rel = relative_pose(pelvis, sole)
    leg = model.leg
    q, status, shortfall = kernels.ik_leg(
        rel.position, rel.matrix(), _side_sign(side),
        leg.hip_offset_y, leg.thigh_length, leg.shank_length, leg.ankle_height,
        WORKSPACE_MARGIN,
    )
    if status == 1:
        raise WorkspaceError(shortfall, "target beyond leg reach")
    if status == 2:
        raise WorkspaceError(shortfall, "target under minimum leg reach")
    joints = LegJointVector(q, side)
    if check:
        check_limits(joints, model)
    return joints


def numeric_ik_oracle(pelvis: Pose, sole: Pose, model: RobotModel,
                      seed: LegJointVector, damping: float = 1e-3,
                      tol: float = 1e-11, max_iter: int = 300) -> LegJointVector:
    """Damped-least-squares IK; test-side cross-check for :func:`inverse_leg`.

    Independent of the closed-form solution: it iterates the geometric
    Jacobian from ``seed``.  Raises OracleFailure when it does not converge.
    """
    rel = relative_pose(pelvis, sole)
    leg = model.leg
    lo, hi = model.leg_limits(seed.side)
    q, converged, _ = kernels.dls_ik(
        rel.position, rel.matrix(), seed.angles.copy(), seed.side_sign,
        leg.hip_offset_y, leg.thigh_length, leg.shank_length, leg.ankle_height,
        lo, hi, damping, tol, max_iter,
    )
    if not converged:
        raise OracleFailure(f"DLS IK did not converge within {max_iter} iterations")
    return LegJointVector(q, seed.side)


def leg_jacobian(joints: LegJointVector, model: RobotModel) -> np.ndarray:
    """Geometric Jacobian (6x6) of the sole pose in the pelvis frame."""
    leg = model.leg
    return kernels.leg_jacobian(
        joints.angles, joints.side_sign,
        leg.hip_offset_y, leg.thigh_length, leg.shank_length, leg.ankle_height,
    )


def link_com_positions(left: LegJointVector, right: LegJointVector,
                       pelvis: Pose, model: RobotModel) -> np.ndarray:
    """World-frame CoM of the 7 lumped links, in LINK_NAMES order."""
    leg = model.leg
    rp = pelvis.matrix()
    out = np.empty((7, 3))
    out[0] = pelvis.position + rp @ np.array([0.0, 0.0, model.pelvis_com_offset_z])
    for idx, jv in ((0, left), (1, right)):
        pts, r_sole = kernels.leg_chain_points(
            jv.angles, jv.side_sign,
            leg.hip_offset_y, leg.thigh_length, leg.shank_length, leg.ankle_height,
        )
        hip, knee, ankle, sole = pts
        foot_com = ankle - (leg.ankle_height / 2.0) * r_sole[:, 2]
        out[1 + idx] = pelvis.position + rp @ ((hip + knee) / 2.0)
        out[3 + idx] = pelvis.position + rp @ ((knee + ankle) / 2.0)
        out[5 + idx] = pelvis.position + rp @ foot_com
    return out


def com_position(left: LegJointVector, right: LegJointVector,
                 pelvis: Pose, model: RobotModel) -> np.ndarray:
    """Mass-weighted whole-robot CoM in the world frame."""
    check_limits(left, model)
    check_limits(right, model)
    positions = link_com_positions(left, right, pelvis, model)
    masses = np.array([m for _, m in model.link_masses])
    return masses @ positions / model.total_mass
