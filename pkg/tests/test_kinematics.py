import math

import numpy as np
import pytest

from probewalk.errors import JointLimitError, OracleFailure, WorkspaceError
from probewalk.kinematics import (LegJointVector, Pose, com_position,
                                  forward_leg, inverse_leg, leg_jacobian,
                                  link_com_positions, numeric_ik_oracle)
from probewalk.model import load_model, default_model_text

# ---------------------------------------------------------------------------
# independent oracle: plain homogeneous-transform chain, coded separately
# from the kernels so the FK tests do not share their implementation
# ---------------------------------------------------------------------------


def _hom(rot, vec):
    out = np.eye(4)
    out[:3, :3] = rot
    out[:3, 3] = vec
    return out


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def oracle_fk(q, side, leg):
    """Sole pose via an explicit 4x4 transform chain."""
    sign = 1.0 if side == "left" else -1.0
    t = _hom(np.eye(3), [0.0, sign * leg.hip_offset_y, 0.0])
    t = t @ _hom(_rz(q[0]), np.zeros(3)) @ _hom(_rx(q[1]), np.zeros(3))
    t = t @ _hom(_ry(q[2]), np.zeros(3))
    t = t @ _hom(np.eye(3), [0, 0, -leg.thigh_length])
    t = t @ _hom(_ry(q[3]), np.zeros(3))
    t = t @ _hom(np.eye(3), [0, 0, -leg.shank_length])
    t = t @ _hom(_ry(q[4]), np.zeros(3)) @ _hom(_rx(q[5]), np.zeros(3))
    t = t @ _hom(np.eye(3), [0, 0, -leg.ankle_height])
    return t[:3, 3], t[:3, :3]


def sample_interior_joints(rng, model, side, n):
    lo, hi = model.leg_limits(side)
    qs = rng.uniform(lo, hi, size=(n, 6)) * 0.6
    qs[:, 3] = rng.uniform(0.15, 0.7 * hi[3], size=n)  # knee away from singularity
    return qs


def test_zero_configuration_pose(model):
    pose = forward_leg(LegJointVector.zeros("left"), model)
    leg = model.leg
    expected_z = -(leg.thigh_length + leg.shank_length + leg.ankle_height)
    assert pose.position == pytest.approx([0.0, leg.hip_offset_y, expected_z])
    assert pose.rpy == pytest.approx([0.0, 0.0, 0.0], abs=1e-15)


def test_knee_90_matches_transform_chain_oracle(model):
    q = np.array([0.0, 0.0, 0.0, math.pi / 2, 0.0, 0.0])
    pose = forward_leg(LegJointVector(q, "left"), model)
    opos, orot = oracle_fk(q, "left", model.leg)
    assert pose.position == pytest.approx(opos, abs=1e-12)
    assert pose.matrix() == pytest.approx(orot, abs=1e-12)
    # shank+foot swing backward: sole behind the hip at thigh depth
    leg = model.leg
    assert pose.position[2] == pytest.approx(-leg.thigh_length, abs=1e-12)
    assert pose.position[0] == pytest.approx(
        -(leg.shank_length + leg.ankle_height), abs=1e-12)


def test_fk_matches_oracle_randomized(model, rng):
    for side in ("left", "right"):
        for q in sample_interior_joints(rng, model, side, 200):
            pose = forward_leg(LegJointVector(q, side), model, check=False)
            opos, orot = oracle_fk(q, side, model.leg)
            assert np.allclose(pose.position, opos, atol=1e-12)
            assert np.allclose(pose.matrix(), orot, atol=1e-12)


def test_mirrored_joints_give_mirrored_poses(model, rng):
    for q in sample_interior_joints(rng, model, "left", 100):
        q[1] = abs(q[1]) * 0.4  # keep within both sides' roll ranges
        mirrored = q * np.array([-1, -1, 1, 1, 1, -1])
        pl = forward_leg(LegJointVector(q, "left"), model, check=False)
        pr = forward_leg(LegJointVector(mirrored, "right"), model, check=False)
        assert np.allclose(pl.position * [1, -1, 1], pr.position, atol=1e-12)
        assert np.allclose(pl.rpy * [-1, 1, -1], pr.rpy, atol=1e-12)


def test_limit_violation_names_joint(model):
    q = np.zeros(6)
    q[3] = -0.2  # knee below its 0..135 deg range
    with pytest.raises(JointLimitError, match="knee_pitch"):
        forward_leg(LegJointVector(q, "left"), model)


def test_ik_identity_at_zero(model):
    sole = forward_leg(LegJointVector.zeros("left"), model)
    joints = inverse_leg(Pose.identity(), sole, model, "left")
    assert np.allclose(joints.angles, 0.0, atol=1e-12)


def test_ik_raised_sole_bends_knee(model):
    leg = model.leg
    target = Pose.from_xyz_rpy(0.0, leg.hip_offset_y,
                               -(leg.reach + leg.ankle_height) + 0.05)
    joints = inverse_leg(Pose.identity(), target, model, "left")
    assert joints.angles[3] > 0.1
    again = forward_leg(joints, model, check=False)
    assert np.allclose(again.position, target.position, atol=1e-9)
    assert np.allclose(again.rpy, target.rpy, atol=1e-9)


def test_ik_beyond_reach_reports_shortfall(model):
    leg = model.leg
    target = Pose.from_xyz_rpy(0.0, leg.hip_offset_y,
                               -(leg.reach + leg.ankle_height) - 0.001)
    with pytest.raises(WorkspaceError) as info:
        inverse_leg(Pose.identity(), target, model, "left")
    assert info.value.shortfall > 0


def test_fk_ik_roundtrip_randomized(model, rng):
    worst_pos = worst_ang = 0.0
    for side in ("left", "right"):
        for q in sample_interior_joints(rng, model, side, 1000):
            pose = forward_leg(LegJointVector(q, side), model, check=False)
            sol = inverse_leg(Pose.identity(), pose, model, side, check=False)
            again = forward_leg(sol, model, check=False)
            worst_pos = max(worst_pos, float(np.max(np.abs(
                again.position - pose.position))))
            worst_ang = max(worst_ang, float(np.max(np.abs(
                again.rpy - pose.rpy))))
            # unique knee-forward branch: joints must match too
            assert np.allclose(sol.angles, q, atol=1e-9)
    assert worst_pos < 1e-9
    assert worst_ang < 1e-9


def test_ik_with_moving_pelvis(model, rng):
    pelvis = Pose.from_xyz_rpy(0.3, -0.05, 0.78, 0.02, -0.03, 0.1)
    for q in sample_interior_joints(rng, model, "right", 100):
        local = forward_leg(LegJointVector(q, "right"), model, check=False)
        world = Pose.from_matrix(
            pelvis.position + pelvis.matrix() @ local.position,
            pelvis.matrix() @ local.matrix())
        sol = inverse_leg(pelvis, world, model, "right", check=False)
        assert np.allclose(sol.angles, q, atol=1e-9)


def test_numeric_oracle_identity(model):
    sole = forward_leg(LegJointVector.zeros("left"), model)
    out = numeric_ik_oracle(Pose.identity(), sole, model,
                            LegJointVector.zeros("left"))
    assert np.allclose(out.angles, 0.0, atol=1e-9)


def test_numeric_oracle_unreachable_fails(model):
    leg = model.leg
    target = Pose.from_xyz_rpy(0.0, leg.hip_offset_y,
                               -(leg.reach + leg.ankle_height) - 0.05)
    with pytest.raises(OracleFailure):
        numeric_ik_oracle(Pose.identity(), target, model,
                          LegJointVector.zeros("left"))


def test_analytic_ik_agrees_with_oracle(model, rng):
    for side in ("left", "right"):
        for q in sample_interior_joints(rng, model, side, 100):
            pose = forward_leg(LegJointVector(q, side), model, check=False)
            sol = inverse_leg(Pose.identity(), pose, model, side, check=False)
            seed = LegJointVector(sol.angles + rng.normal(0, 0.15, 6), side)
            oracle = numeric_ik_oracle(Pose.identity(), pose, model, seed)
            assert np.allclose(oracle.angles, sol.angles, atol=1e-6)


def test_jacobian_matches_finite_differences(model, rng):
    eps = 1e-7
    for q in sample_interior_joints(rng, model, "left", 25):
        jv = LegJointVector(q, "left")
        jac = leg_jacobian(jv, model)
        base = forward_leg(jv, model, check=False)
        rb = base.matrix()
        for k in range(6):
            dq = q.copy()
            dq[k] += eps
            bumped = forward_leg(LegJointVector(dq, "left"), model, check=False)
            fd_lin = (bumped.position - base.position) / eps
            assert np.allclose(fd_lin, jac[:3, k], atol=1e-5)
            # angular part via the rotation increment
            dr = bumped.matrix() @ rb.T
            fd_ang = np.array([dr[2, 1] - dr[1, 2], dr[0, 2] - dr[2, 0],
                               dr[1, 0] - dr[0, 1]]) / (2 * eps)
            assert np.allclose(fd_ang, jac[3:, k], atol=1e-5)


# ---------------------------------------------------------------------------
# center of mass
# ---------------------------------------------------------------------------


def oracle_com(left_q, right_q, pelvis, model):
    """Brute-force mass-weighted sum using the oracle transform chain."""
    leg = model.leg
    masses = dict(model.link_masses)
    rp = pelvis.matrix()
    total = np.zeros(3)

    def chain_points(q, side):
        sign = 1.0 if side == "left" else -1.0
        hip = np.array([0.0, sign * leg.hip_offset_y, 0.0])
        r123 = _rz(q[0]) @ _rx(q[1]) @ _ry(q[2])
        knee = hip + r123 @ [0, 0, -leg.thigh_length]
        r1234 = r123 @ _ry(q[3])
        ankle = knee + r1234 @ [0, 0, -leg.shank_length]
        r_sole = r1234 @ _ry(q[4]) @ _rx(q[5])
        foot = ankle + r_sole @ [0, 0, -leg.ankle_height / 2.0]
        return hip, knee, ankle, foot

    total += masses["pelvis"] * (
        pelvis.position + rp @ [0, 0, model.pelvis_com_offset_z])
    for q, side in ((left_q, "left"), (right_q, "right")):
        hip, knee, ankle, foot = chain_points(q, side)
        total += masses[f"thigh_{side}"] * (pelvis.position + rp @ ((hip + knee) / 2))
        total += masses[f"shank_{side}"] * (pelvis.position + rp @ ((knee + ankle) / 2))
        total += masses[f"foot_{side}"] * (pelvis.position + rp @ foot)
    return total / model.total_mass


def test_com_on_sagittal_plane_for_symmetric_stance(model):
    pelvis = Pose.from_xyz_rpy(0.1, 0.02, 0.78)
    q = np.array([0.0, 0.0, -0.3, 0.6, -0.3, 0.0])
    mirrored = q * np.array([-1, -1, 1, 1, 1, -1])
    com = com_position(LegJointVector(q, "left"),
                       LegJointVector(mirrored, "right"), pelvis, model)
    assert com[1] == pytest.approx(pelvis.position[1], abs=1e-12)


def test_com_lumped_pelvis_degenerate_model(model):
    # all mass in the pelvis link: CoM must sit at the pelvis CoM offset
    text = default_model_text()
    text = text.replace("pelvis = 42.16", "pelvis = 68.0")
    text = text.replace("thigh = 6.8", "thigh = 1e-9")
    text = text.replace("shank = 3.74", "shank = 1e-9")
    text = text.replace("foot = 2.38", "foot = 1e-9")
    lumped = load_model(text)
    pelvis = Pose.from_xyz_rpy(0.2, -0.1, 0.8)
    com = com_position(LegJointVector.zeros("left"),
                       LegJointVector.zeros("right"), pelvis, lumped)
    expected = pelvis.position + np.array([0, 0, lumped.pelvis_com_offset_z])
    assert np.allclose(com, expected, atol=1e-9)


def test_com_asymmetric_squat_matches_bruteforce(model, rng):
    pelvis = Pose.from_xyz_rpy(0.05, 0.01, 0.74, 0.01, -0.02, 0.2)
    for _ in range(50):
        ql = sample_interior_joints(rng, model, "left", 1)[0]
        qr = sample_interior_joints(rng, model, "right", 1)[0]
        com = com_position(LegJointVector(ql, "left"),
                           LegJointVector(qr, "right"), pelvis, model)
        assert np.allclose(com, oracle_com(ql, qr, pelvis, model), atol=1e-12)


def test_com_continuity_in_joint_perturbations(model, rng):
    pelvis = Pose.from_xyz_rpy(0, 0, 0.78)
    q = np.array([0.05, 0.02, -0.4, 0.8, -0.4, 0.03])
    base = com_position(LegJointVector(q, "left"),
                        LegJointVector.zeros("right"), pelvis, model)
    # CoM shift is O(eps) with constant below the longest lever arm
    for eps in (1e-3, 1e-5):
        for k in range(6):
            dq = q.copy()
            dq[k] += eps
            moved = com_position(LegJointVector(dq, "left"),
                                 LegJointVector.zeros("right"), pelvis, model)
            assert np.linalg.norm(moved - base) < 1.0 * eps
