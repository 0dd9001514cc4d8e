"""Numeric kernels for the hot loops.

Everything here is numba-@njit compiled (see :mod:`probewalk.jit`) unless
``PROBEWALK_NO_JIT=1``, in which case the same source runs as plain NumPy.

Conventions used throughout the package:

* Pose orientation is (roll, pitch, yaw) applied Z-Y-X intrinsic, i.e.
  ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
* Leg joint order is (hip_yaw, hip_roll, hip_pitch, knee_pitch,
  ankle_pitch, ankle_roll), proximal to distal.  The three hip axes
  intersect at the hip point; the two ankle axes intersect at the ankle
  point; the sole frame sits ``ankle_height`` below the ankle along the
  foot z axis.
* ``side`` is +1.0 for the left leg, -1.0 for the right (hip offset along
  pelvis +y / -y).
"""

import numpy as np

from .jit import maybe_jit


@maybe_jit
def rot_x(a):
    c = np.cos(a)
    s = np.sin(a)
    out = np.empty((3, 3))
    out[0, 0] = 1.0
    out[0, 1] = 0.0
    out[0, 2] = 0.0
    out[1, 0] = 0.0
    out[1, 1] = c
    out[1, 2] = -s
    out[2, 0] = 0.0
    out[2, 1] = s
    out[2, 2] = c
    return out


@maybe_jit
def rot_y(a):
    c = np.cos(a)
    s = np.sin(a)
    out = np.empty((3, 3))
    out[0, 0] = c
    out[0, 1] = 0.0
    out[0, 2] = s
    out[1, 0] = 0.0
    out[1, 1] = 1.0
    out[1, 2] = 0.0
    out[2, 0] = -s
    out[2, 1] = 0.0
    out[2, 2] = c
    return out


@maybe_jit
def rot_z(a):
    c = np.cos(a)
    s = np.sin(a)
    out = np.empty((3, 3))
    out[0, 0] = c
    out[0, 1] = -s
    out[0, 2] = 0.0
    out[1, 0] = s
    out[1, 1] = c
    out[1, 2] = 0.0
    out[2, 0] = 0.0
    out[2, 1] = 0.0
    out[2, 2] = 1.0
    return out


@maybe_jit
def rpy_to_matrix(roll, pitch, yaw):
    """R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr = np.cos(roll)
    sr = np.sin(roll)
    cp = np.cos(pitch)
    sp = np.sin(pitch)
    cy = np.cos(yaw)
    sy = np.sin(yaw)
    out = np.empty((3, 3))
    out[0, 0] = cy * cp
    out[0, 1] = cy * sp * sr - sy * cr
    out[0, 2] = cy * sp * cr + sy * sr
    out[1, 0] = sy * cp
    out[1, 1] = sy * sp * sr + cy * cr
    out[1, 2] = sy * sp * cr - cy * sr
    out[2, 0] = -sp
    out[2, 1] = cp * sr
    out[2, 2] = cp * cr
    return out


@maybe_jit
def matrix_to_rpy(rot):
    """Inverse of :func:`rpy_to_matrix`; pitch restricted to (-pi/2, pi/2)."""
    sp = -rot[2, 0]
    if sp > 1.0:
        sp = 1.0
    if sp < -1.0:
        sp = -1.0
    pitch = np.arcsin(sp)
    roll = np.arctan2(rot[2, 1], rot[2, 2])
    yaw = np.arctan2(rot[1, 0], rot[0, 0])
    return roll, pitch, yaw


@maybe_jit
def rotation_vector(rot):
    """Axis-angle (log map) of a rotation matrix, as a 3-vector."""
    tr = rot[0, 0] + rot[1, 1] + rot[2, 2]
    c = 0.5 * (tr - 1.0)
    if c > 1.0:
        c = 1.0
    if c < -1.0:
        c = -1.0
    angle = np.arccos(c)
    v = np.empty(3)
    v[0] = rot[2, 1] - rot[1, 2]
    v[1] = rot[0, 2] - rot[2, 0]
    v[2] = rot[1, 0] - rot[0, 1]
    s = np.sin(angle)
    if angle < 1e-9:
        # first-order: v = 2 sin(angle) * axis ~= 2 * rotvec
        return 0.5 * v
    if s < 1e-9:
        # near pi; fall back to the diagonal form
        ax = np.sqrt(max(0.0, 0.5 * (rot[0, 0] + 1.0)))
        ay = np.sqrt(max(0.0, 0.5 * (rot[1, 1] + 1.0)))
        az = np.sqrt(max(0.0, 0.5 * (rot[2, 2] + 1.0)))
        if v[0] < 0.0:
            ax = -ax
        if v[1] < 0.0:
            ay = -ay
        if v[2] < 0.0:
            az = -az
        out = np.empty(3)
        out[0] = angle * ax
        out[1] = angle * ay
        out[2] = angle * az
        return out
    return (0.5 * angle / s) * v


# ---------------------------------------------------------------------------
# leg chain
# ---------------------------------------------------------------------------


@maybe_jit
def leg_chain_points(q, side, hip_y, thigh, shank, ankle_h):
    """World-frame-free chain points in the pelvis frame.

    Returns (points, sole_rot) where points rows are hip, knee, ankle, sole.
    """
    r_hip = rot_z(q[0]) @ rot_x(q[1]) @ rot_y(q[2])
    r_knee = r_hip @ rot_y(q[3])
    r_sole = r_knee @ rot_y(q[4]) @ rot_x(q[5])

    pts = np.empty((4, 3))
    pts[0, 0] = 0.0
    pts[0, 1] = side * hip_y
    pts[0, 2] = 0.0
    for i in range(3):
        pts[1, i] = pts[0, i] - thigh * r_hip[i, 2]
        pts[2, i] = pts[1, i] - shank * r_knee[i, 2]
        pts[3, i] = pts[2, i] - ankle_h * r_sole[i, 2]
    return pts, r_sole


@maybe_jit
def fk_leg(q, side, hip_y, thigh, shank, ankle_h):
    """Sole pose (position, rotation) in the pelvis frame."""
    pts, r_sole = leg_chain_points(q, side, hip_y, thigh, shank, ankle_h)
    pos = np.empty(3)
    pos[0] = pts[3, 0]
    pos[1] = pts[3, 1]
    pos[2] = pts[3, 2]
    return pos, r_sole


@maybe_jit
def ik_leg(rel_pos, rel_rot, side, hip_y, thigh, shank, ankle_h, margin):
    """Closed-form leg IK for the sole pose given in the pelvis frame.

    Returns ``(q, status, shortfall)``; status 0 = ok, 1 = beyond reach,
    2 = under minimum reach.  ``shortfall`` is the offending distance in m.
    The knee-forward branch (knee_pitch >= 0) is always selected.  Targets
    within ``margin`` of singular full extension are rejected, except the
    exactly-straight pose itself (within float noise), which solves to a
    zero knee.
    """
    q = np.zeros(6)
    p_ankle = np.empty(3)
    for i in range(3):
        p_ankle[i] = rel_pos[i] + ankle_h * rel_rot[i, 2]
    d = np.empty(3)
    d[0] = 0.0 - p_ankle[0]
    d[1] = side * hip_y - p_ankle[1]
    d[2] = 0.0 - p_ankle[2]
    # hip position seen from the foot frame
    r = rel_rot.T @ d
    c = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    full = thigh + shank
    reach = full - margin
    if c > reach and abs(c - full) > 1e-9:
        return q, 1, c - reach
    min_reach = abs(thigh - shank) + margin
    if c < min_reach:
        return q, 2, min_reach - c

    cos_knee = (c * c - thigh * thigh - shank * shank) / (2.0 * thigh * shank)
    if cos_knee > 1.0:
        cos_knee = 1.0
    if cos_knee < -1.0:
        cos_knee = -1.0
    knee = np.arccos(cos_knee)
    q[3] = knee
    q[5] = np.arctan2(r[1], r[2])
    rho = np.sqrt(r[1] * r[1] + r[2] * r[2])
    gamma = np.arctan2(thigh * np.sin(knee), shank + thigh * np.cos(knee))
    q[4] = np.arctan2(-r[0], rho) - gamma

    # remaining orientation belongs to the hip:  Rz(q0) Rx(q1) Ry(q2)
    r_hip = rel_rot @ rot_x(-q[5]) @ rot_y(-(q[3] + q[4]))
    s1 = r_hip[2, 1]
    if s1 > 1.0:
        s1 = 1.0
    if s1 < -1.0:
        s1 = -1.0
    q[1] = np.arcsin(s1)
    q[0] = np.arctan2(-r_hip[0, 1], r_hip[1, 1])
    q[2] = np.arctan2(-r_hip[2, 0], r_hip[2, 2])
    return q, 0, 0.0


@maybe_jit
def leg_jacobian(q, side, hip_y, thigh, shank, ankle_h):
    """Geometric Jacobian of the sole pose in the pelvis frame (6x6).

    Rows 0-2: linear velocity, rows 3-5: angular velocity.
    """
    r1 = rot_z(q[0])
    r12 = r1 @ rot_x(q[1])
    r123 = r12 @ rot_y(q[2])
    r1234 = r123 @ rot_y(q[3])
    r12345 = r1234 @ rot_y(q[4])
    r_sole = r12345 @ rot_x(q[5])

    p_hip = np.empty(3)
    p_hip[0] = 0.0
    p_hip[1] = side * hip_y
    p_hip[2] = 0.0
    p_knee = np.empty(3)
    p_ankle = np.empty(3)
    p_sole = np.empty(3)
    for i in range(3):
        p_knee[i] = p_hip[i] - thigh * r123[i, 2]
        p_ankle[i] = p_knee[i] - shank * r1234[i, 2]
        p_sole[i] = p_ankle[i] - ankle_h * r_sole[i, 2]

    axes = np.empty((6, 3))
    origins = np.empty((6, 3))
    for i in range(3):
        axes[0, i] = 1.0 if i == 2 else 0.0   # hip yaw: pelvis z
        axes[1, i] = r1[i, 0]                 # hip roll: x after yaw
        axes[2, i] = r12[i, 1]                # hip pitch: y after yaw,roll
        axes[3, i] = r123[i, 1]               # knee pitch
        axes[4, i] = r1234[i, 1]              # ankle pitch
        axes[5, i] = r12345[i, 0]             # ankle roll
        origins[0, i] = p_hip[i]
        origins[1, i] = p_hip[i]
        origins[2, i] = p_hip[i]
        origins[3, i] = p_knee[i]
        origins[4, i] = p_ankle[i]
        origins[5, i] = p_ankle[i]

    jac = np.empty((6, 6))
    for j in range(6):
        rx = p_sole[0] - origins[j, 0]
        ry = p_sole[1] - origins[j, 1]
        rz = p_sole[2] - origins[j, 2]
        ax = axes[j, 0]
        ay = axes[j, 1]
        az = axes[j, 2]
        jac[0, j] = ay * rz - az * ry
        jac[1, j] = az * rx - ax * rz
        jac[2, j] = ax * ry - ay * rx
        jac[3, j] = ax
        jac[4, j] = ay
        jac[5, j] = az
    return jac


@maybe_jit
def dls_ik(rel_pos, rel_rot, seed, side, hip_y, thigh, shank, ankle_h,
           q_min, q_max, damping, tol, max_iter):
    """Damped-least-squares IK used as the independent verification oracle.

    Iterates q += (J'J + damping^2 I)^-1 J' e with joint clamping; returns
    ``(q, converged, iterations)``.
    """
    q = seed.copy()
    eye = np.eye(6) * (damping * damping)
    for it in range(max_iter):
        pos, rot = fk_leg(q, side, hip_y, thigh, shank, ankle_h)
        e = np.empty(6)
        e[0] = rel_pos[0] - pos[0]
        e[1] = rel_pos[1] - pos[1]
        e[2] = rel_pos[2] - pos[2]
        ev = rotation_vector(rel_rot @ rot.T)
        e[3] = ev[0]
        e[4] = ev[1]
        e[5] = ev[2]
        err = 0.0
        for i in range(6):
            err += e[i] * e[i]
        if np.sqrt(err) < tol:
            return q, True, it
        jac = leg_jacobian(q, side, hip_y, thigh, shank, ankle_h)
        h = jac.T @ jac + eye
        dq = np.linalg.solve(h, jac.T @ e)
        for i in range(6):
            q[i] = q[i] + dq[i]
            if q[i] < q_min[i]:
                q[i] = q_min[i]
            if q[i] > q_max[i]:
                q[i] = q_max[i]
    return q, False, max_iter


# ---------------------------------------------------------------------------
# piecewise polynomials
# ---------------------------------------------------------------------------


@maybe_jit
def poly_eval(coeffs, tau, deriv):
    """Evaluate a power-basis polynomial or its 1st/2nd derivative at tau."""
    n = coeffs.shape[0]
    acc = 0.0
    if deriv == 0:
        for i in range(n - 1, -1, -1):
            acc = acc * tau + coeffs[i]
    elif deriv == 1:
        for i in range(n - 1, 0, -1):
            acc = acc * tau + i * coeffs[i]
    else:
        for i in range(n - 1, 1, -1):
            acc = acc * tau + i * (i - 1) * coeffs[i]
    return acc


@maybe_jit
def piecewise_eval(knots, coeffs, t, deriv):
    """Evaluate all dims of a piecewise polynomial at time t.

    Outside [knots[0], knots[-1]] the local time is clamped to the nearest
    segment end (hold semantics).
    """
    nseg = coeffs.shape[0]
    ndim = coeffs.shape[1]
    k = 0
    while k < nseg - 1 and t >= knots[k + 1]:
        k += 1
    tau = t - knots[k]
    if tau < 0.0:
        tau = 0.0
    seg_len = knots[k + 1] - knots[k]
    if tau > seg_len:
        tau = seg_len
    out = np.empty(ndim)
    for d in range(ndim):
        out[d] = poly_eval(coeffs[k, d], tau, deriv)
    return out


@maybe_jit
def piecewise_eval_many(knots, coeffs, ts, deriv, out):
    for i in range(ts.shape[0]):
        v = piecewise_eval(knots, coeffs, ts[i], deriv)
        for d in range(v.shape[0]):
            out[i, d] = v[d]


# ---------------------------------------------------------------------------
# terrain and probes
# ---------------------------------------------------------------------------

TERRAIN_STEP = 0
TERRAIN_SLOPE = 1


@maybe_jit
def terrain_height(features, x, y):
    """Ground elevation at (x, y).

    ``features`` rows: (type, x0, x1, y0, y1, param).  Steps add ``param``
    inside their region; slopes rise at gradient ``param`` (dz/dx) from x0,
    holding the plateau height beyond x1.
    """
    z = 0.0
    for i in range(features.shape[0]):
        ftype = features[i, 0]
        x0 = features[i, 1]
        x1 = features[i, 2]
        y0 = features[i, 3]
        y1 = features[i, 4]
        p = features[i, 5]
        if y < y0 or y > y1:
            continue
        if ftype == 0.0:
            if x0 <= x <= x1:
                z += p
        else:
            if x >= x0:
                run = x - x0
                if run > x1 - x0:
                    run = x1 - x0
                z += p * run
    return z


@maybe_jit
def probe_raw_gaps(pos, rot, offsets, features):
    """Unsaturated vertical gap of each probe tip above the terrain.

    ``offsets`` is (4, 2): probe (x, y) in the foot frame, corners A-D.
    Gaps may be negative (interpenetration); callers decide tolerance.
    """
    out = np.empty(4)
    for i in range(4):
        ox = offsets[i, 0]
        oy = offsets[i, 1]
        px = pos[0] + rot[0, 0] * ox + rot[0, 1] * oy
        py = pos[1] + rot[1, 0] * ox + rot[1, 1] * oy
        pz = pos[2] + rot[2, 0] * ox + rot[2, 1] * oy
        out[i] = pz - terrain_height(features, px, py)
    return out


# ---------------------------------------------------------------------------
# batch helpers (acceptance suite / benchmarks)
# ---------------------------------------------------------------------------


@maybe_jit
def batch_fk(qs, side, hip_y, thigh, shank, ankle_h, out_pos, out_rpy):
    for i in range(qs.shape[0]):
        pos, rot = fk_leg(qs[i], side, hip_y, thigh, shank, ankle_h)
        roll, pitch, yaw = matrix_to_rpy(rot)
        out_pos[i, 0] = pos[0]
        out_pos[i, 1] = pos[1]
        out_pos[i, 2] = pos[2]
        out_rpy[i, 0] = roll
        out_rpy[i, 1] = pitch
        out_rpy[i, 2] = yaw


@maybe_jit
def batch_ik(pos, rpy, side, hip_y, thigh, shank, ankle_h, margin, out_q, out_status):
    for i in range(pos.shape[0]):
        rot = rpy_to_matrix(rpy[i, 0], rpy[i, 1], rpy[i, 2])
        q, status, _ = ik_leg(pos[i], rot, side, hip_y, thigh, shank, ankle_h, margin)
        for j in range(6):
            out_q[i, j] = q[j]
        out_status[i] = status
