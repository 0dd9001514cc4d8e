"""Multi-link ZMP from sampled kinematic states, plus support polygons."""

from __future__ import annotations

import numpy as np

from .errors import DynamicInfeasibilityError

GRAVITY = 9.81


def central_differences(values, dt):
    """Second time derivative column-wise; endpoints replicate their neighbor."""
    values = np.asarray(values, dtype=float)
    acc = np.zeros_like(values)
    if values.shape[0] >= 3:
        acc[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (dt * dt)
        acc[0] = acc[1]
        acc[-1] = acc[-2]
    return acc


def compute_zmp(link_positions, masses, dt, g=GRAVITY, z_ground=0.0):
    """Zero-moment point of a multi-link system sampled at ``dt``.

    ``link_positions``: (T, L, 3) world CoM of each link per tick.
    Per tick: zmp = sum_i m_i [(zdd_i + g) p_i - (z_i - z_ground) pdd_i]
                    / sum_i m_i (zdd_i + g)   for p in {x, y}.
    Accelerations come from central differences (endpoints replicated).
    With a single lumped link this reduces to the cart-table formula.
    """
    pos = np.asarray(link_positions, dtype=float)
    if pos.ndim != 3 or pos.shape[2] != 3:
        raise ValueError("link_positions must have shape (T, L, 3)")
    masses = np.asarray(masses, dtype=float)
    acc = central_differences(pos.reshape(pos.shape[0], -1), dt).reshape(pos.shape)

    weight = masses[None, :] * (acc[:, :, 2] + g)        # (T, L)
    denom = weight.sum(axis=1)                           # (T,)
    if np.any(denom <= 0.0):
        tick = int(np.argmax(denom <= 0.0))
        raise DynamicInfeasibilityError(
            f"non-positive vertical force surrogate at tick {tick}"
        )
    height = pos[:, :, 2] - z_ground
    num_x = (weight * pos[:, :, 0] - masses[None, :] * height * acc[:, :, 0]).sum(axis=1)
    num_y = (weight * pos[:, :, 1] - masses[None, :] * height * acc[:, :, 1]).sum(axis=1)
    return np.stack([num_x / denom, num_y / denom], axis=1)


# ---------------------------------------------------------------------------
# support polygons
# ---------------------------------------------------------------------------


def convex_hull(points):
    """Monotone-chain convex hull; returns CCW vertices (H, 2)."""
    pts = np.unique(np.asarray(points, dtype=float).round(12), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_margin(hull, point):
    """Signed distance from ``point`` to the hull boundary (>0 inside)."""
    hull = np.asarray(hull, dtype=float)
    point = np.asarray(point, dtype=float)
    n = len(hull)
    if n < 3:
        return -float(np.min(np.linalg.norm(hull - point, axis=1))) if n else -np.inf
    margin = np.inf
    inside = True
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        edge = b - a
        # CCW hull: inward normal is left of the edge
        normal = np.array([-edge[1], edge[0]])
        normal /= np.linalg.norm(normal)
        dist = float(normal @ (point - a))
        if dist < 0:
            inside = False
        margin = min(margin, dist)
    if inside:
        return margin
    # outside: distance to the nearest edge segment
    best = np.inf
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        edge = b - a
        t = float(np.clip((point - a) @ edge / (edge @ edge), 0.0, 1.0))
        best = min(best, float(np.linalg.norm(a + t * edge - point)))
    return -best


def foot_corners(pose, foot):
    """World (x, y) of the four sole outline corners."""
    hx = foot.length_x / 2.0
    hy = foot.width_y / 2.0
    local = np.array([[hx, hy, 0.0], [-hx, hy, 0.0], [-hx, -hy, 0.0], [hx, -hy, 0.0]])
    rot = pose.matrix()
    world = pose.position[None, :] + local @ rot.T
    return world[:, :2]


def support_polygon(stance_poses, foot):
    """Convex hull of the stance feet outlines (one pose per planted foot)."""
    pts = np.vstack([foot_corners(p, foot) for p in stance_poses])
    return convex_hull(pts)
