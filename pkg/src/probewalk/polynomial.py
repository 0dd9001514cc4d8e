"""Piecewise power-basis polynomials (degree <= 5) for task-space motion."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Contiguous polynomial segments over [knots[0], knots[-1]].

    ``coeffs`` has shape (segments, dims, order); each segment's polynomial
    is evaluated in local time ``t - knots[k]``.  Evaluation outside the
    span holds the nearest endpoint.
    """

    knots: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).copy()
        coeffs = np.ascontiguousarray(self.coeffs, dtype=float).copy()
        if knots.ndim != 1 or coeffs.ndim != 3:
            raise ValueError("knots must be (K+1,), coeffs must be (K, dims, order)")
        if coeffs.shape[0] != knots.shape[0] - 1:
            raise ValueError("segment count does not match knot count")
        if coeffs.shape[2] > 6:
            raise ValueError("degree above 5 is not supported")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        knots.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dims(self):
        return self.coeffs.shape[1]

    @property
    def start_time(self):
        return float(self.knots[0])

    @property
    def end_time(self):
        return float(self.knots[-1])

    @property
    def duration(self):
        return self.end_time - self.start_time

    def value(self, t):
        return kernels.piecewise_eval(self.knots, self.coeffs, float(t), 0)

    def velocity(self, t):
        return kernels.piecewise_eval(self.knots, self.coeffs, float(t), 1)

    def acceleration(self, t):
        return kernels.piecewise_eval(self.knots, self.coeffs, float(t), 2)

    def sample(self, ts, deriv=0):
        ts = np.ascontiguousarray(ts, dtype=float)
        out = np.empty((ts.shape[0], self.dims))
        kernels.piecewise_eval_many(self.knots, self.coeffs, ts, deriv, out)
        return out

    def continuity_errors(self):
        """Max |position|, |velocity|, |acceleration| jumps at interior knots."""
        errs = np.zeros(3)
        for k in range(1, len(self.knots) - 1):
            tau = self.knots[k] - self.knots[k - 1]
            for deriv in range(3):
                left = np.array([kernels.poly_eval(self.coeffs[k - 1, d], tau, deriv)
                                 for d in range(self.dims)])
                right = np.array([kernels.poly_eval(self.coeffs[k, d], 0.0, deriv)
                                  for d in range(self.dims)])
                errs[deriv] = max(errs[deriv], float(np.max(np.abs(left - right))))
        return errs

    def to_dict(self):
        return {"knots": self.knots.tolist(), "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["knots"]), np.asarray(d["coeffs"]))


def quintic_coefficients(duration, x0, v0, a0, x1, v1, a1):
    """Degree-5 coefficients matching position/velocity/acceleration at both ends.

    The start conditions are embedded exactly (c0=x0, c1=v0, c2=a0/2); the
    remaining three coefficients come from a 3x3 solve.
    """
    t = float(duration)
    if t <= 0:
        raise ValueError("duration must be positive")
    c = np.zeros(6)
    c[0] = x0
    c[1] = v0
    c[2] = a0 / 2.0
    rhs = np.array([
        x1 - (x0 + v0 * t + 0.5 * a0 * t * t),
        v1 - (v0 + a0 * t),
        a1 - a0,
    ])
    t2 = t * t
    m = np.array([
        [t2 * t, t2 * t2, t2 * t2 * t],
        [3 * t2, 4 * t2 * t, 5 * t2 * t2],
        [6 * t, 12 * t2, 20 * t2 * t],
    ])
    c[3:] = np.linalg.solve(m, rhs)
    return c


def cubic_coefficients(duration, x0, v0, x1, v1):
    """Degree-3 Hermite coefficients, padded to the common order-6 layout."""
    t = float(duration)
    if t <= 0:
        raise ValueError("duration must be positive")
    c = np.zeros(6)
    c[0] = x0
    c[1] = v0
    dx = x1 - x0
    c[2] = (3.0 * dx / t - 2.0 * v0 - v1) / t
    c[3] = (-2.0 * dx / t + v0 + v1) / (t * t)
    return c


def linear_coefficients(x0, slope):
    c = np.zeros(6)
    c[0] = x0
    c[1] = slope
    return c


def constant_coefficients(x0):
    c = np.zeros(6)
    c[0] = x0
    return c


def shift_coefficients(coeffs, dt):
    """Re-base a power-basis polynomial from local time tau to tau' = tau - dt.

    Exact binomial expansion: p(tau) = p'(tau - dt).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]
    out = np.zeros(n)
    for i in range(n):
        for j in range(i + 1):
            out[j] += coeffs[i] * comb(i, j) * dt ** (i - j)
    return out


class SegmentBuilder:
    """Accumulates contiguous segments into one PiecewisePolynomial."""

    def __init__(self, dims, t0=0.0):
        self.dims = dims
        self.knots = [float(t0)]
        self.segments = []

    @property
    def t_end(self):
        return self.knots[-1]

    def add(self, duration, coeffs):
        """coeffs: (dims, order) for the segment starting at the current end."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.dims:
            raise ValueError("segment dims mismatch")
        padded = np.zeros((self.dims, 6))
        padded[:, : coeffs.shape[1]] = coeffs
        self.segments.append(padded)
        self.knots.append(self.knots[-1] + float(duration))

    def add_constant(self, duration, values):
        coeffs = np.zeros((self.dims, 6))
        coeffs[:, 0] = np.asarray(values, dtype=float)
        self.add(duration, coeffs)

    def build(self):
        return PiecewisePolynomial(np.array(self.knots), np.stack(self.segments))
