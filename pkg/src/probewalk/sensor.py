"""Predictive contact probes: four corner distance sensors and their
aggregation into average gap and terrain-relative pitch/roll.

Each probe reports the vertical gap between its corner of the sole plane and
the ground directly beneath it, accurately only within ``sensor_range``
(1.5 cm by default); beyond that it saturates at the range value.

Aggregation recovers, for a rigid plane under the foot,

* ``d_avg``      - mean of the four gaps (exact arithmetic mean),
* ``phi_avg``    - relative pitch, ``asin(rear-front gap difference / span_x)``,
* ``alpha_avg``  - relative roll, ``asin(left-right difference / (span_y cos(phi)))``.

The asin form equals atan of the gap difference over the *horizontally
projected* probe span, which makes the recovered angles exact for any
combined tilt instead of only to second order; for small tilts it reduces
to the plain gap-difference-over-span ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContactViolationError
from .kinematics import Pose
from .model import FootGeometry
from .terrain import TerrainMap

#: Interpenetration beyond this is a simulation integrity failure (m).
PENETRATION_TOLERANCE = 1e-3

CORNERS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class ProbeReading:
    """Per-corner distances (saturated at the sensor range) and validity."""

    distances: np.ndarray   # (4,) corners A, B, C, D
    in_range: np.ndarray    # (4,) bool, True where the raw gap was measurable
    timestamp: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float).copy()
        r = np.asarray(self.in_range, dtype=bool).copy()
        d.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "in_range", r)

    @property
    def all_in_range(self):
        return bool(np.all(self.in_range))


@dataclass(frozen=True)
class SensorFeedback:
    """Aggregated probe feedback fed to the adaptation controller."""

    d_avg: float
    phi_avg: float    # relative pitch, rad; positive = toe closer to ground
    alpha_avg: float  # relative roll, rad; positive = left edge closer
    all_in_range: bool


def raw_probe_gaps(sole: Pose, terrain: TerrainMap, foot: FootGeometry) -> np.ndarray:
    """Unsaturated vertical probe gaps; negative means interpenetration."""
    return kernels.probe_raw_gaps(
        sole.position, sole.matrix(), foot.probe_offsets_array(), terrain.encoded
    )


def read_probes(sole: Pose, terrain: TerrainMap, foot: FootGeometry,
                timestamp: float = 0.0, noise_amp: float = 0.0,
                rng=None) -> ProbeReading:
    """Simulate one probe scan of the terrain under the sole.

    Raises ContactViolationError if any corner is more than 1 mm below the
    terrain (the plant must resolve contact before sensing).
    """
    raw = raw_probe_gaps(sole, terrain, foot)
    if np.min(raw) < -PENETRATION_TOLERANCE:
        raise ContactViolationError(
            f"probe below terrain by {-float(np.min(raw)):.4f} m "
            f"(tolerance {PENETRATION_TOLERANCE} m)"
        )
    if noise_amp > 0.0:
        if rng is None:
            raise ValueError("sensor noise requires an explicit rng")
        raw = raw + rng.uniform(-noise_amp, noise_amp, size=4)
    in_range = raw <= foot.sensor_range
    distances = np.clip(raw, 0.0, foot.sensor_range)
    return ProbeReading(distances=distances, in_range=in_range, timestamp=timestamp)


def aggregate(reading: ProbeReading, foot: FootGeometry) -> SensorFeedback:
    """Average gap and relative pitch/roll from the four corner distances."""
    d_a, d_b, d_c, d_d = reading.distances
    d_avg = (d_a + d_b + d_c + d_d) / 4.0
    # rear-minus-front and left-minus-right pair differences
    diff_x = (d_b + d_c) / 2.0 - (d_a + d_d) / 2.0
    diff_y = (d_a + d_b) / 2.0 - (d_c + d_d) / 2.0
    sx = min(max(diff_x / foot.span_x, -1.0), 1.0)
    phi = float(np.arcsin(sx))
    lat_span = foot.span_y * np.sqrt(1.0 - sx * sx)
    sy = min(max(diff_y / lat_span, -1.0), 1.0)
    alpha = float(np.arcsin(sy))
    return SensorFeedback(
        d_avg=float(d_avg),
        phi_avg=phi,
        alpha_avg=alpha,
        all_in_range=reading.all_in_range,
    )
