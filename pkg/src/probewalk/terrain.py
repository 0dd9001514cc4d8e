"""Terrain model: flat base plane plus step and slope features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError

#: Sanity bound on configured feature elevation (m).
MAX_FEATURE_HEIGHT = 0.5


@dataclass(frozen=True)
class StepRegion:
    """Raised rectangular patch: adds ``height`` inside [x0,x1] x [y0,y1]."""

    x0: float
    x1: float
    height: float
    y0: float = -np.inf
    y1: float = np.inf

    def encode(self):
        return (float(kernels.TERRAIN_STEP), self.x0, self.x1, self.y0, self.y1, self.height)


@dataclass(frozen=True)
class SlopeRegion:
    """Ramp rising at ``grade`` (dz/dx) from x0; plateau height held past x1."""

    x0: float
    x1: float
    grade: float
    y0: float = -np.inf
    y1: float = np.inf

    def encode(self):
        return (float(kernels.TERRAIN_SLOPE), self.x0, self.x1, self.y0, self.y1, self.grade)

    @property
    def plateau_height(self):
        return self.grade * (self.x1 - self.x0)


@dataclass(frozen=True)
class TerrainMap:
    """Deterministic, total height field: base plane z = 0 plus features."""

    features: tuple = ()
    _encoded: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for f in self.features:
            if not isinstance(f, (StepRegion, SlopeRegion)):
                raise ConfigError(f"unknown terrain feature {f!r}")
            if f.x1 <= f.x0:
                raise ConfigError("terrain feature needs x1 > x0")
            height = f.height if isinstance(f, StepRegion) else f.plateau_height
            if abs(height) > MAX_FEATURE_HEIGHT:
                raise ConfigError(
                    f"terrain feature elevation {height:.3f} m exceeds the "
                    f"{MAX_FEATURE_HEIGHT} m bound"
                )
        if self.features:
            enc = np.array([f.encode() for f in self.features], dtype=float)
        else:
            enc = np.zeros((0, 6))
        enc.flags.writeable = False
        object.__setattr__(self, "_encoded", enc)

    @property
    def encoded(self):
        return self._encoded

    def query(self, x, y):
        """Ground elevation at (x, y); deterministic and defined everywhere."""
        return float(kernels.terrain_height(self._encoded, float(x), float(y)))

    @classmethod
    def flat(cls):
        return cls(())

    @classmethod
    def from_config(cls, table):
        """Build from a scenario-config table with ``steps``/``slopes`` lists."""
        features = []
        for s in table.get("steps", []):
            features.append(StepRegion(
                x0=float(s["x0"]), x1=float(s["x1"]), height=float(s["height"]),
                y0=float(s.get("y0", -np.inf)), y1=float(s.get("y1", np.inf)),
            ))
        for s in table.get("slopes", []):
            features.append(SlopeRegion(
                x0=float(s["x0"]), x1=float(s["x1"]), grade=float(s["grade"]),
                y0=float(s.get("y0", -np.inf)), y1=float(s.get("y1", np.inf)),
            ))
        return cls(tuple(features))
