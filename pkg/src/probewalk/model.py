"""Robot model: kinematic dimensions, joint specs, foot/probe geometry, masses.

Models load from a TOML config with sections ``[leg]``, ``[foot]``,
``[masses]`` and a ``[[joints]]`` table array.  Lengths/angles/speeds accept
explicit unit suffixes ("cm", "deg", "rpm", ...); bare numbers are SI
(m, rad, rad/s, N*m).  Everything is stored internally in SI and the model
is immutable after validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

try:
    import tomllib as _toml
except ImportError:  # Python < 3.11
    import tomli as _toml

from .errors import ConfigError, ModelValidationError

AXES = ("roll", "pitch", "yaw")
SIDES = ("left", "right")
LEG_JOINT_ORDER = (
    "hip_yaw",
    "hip_roll",
    "hip_pitch",
    "knee_pitch",
    "ankle_pitch",
    "ankle_roll",
)
#: Joint names the kinematics module requires, exactly once each.
REQUIRED_JOINTS = tuple(
    f"{side}_{name}" for side in SIDES for name in LEG_JOINT_ORDER
)

LINK_NAMES = (
    "pelvis",
    "thigh_left",
    "thigh_right",
    "shank_left",
    "shank_right",
    "foot_left",
    "foot_right",
)

_LENGTH_UNITS = {"m": 1.0, "cm": 0.01, "mm": 0.001}
_ANGLE_UNITS = {"rad": 1.0, "deg": math.pi / 180.0}
_SPEED_UNITS = {"rad/s": 1.0, "rpm": 2.0 * math.pi / 60.0}


def _parse_unit_value(value, units, kind, field_name):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 2 and parts[1] in units:
            try:
                return float(parts[0]) * units[parts[1]]
            except ValueError:
                pass
        raise ConfigError(
            f"{field_name}: cannot parse {kind} value {value!r} "
            f"(expected a number or 'NUMBER UNIT' with unit in {sorted(units)})"
        )
    raise ConfigError(f"{field_name}: expected number or string, got {type(value).__name__}")


def parse_length(value, field_name):
    return _parse_unit_value(value, _LENGTH_UNITS, "length", field_name)


def parse_angle(value, field_name):
    return _parse_unit_value(value, _ANGLE_UNITS, "angle", field_name)


def parse_speed(value, field_name):
    return _parse_unit_value(value, _SPEED_UNITS, "speed", field_name)


def parse_angle_range(value, field_name):
    """Parse "-25 .. 30 deg" (or a [min, max] pair in radians)."""
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return float(value[0]), float(value[1])
    if isinstance(value, str):
        body = value
        scale = 1.0
        for unit, s in _ANGLE_UNITS.items():
            if body.rstrip().endswith(unit):
                body = body.rstrip()[: -len(unit)]
                scale = s
                break
        if ".." in body:
            lo_s, hi_s = body.split("..", 1)
            try:
                return float(lo_s) * scale, float(hi_s) * scale
            except ValueError:
                pass
    raise ConfigError(
        f"{field_name}: cannot parse range {value!r} (expected 'LO .. HI [deg|rad]')"
    )


@dataclass(frozen=True)
class JointSpec:
    """One actuated joint: gearing, speed/torque bounds and motion range."""

    name: str
    axis: str
    gear_ratio: float
    max_speed: float   # rad/s
    max_torque: float  # N*m
    range_min: float   # rad
    range_max: float   # rad

    def validate(self, enforce_zero_rule=False):
        if self.axis not in AXES:
            raise ModelValidationError(f"joints.{self.name}.axis", f"unknown axis {self.axis!r}")
        if not self.range_min < self.range_max:
            raise ModelValidationError(
                f"joints.{self.name}.range", "range_min must be < range_max"
            )
        if not self.max_speed > 0:
            raise ModelValidationError(f"joints.{self.name}.max_speed", "must be > 0")
        if not self.max_torque > 0:
            raise ModelValidationError(f"joints.{self.name}.max_torque", "must be > 0")
        if not self.gear_ratio > 0:
            raise ModelValidationError(f"joints.{self.name}.gear_ratio", "must be > 0")
        if enforce_zero_rule:
            # zero must be attainable: either interior or an explicit boundary
            if not (self.range_min < 0.0 < self.range_max
                    or self.range_min == 0.0 or self.range_max == 0.0):
                raise ModelValidationError(
                    f"joints.{self.name}.range",
                    "leg joint range must contain zero (interior or boundary)",
                )

    def contains(self, angle):
        return self.range_min <= angle <= self.range_max


@dataclass(frozen=True)
class LegKinematics:
    """Leg segment dimensions, identical for both sides."""

    hip_offset_y: float
    thigh_length: float
    shank_length: float
    ankle_height: float

    def validate(self):
        for name in ("hip_offset_y", "thigh_length", "shank_length", "ankle_height"):
            if not getattr(self, name) > 0:
                raise ModelValidationError(f"leg.{name}", "must be > 0")
        total = self.thigh_length + self.shank_length + self.ankle_height
        if not 0.6 <= total <= 1.1:
            raise ModelValidationError(
                "leg",
                f"total leg length {total:.3f} m inconsistent with a 170 cm build "
                "(expected within [0.6, 1.1] m)",
            )

    @property
    def reach(self):
        return self.thigh_length + self.shank_length


@dataclass(frozen=True)
class FootGeometry:
    """Sole outline and the four contact-probe corners.

    Corner labels (fixed convention, not configurable):
    A = front-left, B = rear-left, C = rear-right, D = front-right.
    Rear-minus-front probe gaps map to positive relative pitch (toe closer
    to the ground), left-minus-right gaps to positive relative roll.
    """

    length_x: float
    width_y: float
    probe_inset: float
    sensor_range: float = 0.015

    def validate(self):
        for name in ("length_x", "width_y", "sensor_range"):
            if not getattr(self, name) > 0:
                raise ModelValidationError(f"foot.{name}", "must be > 0")
        if self.probe_inset < 0:
            raise ModelValidationError("foot.probe_inset", "must be >= 0")
        if (self.probe_inset >= self.length_x / 2
                or self.probe_inset >= self.width_y / 2):
            raise ModelValidationError(
                "foot.probe_inset", "probes would form a degenerate rectangle"
            )

    @property
    def half_span_x(self):
        return self.length_x / 2.0 - self.probe_inset

    @property
    def half_span_y(self):
        return self.width_y / 2.0 - self.probe_inset

    @property
    def span_x(self):
        """Longitudinal probe spacing (front row to rear row)."""
        return 2.0 * self.half_span_x

    @property
    def span_y(self):
        """Lateral probe spacing (left column to right column)."""
        return 2.0 * self.half_span_y

    @property
    def probe_offsets(self):
        """Foot-frame (x, y) of corners A, B, C, D."""
        hx = self.half_span_x
        hy = self.half_span_y
        return ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))

    def probe_offsets_array(self):
        return np.array(self.probe_offsets, dtype=float)


@dataclass(frozen=True)
class RobotModel:
    """Validated, immutable bundle of all physical robot parameters."""

    joints: tuple
    leg: LegKinematics
    foot: FootGeometry
    link_masses: tuple          # ((name, kg), ...) in LINK_NAMES order
    total_mass: float
    com_height_nominal: float
    pelvis_com_offset_z: float = 0.15
    _joint_map: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_joint_map", {j.name: j for j in self.joints})

    def joint(self, name) -> JointSpec:
        return self._joint_map[name]

    def leg_joint_specs(self, side):
        """The six JointSpecs for one leg, in kinematic order."""
        return tuple(self._joint_map[f"{side}_{n}"] for n in LEG_JOINT_ORDER)

    def leg_limits(self, side):
        specs = self.leg_joint_specs(side)
        lo = np.array([s.range_min for s in specs])
        hi = np.array([s.range_max for s in specs])
        return lo, hi

    def mass(self, link):
        return dict(self.link_masses)[link]

    def validate(self):
        self.leg.validate()
        self.foot.validate()
        seen = set()
        for j in self.joints:
            if j.name in seen:
                raise ModelValidationError(f"joints.{j.name}", "defined more than once")
            seen.add(j.name)
            j.validate(enforce_zero_rule=j.name in REQUIRED_JOINTS)
        for name in REQUIRED_JOINTS:
            if name not in seen:
                raise ModelValidationError(f"joints.{name}", "required leg joint missing")
        masses = dict(self.link_masses)
        for name in LINK_NAMES:
            if name not in masses:
                raise ModelValidationError(f"masses.{name}", "missing link mass")
            if not masses[name] > 0:
                raise ModelValidationError(f"masses.{name}", "must be > 0")
        if abs(self.total_mass - sum(masses.values())) > 1e-9:
            raise ModelValidationError(
                "total_mass", "does not equal the sum of link masses"
            )
        if not self.com_height_nominal > 0:
            raise ModelValidationError("masses.com_height_nominal", "must be > 0")
        if self.com_height_nominal >= self.leg.reach + self.leg.ankle_height:
            raise ModelValidationError(
                "masses.com_height_nominal", "exceeds total leg length"
            )
        return self

    # -- serialization ------------------------------------------------------

    def to_config_text(self):
        """Canonical TOML for this model; load_model() round-trips exactly."""
        lines = ["[leg]"]
        for name in ("hip_offset_y", "thigh_length", "shank_length", "ankle_height"):
            lines.append(f"{name} = {getattr(self.leg, name)!r}")
        lines.append("")
        lines.append("[foot]")
        for name in ("length_x", "width_y", "probe_inset", "sensor_range"):
            lines.append(f"{name} = {getattr(self.foot, name)!r}")
        lines.append("")
        lines.append("[masses]")
        masses = dict(self.link_masses)
        lines.append(f"pelvis = {masses['pelvis']!r}")
        lines.append(f"thigh = {masses['thigh_left']!r}")
        lines.append(f"shank = {masses['shank_left']!r}")
        lines.append(f"foot = {masses['foot_left']!r}")
        lines.append(f"com_height_nominal = {self.com_height_nominal!r}")
        lines.append(f"pelvis_com_offset_z = {self.pelvis_com_offset_z!r}")
        for j in self.joints:
            lines.append("")
            lines.append("[[joints]]")
            lines.append(f'name = "{j.name}"')
            lines.append(f'axis = "{j.axis}"')
            lines.append(f"gear_ratio = {j.gear_ratio!r}")
            lines.append(f"max_speed = {j.max_speed!r}")
            lines.append(f"max_torque = {j.max_torque!r}")
            lines.append(f"range = [{j.range_min!r}, {j.range_max!r}]")
        lines.append("")
        return "\n".join(lines)


def _require(table, key, section):
    if key not in table:
        raise ModelValidationError(f"{section}.{key}", "required key missing")
    return table[key]


def load_model(config_text: str) -> RobotModel:
    """Parse and validate a robot config document."""
    try:
        doc = _toml.loads(config_text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    for section in ("leg", "foot", "masses", "joints"):
        if section not in doc:
            raise ModelValidationError(section, "required section missing")

    leg_t = doc["leg"]
    leg = LegKinematics(
        hip_offset_y=parse_length(_require(leg_t, "hip_offset_y", "leg"), "leg.hip_offset_y"),
        thigh_length=parse_length(_require(leg_t, "thigh_length", "leg"), "leg.thigh_length"),
        shank_length=parse_length(_require(leg_t, "shank_length", "leg"), "leg.shank_length"),
        ankle_height=parse_length(_require(leg_t, "ankle_height", "leg"), "leg.ankle_height"),
    )

    foot_t = doc["foot"]
    foot = FootGeometry(
        length_x=parse_length(_require(foot_t, "length_x", "foot"), "foot.length_x"),
        width_y=parse_length(_require(foot_t, "width_y", "foot"), "foot.width_y"),
        probe_inset=parse_length(_require(foot_t, "probe_inset", "foot"), "foot.probe_inset"),
        sensor_range=parse_length(foot_t.get("sensor_range", 0.015), "foot.sensor_range"),
    )

    masses_t = doc["masses"]
    per_side = {
        "thigh": float(_require(masses_t, "thigh", "masses")),
        "shank": float(_require(masses_t, "shank", "masses")),
        "foot": float(_require(masses_t, "foot", "masses")),
    }
    link_masses = [("pelvis", float(_require(masses_t, "pelvis", "masses")))]
    for part in ("thigh", "shank", "foot"):
        for side in SIDES:
            link_masses.append((f"{part}_{side}", per_side[part]))
    order = {name: i for i, name in enumerate(LINK_NAMES)}
    link_masses.sort(key=lambda kv: order[kv[0]])
    total = sum(m for _, m in link_masses)

    joints = []
    for i, jt in enumerate(doc["joints"]):
        name = _require(jt, "name", f"joints[{i}]")
        if "range" in jt:
            lo, hi = parse_angle_range(jt["range"], f"joints.{name}.range")
        else:
            lo = parse_angle(_require(jt, "range_min", f"joints.{name}"), f"joints.{name}.range_min")
            hi = parse_angle(_require(jt, "range_max", f"joints.{name}"), f"joints.{name}.range_max")
        joints.append(JointSpec(
            name=name,
            axis=_require(jt, "axis", f"joints.{name}"),
            gear_ratio=float(_require(jt, "gear_ratio", f"joints.{name}")),
            max_speed=parse_speed(_require(jt, "max_speed", f"joints.{name}"), f"joints.{name}.max_speed"),
            max_torque=float(_require(jt, "max_torque", f"joints.{name}")),
            range_min=lo,
            range_max=hi,
        ))

    model = RobotModel(
        joints=tuple(joints),
        leg=leg,
        foot=foot,
        link_masses=tuple(link_masses),
        total_mass=total,
        com_height_nominal=float(_require(masses_t, "com_height_nominal", "masses")),
        pelvis_com_offset_z=float(masses_t.get("pelvis_com_offset_z", 0.15)),
    )
    return model.validate()


def default_model_text() -> str:
    """Text of the shipped default model config."""
    return resources.files("probewalk").joinpath("data/default_robot.toml").read_text()


@lru_cache(maxsize=1)
def default_model() -> RobotModel:
    """The built-in full-size biped model (identical to the shipped file)."""
    return load_model(default_model_text())
