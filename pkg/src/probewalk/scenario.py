"""Scenario configuration: model, gait, terrain, disturbance, controller
toggles and the episode seed, loaded from a TOML document."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

try:
    import tomllib as _toml
except ImportError:
    import tomli as _toml

from .controller import ControllerConfig
from .deflection import DeflectionModel
from .errors import ConfigError
from .gait import GaitParams
from .model import RobotModel, default_model, load_model
from .sim import SimConfig
from .terrain import TerrainMap

#: Environment variable overriding the default model path.
MODEL_ENV_VAR = "PROBEWALK_MODEL"


@dataclass(frozen=True)
class ScenarioConfig:
    model_ref: str = "default"
    gait: GaitParams = field(default_factory=GaitParams)
    terrain: TerrainMap = field(default_factory=TerrainMap.flat)
    deflection: DeflectionModel = field(default_factory=DeflectionModel.off)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    zmp_margin: float = 0.02

    def resolve_model(self) -> RobotModel:
        ref = self.model_ref
        if ref == "default":
            env = os.environ.get(MODEL_ENV_VAR)
            if env:
                ref = env
            else:
                return default_model()
        try:
            with open(ref) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read model file {ref!r}: {exc}") from exc
        return load_model(text)


def _pick(table, cls, section, **extra):
    known = set(cls.__dataclass_fields__)
    bad = [k for k in table if k not in known]
    if bad:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(bad))}")
    merged = dict(table)
    merged.update(extra)
    return cls(**merged)


def load_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document.

    The seed is mandatory: episodes carry no implicit randomness.
    """
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"scenario parse failure: {exc}") from exc
    if "seed" not in doc:
        raise ConfigError("scenario must set an explicit 'seed'")

    gait = _pick(doc.get("gait", {}), GaitParams, "gait")
    gait.validate()
    terrain = TerrainMap.from_config(doc.get("terrain", {}))
    deflection = _pick(doc.get("deflection", {}), DeflectionModel, "deflection")

    ctl_table = dict(doc.get("controller", {}))
    noise_amp = float(ctl_table.pop("noise_amp", 0.0))
    adaptation = bool(ctl_table.pop("adaptation", True))
    guard = bool(ctl_table.pop("guard", True))
    controller = _pick(ctl_table, ControllerConfig, "controller",
                       adaptation_enabled=adaptation, guard_enabled=guard)

    sim_cfg = _pick(doc.get("sim", {}), SimConfig, "sim", noise_amp=noise_amp)

    return ScenarioConfig(
        model_ref=str(doc.get("model", "default")),
        gait=gait,
        terrain=terrain,
        deflection=deflection,
        controller=controller,
        sim=sim_cfg,
        seed=int(doc["seed"]),
        zmp_margin=float(doc.get("zmp_margin", 0.02)),
    )


def load_scenario_file(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path!r}: {exc}") from exc
    return load_scenario(text)


def with_overrides(scenario: ScenarioConfig, seed=None, adaptation=None,
                   deflection=None) -> ScenarioConfig:
    """Apply CLI-level overrides (--seed / --adaptation / --deflection)."""
    out = scenario
    if seed is not None:
        out = replace(out, seed=int(seed))
    if adaptation is not None:
        out = replace(out, controller=replace(
            out.controller, adaptation_enabled=adaptation, guard_enabled=adaptation))
    if deflection is not None:
        mode = "off" if deflection == 0.0 else "constant"
        out = replace(out, deflection=replace(
            out.deflection, mode=mode, tip_error_max=float(deflection)))
    return out
