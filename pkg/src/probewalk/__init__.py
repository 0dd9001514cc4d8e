"""probewalk: kinematic bipedal walking simulation with predictive contact
probes, ZMP-optimized gait planning, and swing-foot landing adaptation."""

from .controller import (AdaptationState, AnkleCommand, ControllerConfig,
                         ankle_command, ds_reset, landing_guard,
                         update_cumulative)
from .deflection import DeflectionModel, apply_deflection
from .gait import GaitParams, GaitPlan, plan_footsteps, plan_gait
from .kinematics import (LegJointVector, Pose, com_position, forward_leg,
                         inverse_leg, numeric_ik_oracle)
from .model import (FootGeometry, JointSpec, LegKinematics, RobotModel,
                    default_model, load_model)
from .scenario import ScenarioConfig, load_scenario, load_scenario_file
from .sensor import ProbeReading, SensorFeedback, aggregate, read_probes
from .sim import ImpactMetrics, SimConfig, SimTrace, run_episode, step
from .terrain import SlopeRegion, StepRegion, TerrainMap
from .zmp import compute_zmp

__version__ = "0.1.0"

__all__ = [
    "AdaptationState", "AnkleCommand", "ControllerConfig", "DeflectionModel",
    "FootGeometry", "GaitParams", "GaitPlan", "ImpactMetrics", "JointSpec",
    "LegJointVector", "LegKinematics", "Pose", "ProbeReading", "RobotModel",
    "ScenarioConfig", "SensorFeedback", "SimConfig", "SimTrace", "SlopeRegion",
    "StepRegion", "TerrainMap", "aggregate", "ankle_command", "apply_deflection",
    "com_position", "compute_zmp", "default_model", "ds_reset", "forward_leg",
    "inverse_leg", "landing_guard", "load_model", "load_scenario",
    "load_scenario_file", "numeric_ik_oracle", "plan_footsteps", "plan_gait",
    "read_probes", "run_episode", "step", "update_cumulative",
]
