"""Additive (keystroke-level style) time prediction for 3D UI interactions.

Movement-time models and confirmation operators are summed per phase and per
trial; the ``stats`` module compares those predictions with logged trials.
"""
from .geometry import MovementSpec, TargetGeometry, Vec3, angular_distance, angular_width, depth_change, linear_distance
from .operators import (
    ConfirmationOperator,
    OperatorModel,
    ParameterSet,
    Phase,
    default_parameters,
    id_ang,
    load_parameters,
    mt_distal_pointing,
    mt_gaze,
    mt_hand,
    phase_time,
    predict_trial,
)
from .scenario import Scenario, generate_manipulation_scenario, generate_menu_scenario, predict_scenario
from .simulate import NoiseSpec, simulate_logs
from .stats import TrialRecord, evaluate

__version__ = "0.1.0"
