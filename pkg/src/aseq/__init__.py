"""Adaptive safety-enhanced Q-learning for two-vehicle crossing conflicts.

A deterministic traffic simulator and decision engine: game-theoretic payoffs
with TTC-adaptive weighting, a Nash-proximity reward, first-order
theory-of-mind malice inference, and tabular Q-learning, plus an experiment
harness for the shipped cases.
"""

__version__ = "0.1.0"

from .geometry import ArcSegment, LineSegment, Path, conflict_point, euclidean_distance
from .payoffs import PayoffBreakdown, PayoffParams
from .qlearn import LearnerParams, QTable
from .scenarios import CaseSetup, DeciderConfig, ScenarioConfig, make_case
from .sim import JointState, Trace, VehicleState, run_episode, step_vehicle, time_to_collision

__all__ = [
    "ArcSegment", "CaseSetup", "DeciderConfig", "JointState", "LearnerParams",
    "LineSegment", "Path", "PayoffBreakdown", "PayoffParams", "QTable",
    "ScenarioConfig", "Trace", "VehicleState", "conflict_point",
    "euclidean_distance", "make_case", "run_episode", "step_vehicle",
    "time_to_collision", "__version__",
]
