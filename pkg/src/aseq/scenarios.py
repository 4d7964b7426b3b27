"""Scenario library: case geometries, initial conditions, target behaviors.

The intersection geometry is a four-way crossing with one 3.5 m lane per
direction: the ego drives straight north through the crossing while the
target approaches from the opposite direction and turns left across the ego
lane on a circular arc. The roundabout variant puts the target on a
circulating arc that the ego's entry leg crosses once, with a much shorter
decision distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .geometry import ArcSegment, Crossing, LineSegment, Path, conflict_point
from .payoffs import PayoffParams
from .sim import JointState, TraceStep

LANE_WIDTH = 3.5
TURN_RADIUS = 1.5 * LANE_WIDTH

CASE_IDS = ("A", "Amis", "B", "C", "D25", "D50", "roundabout")

# evaluation-time perturbations applied per seed (speed factor, start offset m)
EVAL_SPEED_JITTER = 0.03
EVAL_OFFSET_JITTER = 3.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one two-vehicle episode setup."""

    geometry: str               # "intersection" | "roundabout"
    center: tuple[float, float]
    lane_width: float
    target_path: Path
    ego_path: Path
    target_speed: float
    ego_speed: float
    v_max: float = 12.0
    dt: float = 0.1
    horizon: float = 20.0
    target_policy: str = "malicious"   # "malicious" | "benign" | "absent"
    collision_radius: float = 2.0
    ego_exit_s: float = math.inf       # arc length at which the crossing counts done
    target_s0: float = 0.0
    ego_s0: float = 0.0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.target_speed < 0 or self.ego_speed < 0:
            raise ValueError("speeds must be >= 0")
        if self.target_policy not in ("malicious", "benign", "absent"):
            raise ValueError(f"unknown target policy {self.target_policy!r}")

    @cached_property
    def conflict(self) -> Crossing | None:
        """First crossing of the two paths (s1 on target path, s2 on ego path)."""
        return conflict_point(self.target_path, self.ego_path)

    def ego_dist_to_conflict(self, s: JointState) -> float:
        if self.conflict is None:
            return math.inf
        return self.conflict.s2 - s.ego.s_along

    def target_dist_to_conflict(self, s: JointState) -> float:
        if self.conflict is None:
            return math.inf
        return self.conflict.s1 - s.target.s_along


@dataclass(frozen=True)
class DeciderConfig:
    """Ablation stack the ego runs: weighting scheme and reward components."""

    weights_mode: str = "adaptive"          # "adaptive" | "fixed"
    fixed_weights: tuple[float, float, float] = (0.4, 0.3, 0.3)
    use_tom: bool = True
    w1: float = 0.5
    w2: float = 0.5
    delta: float = 1.0
    epsilon_mod: float = 1.0

    def __post_init__(self) -> None:
        if self.weights_mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown weights mode {self.weights_mode!r}")
        if abs(sum(self.fixed_weights) - 1.0) > 1e-9:
            raise ValueError("fixed weights must sum to 1")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError("reward weights must sum to 1")
        if self.use_tom and self.w1 <= 0:
            raise ValueError("use_tom requires w1 > 0")
        if not self.use_tom and self.w1 != 0:
            raise ValueError("w1 must be 0 when the ToM reward is disabled")
        if self.delta <= 0 or self.epsilon_mod <= 0:
            raise ValueError("delta and epsilon_mod must be positive")

    def active_fixed_weights(self) -> tuple[float, float, float] | None:
        return self.fixed_weights if self.weights_mode == "fixed" else None


@dataclass(frozen=True)
class CaseSetup:
    case_id: str
    scenario: ScenarioConfig
    decider: DeciderConfig
    payoff: PayoffParams


def intersection_paths() -> tuple[Path, Path]:
    """Target (opposing left turn) and ego (straight north) paths."""
    half = LANE_WIDTH / 2.0
    r = TURN_RADIUS
    target = Path([
        LineSegment((-half, 40.0), (-half, r - half)),
        ArcSegment((r - half, r - half), r, math.pi, math.pi / 2.0),
        LineSegment((r - half, -half), (60.0, -half)),
    ], entry_tag="north_left_turn", exit_tag="east")
    ego = Path([
        LineSegment((half, -30.0), (half, 60.0)),
    ], entry_tag="south_straight", exit_tag="north")
    return target, ego


def roundabout_paths() -> tuple[Path, Path]:
    """Target circulating on the ring, ego entering from the south arm."""
    ring_r = 12.0
    start = -2.0 * math.pi / 3.0      # -120 deg
    sweep = 11.0 * math.pi / 18.0     # 110 deg
    end = start + sweep
    exit_dir = (-math.sin(end), math.cos(end))
    exit_start = (ring_r * math.cos(end), ring_r * math.sin(end))
    target = Path([
        ArcSegment((0.0, 0.0), ring_r, start, sweep),
        LineSegment(exit_start, (exit_start[0] + 25.0 * exit_dir[0],
                                 exit_start[1] + 25.0 * exit_dir[1])),
    ], entry_tag="circulating", exit_tag="north_east")
    ego = Path([
        LineSegment((11.0, -28.0), (11.0, 0.0)),
        ArcSegment((-4.0, 0.0), 15.0, 0.0, math.pi / 2.0),
        LineSegment((-4.0, 15.0), (-34.0, 15.0)),
    ], entry_tag="south_entry", exit_tag="west")
    return target, ego


def _intersection_scenario(target_speed: float, ego_speed: float) -> ScenarioConfig:
    target, ego = intersection_paths()
    # crossing counts complete once the ego clears the 7 m central box
    # (ego starts 30 m south of the center; road half-width is one lane width)
    exit_s = 30.0 + LANE_WIDTH
    return ScenarioConfig(
        geometry="intersection", center=(0.0, 0.0), lane_width=LANE_WIDTH,
        target_path=target, ego_path=ego, target_speed=target_speed,
        ego_speed=ego_speed, ego_exit_s=exit_s)


def _roundabout_scenario(target_speed: float, ego_speed: float) -> ScenarioConfig:
    target, ego = roundabout_paths()
    exit_s = 28.0 + math.pi / 2.0 * 15.0  # end of the ring section
    return ScenarioConfig(
        geometry="roundabout", center=(0.0, 0.0), lane_width=LANE_WIDTH,
        target_path=target, ego_path=ego, target_speed=target_speed,
        ego_speed=ego_speed, ego_exit_s=exit_s)


def make_case(case_id: str) -> CaseSetup:
    """Scenario and decider stack for one of the shipped cases.

    A uses manually fixed weights and the game reward only; Amis is the same
    with a deliberately safety-skewed weight split; B adds the adaptive
    weights; C and both D variants add the first-order theory-of-mind reward;
    the roundabout case reuses the full stack on the ring geometry.
    """
    payoff = PayoffParams()
    if case_id == "A":
        scenario = _intersection_scenario(13.2, 10.0)
        decider = DeciderConfig(weights_mode="fixed",
                                fixed_weights=(0.4, 0.3, 0.3),
                                use_tom=False, w1=0.0, w2=1.0)
    elif case_id == "Amis":
        scenario = _intersection_scenario(13.2, 10.0)
        decider = DeciderConfig(weights_mode="fixed",
                                fixed_weights=(0.8, 0.1, 0.1),
                                use_tom=False, w1=0.0, w2=1.0)
    elif case_id == "B":
        scenario = _intersection_scenario(13.2, 10.0)
        decider = DeciderConfig(weights_mode="adaptive",
                                use_tom=False, w1=0.0, w2=1.0)
    elif case_id == "C":
        scenario = _intersection_scenario(13.2, 10.0)
        decider = DeciderConfig(weights_mode="adaptive", use_tom=True)
    elif case_id == "D25":
        scenario = _intersection_scenario(15.0, 12.0)
        decider = DeciderConfig(weights_mode="adaptive", use_tom=True)
    elif case_id == "D50":
        scenario = _intersection_scenario(18.0, 12.0)
        decider = DeciderConfig(weights_mode="adaptive", use_tom=True)
    elif case_id == "roundabout":
        scenario = _roundabout_scenario(10.0, 10.0)
        decider = DeciderConfig(weights_mode="adaptive", use_tom=True)
    else:
        raise ValueError(f"unknown case id {case_id!r}; expected one of {CASE_IDS}")
    return CaseSetup(case_id, scenario, decider, payoff)


def jittered(scenario: ScenarioConfig, rng: np.random.Generator) -> ScenarioConfig:
    """Perturb initial speeds and start offsets for multi-seed evaluation."""
    f_t = 1.0 + EVAL_SPEED_JITTER * (2.0 * rng.random() - 1.0)
    f_e = 1.0 + EVAL_SPEED_JITTER * (2.0 * rng.random() - 1.0)
    off_t = EVAL_OFFSET_JITTER * rng.random()
    off_e = EVAL_OFFSET_JITTER * rng.random()
    return replace(scenario,
                   target_speed=scenario.target_speed * f_t,
                   ego_speed=scenario.ego_speed * f_e,
                   target_s0=scenario.target_s0 + off_t,
                   ego_s0=scenario.ego_s0 + off_e)


class MaliciousTarget:
    """Scripted offender: holds its (over)speed, never decelerates."""

    def begin_episode(self) -> None:
        pass

    def act(self, s: JointState, history: list[TraceStep]) -> float:
        return 0.0


class BenignTarget:
    """Rule-based yielding vehicle.

    Brakes down to a crawl while approaching the conflict point whenever the
    ego has not cleared it yet, then recovers its cruise speed.
    """

    YIELD_DISTANCE = 40.0
    CRAWL_SPEED = 3.0
    CLEARANCE = 2.0

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        self.cruise = scenario.target_speed

    def begin_episode(self) -> None:
        pass

    def act(self, s: JointState, history: list[TraceStep]) -> float:
        c = self.scenario.conflict
        if c is None:
            return 0.0
        target_dist = c.s1 - s.target.s_along
        ego_cleared = s.ego.s_along > c.s2 + self.CLEARANCE or s.ego.exited
        if target_dist <= 0.0 or ego_cleared:
            return 1.0 if s.target.speed < self.cruise - 0.5 else 0.0
        if target_dist <= self.YIELD_DISTANCE:
            return -2.0 if s.target.speed > self.CRAWL_SPEED else 0.0
        return 0.0


class AbsentTarget:
    """Placeholder policy for scenarios whose target starts already exited."""

    def begin_episode(self) -> None:
        pass

    def act(self, s: JointState, history: list[TraceStep]) -> float:
        return 0.0


def make_target_policy(scenario: ScenarioConfig):
    if scenario.target_policy == "malicious":
        return MaliciousTarget()
    if scenario.target_policy == "benign":
        return BenignTarget(scenario)
    return AbsentTarget()


def absent_target(scenario: ScenarioConfig) -> ScenarioConfig:
    """Variant whose target starts at its path end (already exited)."""
    return replace(scenario, target_policy="absent", target_speed=0.0,
                   target_s0=scenario.target_path.length)
