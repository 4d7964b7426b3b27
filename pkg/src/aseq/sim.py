"""Discrete-time two-vehicle simulation core.

Vehicle 1 is the target (the vehicle that may behave maliciously), vehicle 2
is the autonomous ego. Both follow fixed paths and control only acceleration
along them; the closed loop is sense -> decide -> actuate -> update at a fixed
decision period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol

from .geometry import Crossing, Path, Vec2, conflict_point, euclidean_distance

TRACE_COLUMNS = ("t", "x1", "y1", "v1", "a1", "x2", "y2", "v2", "a2",
                 "ttc", "dist", "w_s", "r_tom", "r_game", "r_total")

_EXIT_EPS = 1e-12


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle on its path.

    ``a_next`` is the most recently commanded acceleration, carried inside the
    state. Velocity direction is always the path tangent at ``s_along``.
    """

    x: float
    y: float
    vx: float
    vy: float
    a_next: float
    s_along: float
    exited: bool = False

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def position(self) -> Vec2:
        return (self.x, self.y)


def initial_state(path: Path, speed: float, s_along: float = 0.0) -> VehicleState:
    if speed < 0:
        raise ValueError("initial speed must be >= 0")
    x, y = path.point_at(s_along)
    tx, ty = path.tangent_at(s_along)
    exited = s_along >= path.length - _EXIT_EPS
    return VehicleState(x, y, speed * tx, speed * ty, 0.0, s_along, exited)


@dataclass(frozen=True)
class JointState:
    """Joint kinematic state; vehicle 1 is the target, vehicle 2 the ego."""

    target: VehicleState
    ego: VehicleState
    t: float


def step_vehicle(state: VehicleState, path: Path, a: float, dt: float) -> VehicleState:
    """Advance one vehicle by dt under constant commanded acceleration.

    Speed never crosses zero: braking that would reverse the vehicle stops it
    at the instant speed hits zero and motion is truncated there. Past the end
    of the path the vehicle is flagged exited and its state freezes.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.exited:
        return state
    v0 = state.speed
    v1 = v0 + a * dt
    a_held = a
    if v1 <= 0.0:
        # moves only until speed hits zero at t0 = v0 / -a; a braking command
        # at standstill is a no-op, so the held actuation state reads 0
        t0 = v0 / (-a) if a < 0 else 0.0
        ds = v0 * t0 + 0.5 * a * t0 * t0
        v1 = 0.0
        a_held = 0.0
    else:
        ds = v0 * dt + 0.5 * a * dt * dt
    s1 = state.s_along + ds
    exited = s1 >= path.length - _EXIT_EPS
    s1 = min(s1, path.length)
    x, y = path.point_at(s1)
    tx, ty = path.tangent_at(s1)
    return VehicleState(x, y, v1 * tx, v1 * ty, a_held, s1, exited)


def time_to_collision(s: JointState) -> float:
    """Projected time of closest approach under constant relative velocity.

    Returns +inf when either vehicle has exited, when relative velocity is
    zero, or when the vehicles are diverging; the result is always positive.
    """
    if s.target.exited or s.ego.exited:
        return math.inf
    rx = s.target.x - s.ego.x
    ry = s.target.y - s.ego.y
    vx = s.target.vx - s.ego.vx
    vy = s.target.vy - s.ego.vy
    v2 = vx * vx + vy * vy
    if v2 == 0.0:
        return math.inf
    t_star = -(rx * vx + ry * vy) / v2
    return t_star if t_star > 0.0 else math.inf


def inter_vehicle_distance(s: JointState) -> float:
    return euclidean_distance(s.target.position, s.ego.position)


def _min_distance_over_step(before: JointState, after: JointState) -> float:
    """Minimum separation during one step, linearly interpolating both motions."""
    rx0 = before.target.x - before.ego.x
    ry0 = before.target.y - before.ego.y
    rx1 = after.target.x - after.ego.x
    ry1 = after.target.y - after.ego.y
    dx, dy = rx1 - rx0, ry1 - ry0
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        return math.hypot(rx0, ry0)
    tau = -(rx0 * dx + ry0 * dy) / d2
    tau = min(max(tau, 0.0), 1.0)
    return math.hypot(rx0 + tau * dx, ry0 + tau * dy)


@dataclass(frozen=True)
class StepInfo:
    """Per-step decision diagnostics supplied by the ego decider."""

    w_s: float = math.nan
    r_tom: float = math.nan
    r_game: float = math.nan
    r_total: float = math.nan
    nash_distance: float = math.nan
    nash_fallback: bool = False
    p_malice: float = math.nan


@dataclass(frozen=True)
class TraceStep:
    t: float
    x1: float
    y1: float
    v1: float
    a1: float
    x2: float
    y2: float
    v2: float
    a2: float
    ttc: float
    dist: float
    w_s: float
    r_tom: float
    r_game: float
    r_total: float
    # extra in-memory fields, not part of the CSV contract
    s1: float = math.nan
    s2: float = math.nan
    exited1: bool = False
    exited2: bool = False
    nash_distance: float = math.nan
    nash_fallback: bool = False
    p_malice: float = math.nan
    min_step_dist: float = math.nan


@dataclass
class Trace:
    steps: list[TraceStep]
    collided: bool
    ego_exit_time: float | None
    target_exit_time: float | None
    horizon_reached: bool

    def to_csv(self, path_or_buf) -> None:
        """Write the fixed 15-column trace CSV (deterministic formatting)."""
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            f = open(path_or_buf, "w", newline="")
            close = True
        else:
            f = path_or_buf
        try:
            f.write(",".join(TRACE_COLUMNS) + "\n")
            for st in self.steps:
                row = (st.t, st.x1, st.y1, st.v1, st.a1, st.x2, st.y2, st.v2,
                       st.a2, st.ttc, st.dist, st.w_s, st.r_tom, st.r_game,
                       st.r_total)
                f.write(",".join(format_float(v) for v in row) + "\n")
        finally:
            if close:
                f.close()


def format_float(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def trace_rows_from_csv(path: str) -> list[dict[str, float]]:
    """Read a trace CSV back as a list of per-step column dicts."""
    rows = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns in {path}: {header}")
        for line in f:
            vals = [float(v) for v in line.strip().split(",")]
            rows.append(dict(zip(TRACE_COLUMNS, vals)))
    return rows


class EgoDecider(Protocol):
    """Decision policy for the ego vehicle."""

    def begin_episode(self) -> None: ...

    def decide(self, s: JointState, history: list[TraceStep]) -> float: ...

    def transition(self, s: JointState, a_ego: float, a_target: float,
                   s_next: JointState, history: list[TraceStep], *,
                   collided: bool, done: bool) -> StepInfo | None: ...


class TargetPolicy(Protocol):
    """Behavior policy for the target vehicle."""

    def begin_episode(self) -> None: ...

    def act(self, s: JointState, history: list[TraceStep]) -> float: ...


class ConstantAccel:
    """Trivial policy commanding a fixed acceleration; usable for either role."""

    def __init__(self, accel: float = 0.0):
        self.accel = accel

    def begin_episode(self) -> None:
        pass

    def act(self, s: JointState, history: list[TraceStep]) -> float:
        return self.accel

    def decide(self, s: JointState, history: list[TraceStep]) -> float:
        return self.accel

    def transition(self, s, a_ego, a_target, s_next, history, *,
                   collided, done) -> StepInfo | None:
        return None


@dataclass
class World:
    """Owns the joint state and mechanics of one episode."""

    target_path: Path
    ego_path: Path
    dt: float
    horizon: float
    collision_radius: float
    state: JointState
    steps: list[TraceStep]
    collided: bool = False
    ego_exit_time: float | None = None
    target_exit_time: float | None = None

    @classmethod
    def create(cls, target_path: Path, ego_path: Path, dt: float, horizon: float,
               collision_radius: float, target_speed: float, ego_speed: float,
               target_s0: float = 0.0, ego_s0: float = 0.0) -> "World":
        s = JointState(initial_state(target_path, target_speed, target_s0),
                       initial_state(ego_path, ego_speed, ego_s0), 0.0)
        w = cls(target_path, ego_path, dt, horizon, collision_radius, s, [])
        if s.target.exited:
            w.target_exit_time = 0.0
        if s.ego.exited:
            w.ego_exit_time = 0.0
        return w

    def done(self) -> bool:
        both_exited = self.state.target.exited and self.state.ego.exited
        return (self.collided or both_exited
                or self.state.t >= self.horizon - 1e-9)

    def advance(self, a_ego: float, a_target: float,
                info: StepInfo | None = None) -> JointState:
        """Apply one joint action, record the trace row, return the new state."""
        s = self.state
        target_next = step_vehicle(s.target, self.target_path, a_target, self.dt)
        ego_next = step_vehicle(s.ego, self.ego_path, a_ego, self.dt)
        s_next = JointState(target_next, ego_next, s.t + self.dt)
        both_active = not (s.target.exited or s.ego.exited)
        min_dist = (_min_distance_over_step(s, s_next) if both_active
                    else math.nan)
        if both_active and min_dist < self.collision_radius:
            self.collided = True
        info = info or StepInfo()
        self.steps.append(TraceStep(
            t=s.t, x1=s.target.x, y1=s.target.y, v1=s.target.speed, a1=a_target,
            x2=s.ego.x, y2=s.ego.y, v2=s.ego.speed, a2=a_ego,
            ttc=time_to_collision(s), dist=inter_vehicle_distance(s),
            w_s=info.w_s, r_tom=info.r_tom, r_game=info.r_game,
            r_total=info.r_total, s1=s.target.s_along, s2=s.ego.s_along,
            exited1=s.target.exited, exited2=s.ego.exited,
            nash_distance=info.nash_distance, nash_fallback=info.nash_fallback,
            p_malice=info.p_malice, min_step_dist=min_dist))
        if target_next.exited and self.target_exit_time is None:
            self.target_exit_time = s_next.t
        if ego_next.exited and self.ego_exit_time is None:
            self.ego_exit_time = s_next.t
        self.state = s_next
        return s_next

    def trace(self) -> Trace:
        horizon_reached = (not self.collided
                           and not (self.state.target.exited and self.state.ego.exited))
        return Trace(self.steps, self.collided, self.ego_exit_time,
                     self.target_exit_time, horizon_reached)


def run_episode(world: World, decider: EgoDecider,
                target_policy: TargetPolicy) -> Trace:
    """Closed-loop episode: observe, decide both actions, step, repeat.

    Terminates on collision, on both vehicles exiting their paths, or at the
    horizon. Exited vehicles are frozen and take no further actions.
    """
    decider.begin_episode()
    target_policy.begin_episode()
    while not world.done():
        s = world.state
        a_ego = 0.0 if s.ego.exited else decider.decide(s, world.steps)
        a_target = 0.0 if s.target.exited else target_policy.act(s, world.steps)
        s_next = world.advance(a_ego, a_target)
        done = world.done()
        info = decider.transition(s, a_ego, a_target, s_next, world.steps,
                                  collided=world.collided, done=done)
        if info is not None:
            world.steps[-1] = replace(
                world.steps[-1], w_s=info.w_s, r_tom=info.r_tom,
                r_game=info.r_game, r_total=info.r_total,
                nash_distance=info.nash_distance,
                nash_fallback=info.nash_fallback, p_malice=info.p_malice)
    return world.trace()


def conflict_of(target_path: Path, ego_path: Path) -> Crossing | None:
    """Conflict point between the target's and the ego's paths.

    Wrapper fixing the argument order used throughout the package (path1 is
    the target's, path2 the ego's, matching vehicle indexing).
    """
    return conflict_point(target_path, ego_path)
