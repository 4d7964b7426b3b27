"""Tabular Q-learning over a discretized joint traffic state.

The continuous joint state is binned by distance-to-conflict, speed, and TTC;
unseen keys read as zero. The trainer is generic over a small environment
protocol so the same update loop runs on the traffic world and on tiny test
MDPs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .sim import JointState

DIST_EDGES = (5.0, 15.0, 30.0, 60.0)
SPEED_EDGES = (2.0, 6.0, 10.0, 13.0)
TTC_EDGES = (1.0, 2.0, 4.0, 8.0)
EXITED_DIST_BIN = len(DIST_EDGES) + 1  # sentinel bin after the open-ended one

QTABLE_FORMAT_VERSION = 1

StateKey = tuple[int, int, int, int, int]


@dataclass(frozen=True)
class BinSpec:
    dist_edges: tuple[float, ...] = DIST_EDGES
    speed_edges: tuple[float, ...] = SPEED_EDGES
    ttc_edges: tuple[float, ...] = TTC_EDGES

    def metadata(self, actions: Sequence[float]) -> dict:
        return {"dist_edges": list(self.dist_edges),
                "speed_edges": list(self.speed_edges),
                "ttc_edges": list(self.ttc_edges),
                "actions": list(actions)}


def _bin_value(x: float, edges: tuple[float, ...]) -> int:
    for i, e in enumerate(edges):
        if x < e:
            return i
    return len(edges)


def discretize(s: JointState, ego_dist: float, target_dist: float, ttc: float,
               bins: BinSpec = BinSpec()) -> StateKey:
    """Map a joint state to its discrete key.

    ``ego_dist``/``target_dist`` are signed distances to the conflict point
    along each path (negative once passed; +inf with no conflict). Exited
    vehicles land in a dedicated sentinel bin.
    """
    e_dist = (EXITED_DIST_BIN if s.ego.exited
              else _bin_value(ego_dist, bins.dist_edges))
    t_dist = (EXITED_DIST_BIN if s.target.exited
              else _bin_value(target_dist, bins.dist_edges))
    e_speed = _bin_value(s.ego.speed, bins.speed_edges)
    t_speed = _bin_value(s.target.speed, bins.speed_edges)
    ttc_bin = _bin_value(ttc, bins.ttc_edges)  # inf falls in the top bin
    return (e_dist, t_dist, e_speed, t_speed, ttc_bin)


@dataclass
class QTable:
    """State-key -> per-action value estimates, zero-initialized on first read."""

    actions: tuple[float, ...]
    bins: BinSpec = BinSpec()
    values: dict[StateKey, np.ndarray] = field(default_factory=dict)
    visits: dict[tuple[StateKey, int], int] = field(default_factory=dict)

    def row(self, key: StateKey) -> np.ndarray:
        r = self.values.get(key)
        if r is None:
            r = np.zeros(len(self.actions))
            self.values[key] = r
        return r

    def lookup(self, key: StateKey) -> np.ndarray:
        """Read-only row access; missing keys read as all-zeros."""
        r = self.values.get(key)
        return r if r is not None else np.zeros(len(self.actions))

    def max_value(self, key: StateKey) -> float:
        return float(self.lookup(key).max())

    def action_index(self, action: float) -> int:
        for i, a in enumerate(self.actions):
            if a == action:
                return i
        raise ValueError(f"action {action} not in action set")

    def metadata(self) -> dict:
        return self.bins.metadata(self.actions)

    def save(self, path: str, extra: dict | None = None) -> None:
        data = {
            "format_version": QTABLE_FORMAT_VERSION,
            "metadata": self.metadata(),
            "q": {",".join(map(str, k)): [float(v) for v in row]
                  for k, row in sorted(self.values.items())},
            "visits": {",".join(map(str, (*k, a))): c
                       for (k, a), c in sorted(self.visits.items())},
        }
        if extra:
            data["extra"] = extra
        with open(path, "w") as f:
            json.dump(data, f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path: str, expected: "QTable | None" = None) -> "QTable":
        """Load a table; refuses artifacts whose bin metadata mismatches.

        ``expected`` supplies the current configuration's action set and bin
        edges. A mismatch raises MetadataMismatchError so stale tables never
        silently misbin.
        """
        with open(path) as f:
            data = json.load(f)
        if data.get("format_version") != QTABLE_FORMAT_VERSION:
            raise MetadataMismatchError(
                f"unsupported table format {data.get('format_version')!r}")
        md = data["metadata"]
        bins = BinSpec(tuple(md["dist_edges"]), tuple(md["speed_edges"]),
                       tuple(md["ttc_edges"]))
        actions = tuple(md["actions"])
        if expected is not None:
            if expected.metadata() != md:
                raise MetadataMismatchError(
                    "table bin/action metadata does not match the current config")
        table = cls(actions, bins)
        for k, row in data["q"].items():
            key = tuple(int(x) for x in k.split(","))
            table.values[key] = np.asarray(row, dtype=float)
        for k, c in data.get("visits", {}).items():
            parts = [int(x) for x in k.split(",")]
            table.visits[(tuple(parts[:-1]), parts[-1])] = c
        return table


class MetadataMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerParams:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.99
    epsilon_floor: float = 0.05
    w1: float = 0.5      # weight of the theory-of-mind reward
    w2: float = 0.5      # weight of the game reward
    episodes: int = 500
    collision_penalty: float = -10.0

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        for e in (self.epsilon_start, self.epsilon_floor):
            if not 0 <= e <= 1:
                raise ValueError("exploration rates must be in [0, 1]")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError("reward weights must sum to 1")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")

    def epsilon_at(self, episode: int) -> float:
        return max(self.epsilon_floor,
                   self.epsilon_start * self.epsilon_decay ** episode)


def total_reward(r_tom: float, r_game: float, w1: float, w2: float,
                 collided: bool = False,
                 collision_penalty: float = -10.0) -> float:
    """Weighted reward combination; collision steps override with the penalty."""
    if abs(w1 + w2 - 1.0) > 1e-9:
        raise ValueError("reward weights must sum to 1")
    if collided:
        return collision_penalty
    return w1 * r_tom + w2 * r_game


def q_update(q: QTable, key: StateKey, action: float, reward: float,
             next_key: StateKey | None, p: LearnerParams) -> None:
    """One temporal-difference backup; terminal transitions pass next_key=None."""
    if not math.isfinite(reward):
        raise ValueError(f"non-finite reward {reward!r}")
    i = q.action_index(action)
    row = q.row(key)
    future = 0.0 if next_key is None else q.max_value(next_key)
    row[i] += p.alpha * (reward + p.gamma * future - row[i])
    q.visits[(key, i)] = q.visits.get((key, i), 0) + 1


def greedy_action(q: QTable, key: StateKey,
                  allowed: Sequence[float] | None = None) -> float:
    """Best-value action; ties prefer the smallest magnitude, braking first."""
    row = q.lookup(key)
    pool = q.actions if allowed is None else tuple(allowed)
    values = {a: row[q.action_index(a)] for a in pool}
    best = max(values.values())
    candidates = [a for a, v in values.items() if v >= best - 1e-12]
    return min(candidates, key=lambda a: (abs(a), a))


def select_action(q: QTable, key: StateKey, epsilon: float,
                  rng: np.random.Generator,
                  allowed: Sequence[float] | None = None) -> float:
    """Epsilon-greedy draw: exploit unless u <= epsilon, else uniform action."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    pool = q.actions if allowed is None else tuple(allowed)
    if rng.random() > epsilon:
        return greedy_action(q, key, pool)
    return pool[int(rng.integers(len(pool)))]


class Environment(Protocol):
    """Episode interface the generic trainer drives."""

    actions: tuple[float, ...]

    def reset(self, rng: np.random.Generator) -> StateKey: ...

    def step(self, action: float) -> tuple[StateKey | None, float, bool]:
        """Apply the action; returns (next_key, reward, done).

        next_key is None for terminal transitions (the backup bootstraps 0).
        """
        ...


@dataclass
class TrainResult:
    table: QTable
    curve: list[float]          # per-episode mean reward
    epsilons: list[float]


def train_env(env: Environment, p: LearnerParams, seed: int,
              table: QTable | None = None) -> TrainResult:
    """Run the full training loop on any environment.

    Deterministic for a given seed. Pass an existing table to fine-tune it in
    place; otherwise a fresh zero table is created.
    """
    rng = np.random.default_rng(seed)
    q = table if table is not None else QTable(tuple(env.actions))
    if tuple(q.actions) != tuple(env.actions):
        raise MetadataMismatchError("table action set does not match environment")
    curve: list[float] = []
    epsilons: list[float] = []
    for ep in range(p.episodes):
        eps = p.epsilon_at(ep)
        epsilons.append(eps)
        key = env.reset(rng)
        rewards: list[float] = []
        done = False
        while not done:
            allowed = getattr(env, "allowed_actions", lambda: None)()
            action = select_action(q, key, eps, rng, allowed)
            next_key, reward, done = env.step(action)
            q_update(q, key, action, reward, next_key if not done else None, p)
            rewards.append(reward)
            if next_key is None:
                break
            key = next_key
        curve.append(sum(rewards) / len(rewards) if rewards else 0.0)
    return TrainResult(q, curve, epsilons)


def curve_slope(curve: Sequence[float], window: int = 100) -> tuple[float, float]:
    """Linear slope and mean of the last ``window`` points of a curve."""
    tail = np.asarray(curve[-window:], dtype=float)
    if len(tail) < 2:
        return 0.0, float(tail.mean()) if len(tail) else 0.0
    x = np.arange(len(tail), dtype=float)
    slope = float(np.polyfit(x, tail, 1)[0])
    return slope, float(tail.mean())
