"""Two-player game over joint discrete accelerations.

Builds the payoff matrix from the payoff module, finds pure-strategy Nash
equilibria by mutual best response, picks the equilibrium nearest to the
current joint action, and turns that proximity into a reward.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .payoffs import (PayoffContext, PayoffParams, ego_payoff_from,
                      malicious_payoff_from)
from .sim import JointState, step_vehicle, time_to_collision

log = logging.getLogger(__name__)

BEST_RESPONSE_TIE = 1e-9


@dataclass
class GameMatrix:
    """Dense joint-action payoff table; rows index ego actions, columns target."""

    ego_actions: tuple[float, ...]
    target_actions: tuple[float, ...]
    u_ego: np.ndarray     # shape (n_ego, n_target)
    u_target: np.ndarray  # shape (n_ego, n_target)

    def __post_init__(self) -> None:
        shape = (len(self.ego_actions), len(self.target_actions))
        if self.u_ego.shape != shape or self.u_target.shape != shape:
            raise ValueError("payoff array shape does not match action lists")
        if not (np.isfinite(self.u_ego).all() and np.isfinite(self.u_target).all()):
            raise ValueError("payoff matrix must be finite")


@dataclass(frozen=True)
class NashResult:
    """Nearest equilibrium against the current joint action.

    ``nearest`` is a (ego_accel, target_accel) pair; when no pure equilibrium
    exists it is the welfare-maximizing cell and ``fallback`` is set.
    """

    equilibria: tuple[tuple[int, int], ...]
    nearest: tuple[float, float]
    distance: float
    fallback: bool = False


def build_matrix(s: JointState, p: PayoffParams, ctx: PayoffContext,
                 fixed_weights: tuple[float, float, float] | None = None,
                 ego_actions: tuple[float, ...] | None = None,
                 ) -> GameMatrix:
    """Evaluate both players' payoffs for every joint candidate action.

    ``ego_actions`` restricts the ego's side of the game (the legal-speed
    governor passes the currently permitted subset). When the target has
    exited, the game degenerates to a single-player one: its action set
    collapses to holding (0) and its payoff is constant.
    """
    if ego_actions is None:
        ego_actions = p.actions
    if s.target.exited:
        target_actions: tuple[float, ...] = (0.0,)
    else:
        target_actions = p.actions
    n, m = len(ego_actions), len(target_actions)
    # each vehicle's prediction depends only on its own action
    ego_nexts = [step_vehicle(s.ego, ctx.ego_path, a, ctx.dt)
                 if not s.ego.exited else s.ego for a in ego_actions]
    target_nexts = [step_vehicle(s.target, ctx.target_path, a, ctx.dt)
                    if not s.target.exited else s.target for a in target_actions]
    u_ego = np.empty((n, m))
    u_target = np.empty((n, m))
    for i, a_e in enumerate(ego_actions):
        for j, a_t in enumerate(target_actions):
            nxt = JointState(target_nexts[j], ego_nexts[i], s.t + ctx.dt)
            ttc = time_to_collision(nxt)
            u_ego[i, j] = ego_payoff_from(s, nxt, a_e, p, ctx, fixed_weights,
                                          ttc).total
            if s.target.exited:
                u_target[i, j] = 0.0
            else:
                u_target[i, j] = malicious_payoff_from(nxt, p, fixed_weights,
                                                       ttc).total
    return GameMatrix(tuple(ego_actions), tuple(target_actions), u_ego, u_target)


def find_pure_nash(m: GameMatrix) -> set[tuple[int, int]]:
    """All cells where each player's action is a best response to the other's.

    Payoffs within ``BEST_RESPONSE_TIE`` of the column/row maximum count as
    best responses, so exact ties yield multiple equilibria.
    """
    col_max = m.u_ego.max(axis=0)          # best ego payoff per target action
    row_max = m.u_target.max(axis=1)       # best target payoff per ego action
    ego_br = m.u_ego >= col_max[None, :] - BEST_RESPONSE_TIE
    target_br = m.u_target >= row_max[:, None] - BEST_RESPONSE_TIE
    rows, cols = np.nonzero(ego_br & target_br)
    return {(int(i), int(j)) for i, j in zip(rows, cols)}


def nearest_nash(m: GameMatrix, equilibria: set[tuple[int, int]],
                 current: tuple[float, float]) -> NashResult:
    """Pick the equilibrium closest to the current joint action.

    Distance is the Euclidean norm over (ego, target) acceleration pairs. Ties
    break to the lowest ego-action index, then the lowest target index. With
    no pure equilibrium, the welfare-maximizing cell stands in (logged).
    """
    if equilibria:
        cells = sorted(equilibria)
        fallback = False
    else:
        welfare = m.u_ego + m.u_target
        best = np.unravel_index(int(np.argmax(welfare)), welfare.shape)
        cells = [(int(best[0]), int(best[1]))]
        fallback = True
        log.debug("no pure Nash equilibrium; welfare fallback at %s", cells[0])
    best_cell = None
    best_dist = math.inf
    for i, j in cells:
        d = math.hypot(m.ego_actions[i] - current[0],
                       m.target_actions[j] - current[1])
        if d < best_dist - 1e-15:
            best_dist = d
            best_cell = (i, j)
    i, j = best_cell
    return NashResult(tuple(sorted(equilibria)),
                      (m.ego_actions[i], m.target_actions[j]),
                      best_dist, fallback)


def game_reward(nr: NashResult, delta: float) -> float:
    """Sigmoid-shaped reward for proximity to the nearest equilibrium.

    1 at the equilibrium itself, strictly decreasing in distance, tending to 0
    far away.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    return 2.0 / (1.0 + math.exp(delta * nr.distance))
