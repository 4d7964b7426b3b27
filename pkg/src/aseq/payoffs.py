"""Per-vehicle payoff functions and the TTC-adaptive weighting scheme.

All payoffs are dimensionless and kept in [0, 1] so they combine cleanly in
the two-player payoff matrix. The ego uses safety/efficiency/comfort payoffs
with weights that shift toward safety as the time to collision shrinks; the
(modeled) malicious target uses its own variant that trades proximity and
speed against collision time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import Vec2, euclidean_distance
from .sim import JointState, step_vehicle, time_to_collision

DEFAULT_ACTIONS = (-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)

# Candidate decisions that stop the vehicle would divide by zero in the
# crossing-time estimate; clamp the effective speed at this floor instead.
V_FLOOR = 0.1


@dataclass(frozen=True)
class PayoffParams:
    """Constants of the payoff functions; every one is config-overridable."""

    beta: float = 0.05          # 1/m, center-proximity decay rate
    k1: float = 1.0             # safety payoff sensitivity to TTC
    k2: float = 1.0             # efficiency payoff sensitivity to delay
    k3: float = 0.5             # comfort payoff sensitivity to jerk
    k: float = 1.0              # adaptive weight curve sensitivity
    v_threshold: float = 2.0    # m/s, below this the slow-travel branch applies
    ttc_min: float = 1.0        # s
    ttc_crit: float = 4.0       # s, adaptive weighting kicks in below this
    a_min: float = -5.0         # m/s^2
    a_max: float = 3.0          # m/s^2
    v_max: float = 12.0         # m/s, legal maximum speed
    decay_distance: float = 10.0   # m, malicious safety distance constant
    decay_ttc: float = 2.0         # s, malicious safety TTC constant
    # seconds over which a candidate acceleration is held when scoring its
    # safety (TTC) and efficiency (crossing-time speed) consequences; at one
    # decision period the TTC response across candidates is nearly flat and
    # the efficiency term is numb to restarting from a standstill
    projection: float = 1.5
    actions: tuple[float, ...] = DEFAULT_ACTIONS

    def __post_init__(self) -> None:
        if min(self.beta, self.k1, self.k2, self.k3, self.k,
               self.decay_distance, self.decay_ttc) <= 0:
            raise ValueError("payoff constants must be positive")
        if not (self.ttc_crit > self.ttc_min > 0):
            raise ValueError("need ttc_crit > ttc_min > 0")
        if not (self.a_min < 0 < self.a_max):
            raise ValueError("need a_min < 0 < a_max")
        if not (0 < self.v_threshold < self.v_max):
            raise ValueError("need 0 < v_threshold < v_max")
        if self.efficiency_projection <= 0:
            raise ValueError("efficiency_projection must be positive")
        if any(a < self.a_min - 1e-9 or a > self.a_max + 1e-9 for a in self.actions):
            raise ValueError("action set must lie within [a_min, a_max]")


@dataclass(frozen=True)
class PayoffBreakdown:
    """One payoff evaluation with the weight triple in force at the time."""

    f_s: float
    f_e: float
    f_c: float
    w_s: float
    w_e: float
    w_c: float
    total: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "total",
            self.w_s * self.f_s + self.w_e * self.f_e + self.w_c * self.f_c)


def distance_decay(pos: Vec2, center: Vec2, beta: float) -> float:
    """Exponential decay in the distance to the intersection center."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return math.exp(-beta * euclidean_distance(pos, center))


def safety_payoff(next_speed: float, next_pos: Vec2, ttc: float,
                  p: PayoffParams, center: Vec2) -> float:
    """Safety payoff of a candidate decision.

    Slow travel (at or below the threshold speed) is scored by proximity decay
    at the predicted position; otherwise the payoff grows with the margin of
    TTC above its minimum. Values below the TTC minimum clamp to 0 so the
    payoff stays on the common [0, 1] scale.
    """
    if next_speed <= p.v_threshold:
        return distance_decay(next_pos, center, p.beta)
    if math.isinf(ttc):
        return 1.0
    return max(0.0, 1.0 - math.exp(-p.k1 * (ttc - p.ttc_min)))


def efficiency_payoff(t_remaining: float, t_min: float, k2: float) -> float:
    """Exponential decay in the relative crossing-time delay."""
    if t_min <= 0:
        raise ValueError("t_min must be positive")
    return math.exp(-k2 * (t_remaining - t_min) / t_min)


def comfort_payoff(a_prev: float, a_cand: float, p: PayoffParams) -> float:
    """Penalty for acceleration changes, normalized by the actuation span."""
    raw = 1.0 - p.k3 * abs(a_cand - a_prev) / (p.a_max - p.a_min)
    return min(1.0, max(0.0, raw))


def adaptive_safety_weight(ttc: float, p: PayoffParams) -> float:
    """Safety weight rising from 1/3 toward 1 as TTC falls below critical."""
    if ttc > p.ttc_crit:
        return 1.0 / 3.0
    return 1.0 / 3.0 + (2.0 / 3.0) * (1.0 - math.exp(-p.k * (p.ttc_crit / ttc)))


def split_weights(w_s: float) -> tuple[float, float]:
    """Efficiency and comfort share the weight left over from safety."""
    rest = (1.0 - w_s) / 2.0
    return rest, rest


def _crossing_times(next_speed: float, remaining: float,
                    p: PayoffParams) -> tuple[float, float]:
    # Effective speed clamped to [V_FLOOR, v_max] keeps t_remaining >= t_min.
    v_eff = min(max(next_speed, V_FLOOR), p.v_max)
    return remaining / v_eff, remaining / p.v_max


@dataclass(frozen=True)
class PayoffContext:
    """Geometry and timing a payoff evaluation needs beyond the joint state."""

    target_path: object
    ego_path: object
    center: Vec2
    dt: float


def predict_joint(s: JointState, a_ego: float, a_target: float,
             ctx: PayoffContext) -> JointState:
    target_next = (s.target if s.target.exited
                   else step_vehicle(s.target, ctx.target_path, a_target, ctx.dt))
    ego_next = (s.ego if s.ego.exited
                else step_vehicle(s.ego, ctx.ego_path, a_ego, ctx.dt))
    return JointState(target_next, ego_next, s.t + ctx.dt)


def ego_payoff_from(s: JointState, nxt: JointState, a_ego: float,
                    p: PayoffParams, ctx: PayoffContext,
                    fixed_weights: tuple[float, float, float] | None = None,
                    ttc: float | None = None) -> PayoffBreakdown:
    """Ego payoff given a precomputed one-step prediction ``nxt``."""
    if ttc is None:
        ttc = time_to_collision(nxt)
    f_s = safety_payoff(nxt.ego.speed, nxt.ego.position, ttc, p, ctx.center)
    remaining = max(0.0, ctx.ego_path.length - nxt.ego.s_along)
    if remaining <= 0.0:
        f_e = 1.0
    else:
        v_eff = s.ego.speed + a_ego * p.efficiency_projection
        t_rem, t_min = _crossing_times(v_eff, remaining, p)
        f_e = efficiency_payoff(t_rem, t_min, p.k2)
    f_c = comfort_payoff(s.ego.a_next, a_ego, p)
    w_s, w_e, w_c = resolve_weights(ttc, p, fixed_weights)
    return PayoffBreakdown(f_s, f_e, f_c, w_s, w_e, w_c)


def ego_payoff(s: JointState, a_ego: float, a_target: float, p: PayoffParams,
               ctx: PayoffContext,
               fixed_weights: tuple[float, float, float] | None = None,
               ) -> PayoffBreakdown:
    """Ego payoff for a joint candidate action, one-step lookahead.

    Weights are either the fixed triple given (must sum to 1) or the adaptive
    scheme driven by the predicted TTC.
    """
    nxt = predict_joint(s, a_ego, a_target, ctx)
    return ego_payoff_from(s, nxt, a_ego, p, ctx, fixed_weights)


def malicious_payoff_from(nxt: JointState, p: PayoffParams,
                          fixed_weights: tuple[float, float, float] | None = None,
                          ttc: float | None = None) -> PayoffBreakdown:
    """Malicious-model target payoff given a precomputed prediction."""
    if ttc is None:
        ttc = time_to_collision(nxt)
    d = euclidean_distance(nxt.target.position, nxt.ego.position)
    f_s = malicious_safety(d, ttc, p)
    f_e = min(1.0, nxt.target.speed / p.v_max)
    f_c = 0.0
    w_s, w_e, w_c = resolve_weights(ttc, p, fixed_weights)
    return PayoffBreakdown(f_s, f_e, f_c, w_s, w_e, w_c)


def malicious_payoff(s: JointState, a_target: float, a_ego: float,
                     p: PayoffParams, ctx: PayoffContext,
                     fixed_weights: tuple[float, float, float] | None = None,
                     ) -> PayoffBreakdown:
    """Target payoff under the malicious-behavior model.

    Safety prefers small separation and small TTC margins (decayed in both),
    efficiency is plain speed ratio, comfort is ignored.
    """
    nxt = predict_joint(s, a_ego, a_target, ctx)
    return malicious_payoff_from(nxt, p, fixed_weights)


def malicious_safety(d: float, ttc: float, p: PayoffParams) -> float:
    ttc_term = 1.0 if math.isinf(ttc) else 1.0 - math.exp(-ttc / p.decay_ttc)
    return math.exp(-d / p.decay_distance) * ttc_term


def total_payoff_ego(s: JointState, a_cand: float, p: PayoffParams,
                     ctx: PayoffContext,
                     fixed_weights: tuple[float, float, float] | None = None,
                     ) -> PayoffBreakdown:
    """Ego payoff of a candidate action, opponent held at its last acceleration."""
    return ego_payoff(s, a_cand, s.target.a_next, p, ctx, fixed_weights)


def total_payoff_malicious(s: JointState, a_cand: float, p: PayoffParams,
                           ctx: PayoffContext,
                           fixed_weights: tuple[float, float, float] | None = None,
                           ) -> PayoffBreakdown:
    """Malicious-model target payoff, opponent held at its last acceleration."""
    return malicious_payoff(s, a_cand, s.ego.a_next, p, ctx, fixed_weights)


def resolve_weights(ttc: float, p: PayoffParams,
                    fixed: tuple[float, float, float] | None,
                    ) -> tuple[float, float, float]:
    if fixed is not None:
        if abs(sum(fixed) - 1.0) > 1e-9:
            raise ValueError("fixed weights must sum to 1")
        return fixed
    w_s = adaptive_safety_weight(ttc, p)
    w_e, w_c = split_weights(w_s)
    return w_s, w_e, w_c
