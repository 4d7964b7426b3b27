"""Runtime decision engine and the training environment.

During training the ego explores epsilon-greedily over the Q-table while the
reward stack (theory-of-mind reward plus Nash-proximity game reward) scores
each executed joint action. At evaluation time the decider runs a one-step
lookahead, scoring every candidate acceleration by its immediate stack reward
plus the discounted table value of the predicted next state; this keeps the
ablation stack (fixed/adaptive weights, ToM on/off) in force on a shared
trained table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qlearn
from .game import GameMatrix, build_matrix, find_pure_nash, game_reward, nearest_nash
from .payoffs import PayoffContext, PayoffParams, predict_joint, resolve_weights
from .qlearn import BinSpec, LearnerParams, QTable, StateKey, discretize, total_reward
from .scenarios import (CaseSetup, DeciderConfig, ScenarioConfig,
                        make_target_policy)
from .sim import JointState, StepInfo, TraceStep, World, run_episode, time_to_collision
from .tom import BeliefNetwork, default_network, infer_malice, observe_target, tom_reward


def payoff_context(scenario: ScenarioConfig) -> PayoffContext:
    return PayoffContext(scenario.target_path, scenario.ego_path,
                         scenario.center, scenario.dt)


class RewardStack:
    """Per-step reward computation shared by training and evaluation."""

    def __init__(self, scenario: ScenarioConfig, payoff: PayoffParams,
                 decider_cfg: DeciderConfig, tom_net: BeliefNetwork | None,
                 w1: float, w2: float, collision_penalty: float):
        self.scenario = scenario
        self.payoff = payoff
        self.cfg = decider_cfg
        self.tom_net = tom_net or default_network()
        self.w1 = w1
        self.w2 = w2
        self.collision_penalty = collision_penalty
        self.ctx = payoff_context(scenario)
        self._game_cache: tuple[float, GameMatrix, set] | None = None
        self._belief_cache: tuple[float, float] | None = None

    def begin_episode(self) -> None:
        self._game_cache = None
        self._belief_cache = None

    def allowed_ego_actions(self, s: JointState) -> tuple[float, ...]:
        """Legal-speed governor: drop actions that would exceed v_max."""
        v = s.ego.speed
        allowed = tuple(a for a in self.payoff.actions
                        if a <= 0.0 or v + a * self.scenario.dt
                        <= self.scenario.v_max + 1e-9)
        return allowed if allowed else (self.payoff.actions[0],)

    def game_at(self, s: JointState) -> tuple[GameMatrix, set]:
        if self._game_cache is not None and self._game_cache[0] == s.t:
            return self._game_cache[1], self._game_cache[2]
        m = build_matrix(s, self.payoff, self.ctx,
                         self.cfg.active_fixed_weights(),
                         ego_actions=self.allowed_ego_actions(s))
        eq = find_pure_nash(m)
        self._game_cache = (s.t, m, eq)
        return m, eq

    def p_malice(self, s: JointState, history: list[TraceStep]) -> float:
        """Raw malice posterior from the target's behavior so far."""
        if self._belief_cache is not None and self._belief_cache[0] == s.t:
            return self._belief_cache[1]
        samples = [(st.v1, st.a1, (st.x1, st.y1)) for st in history]
        samples.append((s.target.speed, s.target.a_next, s.target.position))
        conflict = self.scenario.conflict
        obs = observe_target(samples, self.scenario.v_max,
                             conflict.point if conflict else None)
        p = infer_malice(self.tom_net, obs)
        self._belief_cache = (s.t, p)
        return p

    def threat_malice(self, s: JointState, history: list[TraceStep]) -> float:
        """Malice probability gated to zero once the target is no threat.

        A target that has exited its path, or cleared the conflict point, can
        no longer collide with the ego, so it stops influencing the reward.
        """
        if s.target.exited:
            return 0.0
        c = self.scenario.conflict
        if c is not None and s.target.s_along > c.s1 + self.scenario.collision_radius:
            return 0.0
        return self.p_malice(s, history)

    def candidate_reward(self, s: JointState, a_ego: float, a_target: float,
                         p_malice: float) -> float:
        """Stack reward of a joint action at state s (no collision override)."""
        m, eq = self.game_at(s)
        r_game = game_reward(nearest_nash(m, eq, (a_ego, a_target)),
                             self.cfg.delta)
        if not self.cfg.use_tom:
            return r_game
        r_tom = tom_reward(a_ego, p_malice, self.cfg.epsilon_mod)
        return self.w1 * r_tom + self.w2 * r_game

    def executed_step(self, s: JointState, a_ego: float, a_target: float,
                      history: list[TraceStep], collided: bool,
                      ) -> tuple[StepInfo, float]:
        """Realized rewards and diagnostics for the executed joint action."""
        m, eq = self.game_at(s)
        nr = nearest_nash(m, eq, (a_ego, a_target))
        r_game = game_reward(nr, self.cfg.delta)
        if self.cfg.use_tom:
            p = self.threat_malice(s, history)
            r_tom = tom_reward(a_ego, p, self.cfg.epsilon_mod)
            r = total_reward(r_tom, r_game, self.w1, self.w2, collided,
                             self.collision_penalty)
        else:
            p = math.nan
            r_tom = math.nan
            r = total_reward(0.0, r_game, 0.0, 1.0, collided,
                             self.collision_penalty)
        w_s = resolve_weights(time_to_collision(s), self.payoff,
                              self.cfg.active_fixed_weights())[0]
        info = StepInfo(w_s=w_s, r_tom=r_tom, r_game=r_game, r_total=r,
                        nash_distance=nr.distance, nash_fallback=nr.fallback,
                        p_malice=p)
        return info, r


class AseqDecider:
    """Evaluation-time ego policy: stack reward plus discounted table value."""

    def __init__(self, scenario: ScenarioConfig, payoff: PayoffParams,
                 decider_cfg: DeciderConfig, table: QTable,
                 tom_net: BeliefNetwork | None = None,
                 learner: LearnerParams = LearnerParams()):
        self.scenario = scenario
        self.payoff = payoff
        self.cfg = decider_cfg
        self.table = table
        self.gamma = learner.gamma
        self.stack = RewardStack(scenario, payoff, decider_cfg, tom_net,
                                 decider_cfg.w1, decider_cfg.w2,
                                 learner.collision_penalty)
        self.ctx = self.stack.ctx

    def begin_episode(self) -> None:
        self.stack.begin_episode()

    def _key_of(self, s: JointState) -> StateKey:
        return discretize(s, self.scenario.ego_dist_to_conflict(s),
                          self.scenario.target_dist_to_conflict(s),
                          time_to_collision(s), self.table.bins)

    def decide(self, s: JointState, history: list[TraceStep]) -> float:
        a_hat = 0.0 if s.target.exited else s.target.a_next
        p = self.stack.threat_malice(s, history) if self.cfg.use_tom else 0.0
        best_a = None
        best_score = -math.inf
        for a in self.stack.allowed_ego_actions(s):
            r = self.stack.candidate_reward(s, a, a_hat, p)
            nxt = predict_joint(s, a, a_hat, self.ctx)
            score = r + self.gamma * self.table.max_value(self._key_of(nxt))
            if (score > best_score + 1e-12
                    or (abs(score - best_score) <= 1e-12 and best_a is not None
                        and (abs(a), a) < (abs(best_a), best_a))):
                best_score = score
                best_a = a
        return best_a

    def transition(self, s, a_ego, a_target, s_next, history, *,
                   collided, done) -> StepInfo:
        info, _ = self.stack.executed_step(s, a_ego, a_target, history, collided)
        return info


@dataclass
class TrainingOptions:
    """Per-episode randomization of the training scenario."""

    malicious_prob: float = 0.5
    ego_speed_range: tuple[float, float] = (9.5, 12.5)
    malicious_speed_range: tuple[float, float] = (13.2, 18.0)
    benign_speed_range: tuple[float, float] = (8.0, 12.0)
    start_offset_range: tuple[float, float] = (0.0, 5.0)

    def sample(self, base: ScenarioConfig, rng: np.random.Generator,
               ) -> ScenarioConfig:
        from dataclasses import replace
        malicious = rng.random() < self.malicious_prob
        speed_range = (self.malicious_speed_range if malicious
                       else self.benign_speed_range)
        return replace(
            base,
            target_policy="malicious" if malicious else "benign",
            target_speed=float(rng.uniform(*speed_range)),
            ego_speed=float(rng.uniform(*self.ego_speed_range)),
            target_s0=base.target_s0 + float(rng.uniform(*self.start_offset_range)),
            ego_s0=base.ego_s0 + float(rng.uniform(*self.start_offset_range)))


class TrafficEnv:
    """qlearn.Environment over the two-vehicle world.

    Episodes are terminal on collision, on the ego exiting its path, or at
    the horizon; the target type and initial conditions are resampled per
    episode from the training options.
    """

    def __init__(self, base: ScenarioConfig, payoff: PayoffParams,
                 decider_cfg: DeciderConfig, learner: LearnerParams,
                 tom_net: BeliefNetwork | None = None,
                 options: TrainingOptions | None = None,
                 randomize: bool = True):
        self.base = base
        self.payoff = payoff
        self.decider_cfg = decider_cfg
        self.learner = learner
        self.tom_net = tom_net
        self.options = options or TrainingOptions()
        self.randomize = randomize
        self.actions = tuple(payoff.actions)
        self.bins = BinSpec()
        self.scenario: ScenarioConfig = base
        self.world: World | None = None
        self.stack: RewardStack | None = None
        self.target_policy = None

    def _key(self, s: JointState) -> StateKey:
        return discretize(s, self.scenario.ego_dist_to_conflict(s),
                          self.scenario.target_dist_to_conflict(s),
                          time_to_collision(s), self.bins)

    def allowed_actions(self) -> tuple[float, ...]:
        return self.stack.allowed_ego_actions(self.world.state)

    def reset(self, rng: np.random.Generator) -> StateKey:
        self.scenario = (self.options.sample(self.base, rng)
                         if self.randomize else self.base)
        sc = self.scenario
        self.world = World.create(sc.target_path, sc.ego_path, sc.dt, sc.horizon,
                                  sc.collision_radius, sc.target_speed,
                                  sc.ego_speed, sc.target_s0, sc.ego_s0)
        self.stack = RewardStack(sc, self.payoff, self.decider_cfg, self.tom_net,
                                 self.learner.w1, self.learner.w2,
                                 self.learner.collision_penalty)
        self.stack.begin_episode()
        self.target_policy = make_target_policy(sc)
        self.target_policy.begin_episode()
        return self._key(self.world.state)

    def step(self, action: float) -> tuple[StateKey, float, bool]:
        w = self.world
        s = w.state
        a_target = (0.0 if s.target.exited
                    else self.target_policy.act(s, w.steps))
        # rewards are defined on the pre-step state; the collision override is
        # applied after the step once the outcome is known
        history = w.steps
        w.advance(action, a_target)
        collided = w.collided
        info, r = self.stack.executed_step(s, action, a_target,
                                           history[:-1], collided)
        w.steps[-1] = _with_info(w.steps[-1], info)
        s_next = w.state
        done = collided or s_next.ego.exited or w.done()
        return self._key(s_next), r, done


def _with_info(step: TraceStep, info: StepInfo) -> TraceStep:
    from dataclasses import replace
    return replace(step, w_s=info.w_s, r_tom=info.r_tom, r_game=info.r_game,
                   r_total=info.r_total, nash_distance=info.nash_distance,
                   nash_fallback=info.nash_fallback, p_malice=info.p_malice)


def train(base: ScenarioConfig, payoff: PayoffParams, decider_cfg: DeciderConfig,
          learner: LearnerParams, seed: int,
          tom_net: BeliefNetwork | None = None,
          options: TrainingOptions | None = None,
          table: QTable | None = None,
          randomize: bool = True) -> qlearn.TrainResult:
    """Full training loop on the traffic world (optionally fine-tuning a table)."""
    env = TrafficEnv(base, payoff, decider_cfg, learner, tom_net, options,
                     randomize)
    return qlearn.train_env(env, learner, seed, table)


def evaluate_case(setup: CaseSetup, table: QTable,
                  tom_net: BeliefNetwork | None = None,
                  learner: LearnerParams = LearnerParams(),
                  seed: int | None = None):
    """Run one evaluation episode of a case with the trained table.

    With a seed, initial conditions are jittered (multi-seed robustness
    evaluation); without one the canonical setup runs unperturbed.
    """
    from .scenarios import jittered
    sc = setup.scenario
    if seed is not None:
        sc = jittered(sc, np.random.default_rng(seed))
    world = World.create(sc.target_path, sc.ego_path, sc.dt, sc.horizon,
                         sc.collision_radius, sc.target_speed, sc.ego_speed,
                         sc.target_s0, sc.ego_s0)
    decider = AseqDecider(sc, setup.payoff, setup.decider, table, tom_net,
                          learner)
    trace = run_episode(world, decider, make_target_policy(sc))
    return trace, sc
