"""First-order theory-of-mind inference over the target's latent malice.

A small discrete Bayesian network (naive-Bayes star: malicious -> speed_bin,
accel_bin, yielding) is queried by exact variable elimination each decision
step. Its conditional tables can be fitted from labeled episode corpora with
Laplace smoothing; built-in defaults carry the right likelihood-ratio
directions until a fitted network is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import yaml

from .geometry import Vec2, euclidean_distance

SPEED_BINS = ("under_limit", "near_limit", "over_limit")
ACCEL_BINS = ("braking", "coasting", "accelerating")
YIELD_BINS = ("yields", "no_yield")
MALICE_NODE = "malicious"
MALICE_DOMAIN = ("no", "yes")

BRAKING_THRESHOLD = -0.5    # m/s^2
ACCELERATING_THRESHOLD = 0.5
NEAR_LIMIT_FRACTION = 0.9
YIELD_ZONE = 30.0           # m around the conflict point

_ROW_SUM_TOL = 1e-9


class InconsistentEvidenceError(ValueError):
    """Raised when observed evidence has zero probability under the network."""


@dataclass(frozen=True)
class Node:
    name: str
    domain: tuple[str, ...]
    parents: tuple[str, ...]
    # maps a tuple of parent values (in ``parents`` order) to a distribution
    # over ``domain``
    cpt: Mapping[tuple[str, ...], tuple[float, ...]]


class BeliefNetwork:
    """Discrete Bayesian network; immutable after construction."""

    def __init__(self, nodes: Sequence[Node]):
        self.nodes = {n.name: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise ValueError("duplicate node names")
        self._check_dag()
        self._check_cpts()

    def _check_dag(self) -> None:
        seen: set[str] = set()
        remaining = dict(self.nodes)
        while remaining:
            ready = [n for n in remaining.values()
                     if all(p in seen for p in n.parents)]
            if not ready:
                raise ValueError("network has a cycle or missing parent")
            for n in ready:
                for p in n.parents:
                    if p not in self.nodes:
                        raise ValueError(f"unknown parent {p!r} of {n.name!r}")
                seen.add(n.name)
                del remaining[n.name]

    def _check_cpts(self) -> None:
        for n in self.nodes.values():
            parent_domains = [self.nodes[p].domain for p in n.parents]
            expected = 1
            for d in parent_domains:
                expected *= len(d)
            if len(n.cpt) != expected:
                raise ValueError(f"CPT of {n.name!r} misses parent combinations")
            for row, dist in n.cpt.items():
                if len(dist) != len(n.domain):
                    raise ValueError(f"CPT row of {n.name!r} does not cover domain")
                if abs(sum(dist) - 1.0) > _ROW_SUM_TOL:
                    raise ValueError(f"CPT row {row} of {n.name!r} does not sum to 1")
                if any(v < 0 for v in dist):
                    raise ValueError(f"negative probability in {n.name!r}")

    def topological_order(self) -> list[str]:
        order: list[str] = []
        seen: set[str] = set()
        remaining = dict(self.nodes)
        while remaining:
            for name in sorted(remaining):
                if all(p in seen for p in remaining[name].parents):
                    order.append(name)
                    seen.add(name)
                    del remaining[name]
                    break
        return order

    def to_dict(self) -> dict:
        return {"nodes": [
            {"name": n.name, "domain": list(n.domain),
             "parents": list(n.parents),
             "cpt": {"|".join(k): list(v) for k, v in n.cpt.items()}}
            for n in self.nodes.values()]}

    @classmethod
    def from_dict(cls, data: dict) -> "BeliefNetwork":
        nodes = []
        for nd in data["nodes"]:
            cpt = {tuple(k.split("|")) if k else (): tuple(v)
                   for k, v in nd["cpt"].items()}
            nodes.append(Node(nd["name"], tuple(nd["domain"]),
                              tuple(nd["parents"]), cpt))
        return cls(nodes)

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "BeliefNetwork":
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))


# a factor maps assignments over ``scope`` (tuple of variable names) to values
Factor = tuple[tuple[str, ...], dict[tuple[str, ...], float]]


def _node_factor(bn: BeliefNetwork, node: Node,
                 evidence: Mapping[str, str]) -> Factor:
    scope = tuple(v for v in (*node.parents, node.name) if v not in evidence)
    table: dict[tuple[str, ...], float] = {}

    parent_domains = [(p, (evidence[p],) if p in evidence else bn.nodes[p].domain)
                      for p in node.parents]
    own_domain = (evidence[node.name],) if node.name in evidence else node.domain

    def rec(idx: int, assign: dict[str, str]) -> None:
        if idx == len(parent_domains):
            row = tuple(assign[p] for p in node.parents)
            for val in own_domain:
                prob = node.cpt[row][node.domain.index(val)]
                key = tuple(assign[v] if v != node.name else val for v in scope)
                table[key] = table.get(key, 0.0) + 0.0 + prob
            return
        name, dom = parent_domains[idx]
        for val in dom:
            assign[name] = val
            rec(idx + 1, assign)
        del assign[name]

    rec(0, {})
    return scope, table


def _multiply(f1: Factor, f2: Factor, domains: Mapping[str, tuple[str, ...]]
              ) -> Factor:
    scope1, t1 = f1
    scope2, t2 = f2
    scope = scope1 + tuple(v for v in scope2 if v not in scope1)
    table: dict[tuple[str, ...], float] = {}

    def rec(idx: int, assign: list[str]) -> None:
        if idx == len(scope):
            key = tuple(assign)
            k1 = tuple(assign[scope.index(v)] for v in scope1)
            k2 = tuple(assign[scope.index(v)] for v in scope2)
            table[key] = t1[k1] * t2[k2]
            return
        for val in domains[scope[idx]]:
            assign.append(val)
            rec(idx + 1, assign)
            assign.pop()

    rec(0, [])
    return scope, table


def _sum_out(f: Factor, var: str) -> Factor:
    scope, table = f
    idx = scope.index(var)
    new_scope = scope[:idx] + scope[idx + 1:]
    out: dict[tuple[str, ...], float] = {}
    for key, val in table.items():
        nk = key[:idx] + key[idx + 1:]
        out[nk] = out.get(nk, 0.0) + val
    return new_scope, out


def variable_elimination(bn: BeliefNetwork, query: str,
                         evidence: Mapping[str, str]) -> dict[str, float]:
    """Exact posterior P(query | evidence) by factor elimination.

    Hidden variables are eliminated greedily by smallest intermediate factor.
    Evidence with zero probability raises InconsistentEvidenceError rather
    than returning NaNs.
    """
    if query in evidence:
        raise ValueError("query variable cannot also be evidence")
    if query not in bn.nodes:
        raise ValueError(f"unknown query variable {query!r}")
    for var, val in evidence.items():
        if var not in bn.nodes:
            raise ValueError(f"unknown evidence variable {var!r}")
        if val not in bn.nodes[var].domain:
            raise ValueError(f"value {val!r} not in domain of {var!r}")

    domains = {name: n.domain for name, n in bn.nodes.items()}
    factors = [_node_factor(bn, n, evidence) for n in bn.nodes.values()]
    hidden = [v for v in bn.nodes if v != query and v not in evidence]

    while hidden:
        # greedy: eliminate the variable whose product factor is smallest
        def cost(var: str) -> int:
            scope: set[str] = set()
            for s, _ in factors:
                if var in s:
                    scope.update(s)
            size = 1
            for v in scope:
                size *= len(domains[v])
            return size

        var = min(hidden, key=lambda v: (cost(v), v))
        hidden.remove(var)
        related = [f for f in factors if var in f[0]]
        factors = [f for f in factors if var not in f[0]]
        if not related:
            continue
        prod = related[0]
        for f in related[1:]:
            prod = _multiply(prod, f, domains)
        factors.append(_sum_out(prod, var))

    result = {val: 1.0 for val in domains[query]}
    for scope, table in factors:
        if not scope:
            const = table[()]
            for val in result:
                result[val] *= const
        else:
            for val in result:
                result[val] *= table[(val,)]
    norm = sum(result.values())
    if norm <= 0.0:
        raise InconsistentEvidenceError(
            f"evidence {dict(evidence)} has zero probability")
    return {val: p / norm for val, p in result.items()}


@dataclass(frozen=True)
class Observation:
    """Discretized view of the target vehicle's behavior so far."""

    speed_bin: str
    accel_bin: str
    yielding: str

    def __post_init__(self) -> None:
        if (self.speed_bin not in SPEED_BINS or self.accel_bin not in ACCEL_BINS
                or self.yielding not in YIELD_BINS):
            raise ValueError(f"invalid observation {self}")

    def as_evidence(self) -> dict[str, str]:
        return {"speed_bin": self.speed_bin, "accel_bin": self.accel_bin,
                "yielding": self.yielding}


def observe_target(samples: Iterable[tuple[float, float, Vec2]], v_max: float,
                   conflict: Vec2 | None) -> Observation:
    """Bin target behavior from (speed, accel, position) samples.

    Works on any step prefix, so the same code serves online inference and
    whole-episode fitting. Speed and acceleration evidence is sticky: once the
    target has been seen over the limit or braking, that stays observed.
    Yielding requires the mean acceleration near the conflict point (fallback:
    everywhere) to be negative.
    """
    samples = list(samples)
    if not samples:
        return Observation("under_limit", "coasting", "no_yield")
    top_speed = max(v for v, _, _ in samples)
    if top_speed > v_max:
        speed_bin = "over_limit"
    elif top_speed > NEAR_LIMIT_FRACTION * v_max:
        speed_bin = "near_limit"
    else:
        speed_bin = "under_limit"
    accels = [a for _, a, _ in samples]
    if min(accels) < BRAKING_THRESHOLD:
        accel_bin = "braking"
    elif max(accels) > ACCELERATING_THRESHOLD:
        accel_bin = "accelerating"
    else:
        accel_bin = "coasting"
    if conflict is not None:
        near = [a for _, a, pos in samples
                if euclidean_distance(pos, conflict) <= YIELD_ZONE]
    else:
        near = []
    pool = near if near else accels
    yielding = "yields" if sum(pool) / len(pool) < 0.0 else "no_yield"
    return Observation(speed_bin, accel_bin, yielding)


def default_network() -> BeliefNetwork:
    """Hand-set placeholder CPTs, overridden by fitting in the full pipeline."""
    return BeliefNetwork([
        Node(MALICE_NODE, MALICE_DOMAIN, (), {(): (0.7, 0.3)}),
        Node("speed_bin", SPEED_BINS, (MALICE_NODE,),
             {("no",): (0.45, 0.45, 0.1), ("yes",): (0.15, 0.15, 0.7)}),
        Node("accel_bin", ACCEL_BINS, (MALICE_NODE,),
             {("no",): (0.4, 0.4, 0.2), ("yes",): (0.25, 0.25, 0.5)}),
        Node("yielding", YIELD_BINS, (MALICE_NODE,),
             {("no",): (0.85, 0.15), ("yes",): (0.2, 0.8)}),
    ])


def infer_malice(bn: BeliefNetwork, obs: Observation) -> float:
    """Posterior probability that the target is behaving maliciously."""
    posterior = variable_elimination(bn, MALICE_NODE, obs.as_evidence())
    return posterior["yes"]


def tom_reward(a_cand: float, p_malice: float, epsilon_mod: float) -> float:
    """Logistic reward discouraging acceleration against a likely-malicious target."""
    if epsilon_mod <= 0:
        raise ValueError("epsilon_mod must be positive")
    if not 0.0 <= p_malice <= 1.0:
        raise ValueError("p_malice must be a probability")
    z = -epsilon_mod * a_cand * p_malice
    # numerically safe logistic
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def fit_cpts(corpus: Sequence[tuple[Observation, bool]]) -> BeliefNetwork:
    """Fit the malice network from labeled episode observations.

    Laplace (+1) smoothed frequencies; the prior is the smoothed label
    frequency. Unseen bins keep nonzero mass through the smoothing.
    """
    if not corpus:
        raise ValueError("empty corpus")
    n = len(corpus)
    n_mal = sum(1 for _, label in corpus if label)
    prior_yes = (n_mal + 1.0) / (n + 2.0)

    def fitted(feature: str, domain: tuple[str, ...]) -> Node:
        cpt = {}
        for label, key in ((False, ("no",)), (True, ("yes",))):
            grp = [getattr(obs, feature) for obs, lab in corpus if lab == label]
            total = len(grp) + len(domain)
            cpt[key] = tuple((grp.count(v) + 1.0) / total for v in domain)
        return Node(feature, domain, (MALICE_NODE,), cpt)

    return BeliefNetwork([
        Node(MALICE_NODE, MALICE_DOMAIN, (), {(): (1.0 - prior_yes, prior_yes)}),
        fitted("speed_bin", SPEED_BINS),
        fitted("accel_bin", ACCEL_BINS),
        fitted("yielding", YIELD_BINS),
    ])
