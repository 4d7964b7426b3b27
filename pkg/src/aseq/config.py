"""Run configuration: a single YAML file with scenario, payoff, decider,
learner, and training sections.

A run either names a shipped case (``case: C``) or spells out the scenario
tree, including both vehicle paths as segment lists. Validation errors carry
the offending key path so config mistakes are quick to locate.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .decider import TrainingOptions
from .geometry import ArcSegment, LineSegment, Path
from .payoffs import PayoffParams
from .qlearn import LearnerParams
from .scenarios import DeciderConfig, ScenarioConfig, make_case


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending key."""


@dataclass
class RunConfig:
    case: str | None
    scenario: ScenarioConfig
    payoff: PayoffParams
    decider: DeciderConfig
    learner: LearnerParams
    training: TrainingOptions
    tom_network: str | None = None

    @classmethod
    def default(cls) -> "RunConfig":
        setup = make_case("C")
        return cls("C", setup.scenario, setup.payoff, setup.decider,
                   LearnerParams(), TrainingOptions())


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _point(value, where: str) -> tuple[float, float]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{where}: expected a [x, y] pair, got {value!r}")
    return float(value[0]), float(value[1])


def _segment(seg: dict, where: str):
    kind = _require(seg, "type", where)
    if kind == "line":
        return LineSegment(_point(_require(seg, "start", where), f"{where}.start"),
                           _point(_require(seg, "end", where), f"{where}.end"))
    if kind == "arc":
        return ArcSegment(
            _point(_require(seg, "center", where), f"{where}.center"),
            float(_require(seg, "radius", where)),
            float(_require(seg, "start_angle", where)),
            float(_require(seg, "sweep", where)))
    raise ConfigError(f"{where}.type: unknown segment type {kind!r}")


def _path(data, where: str) -> Path:
    if not isinstance(data, list) or not data:
        raise ConfigError(f"{where}: expected a non-empty segment list")
    try:
        return Path([_segment(seg, f"{where}[{i}]")
                     for i, seg in enumerate(data)])
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _segment_dict(seg) -> dict:
    if isinstance(seg, LineSegment):
        return {"type": "line", "start": list(seg.start), "end": list(seg.end)}
    return {"type": "arc", "center": list(seg.center), "radius": seg.radius,
            "start_angle": seg.start_angle, "sweep": seg.sweep}


def _scenario_dict(sc: ScenarioConfig) -> dict:
    return {
        "geometry": sc.geometry,
        "center": list(sc.center),
        "lane_width": sc.lane_width,
        "v_max": sc.v_max,
        "dt": sc.dt,
        "horizon": sc.horizon,
        "target_policy": sc.target_policy,
        "collision_radius": sc.collision_radius,
        "ego_exit_s": None if math.isinf(sc.ego_exit_s) else sc.ego_exit_s,
        "target": {"path": [_segment_dict(s) for s in sc.target_path.segments],
                   "speed": sc.target_speed, "s0": sc.target_s0},
        "ego": {"path": [_segment_dict(s) for s in sc.ego_path.segments],
                "speed": sc.ego_speed, "s0": sc.ego_s0},
    }


def _scenario_from_dict(data: dict, where: str = "scenario") -> ScenarioConfig:
    target = _require(data, "target", where)
    ego = _require(data, "ego", where)
    exit_s = data.get("ego_exit_s")
    try:
        return ScenarioConfig(
            geometry=data.get("geometry", "intersection"),
            center=_point(data.get("center", [0, 0]), f"{where}.center"),
            lane_width=float(data.get("lane_width", 3.5)),
            target_path=_path(_require(target, "path", f"{where}.target"),
                              f"{where}.target.path"),
            ego_path=_path(_require(ego, "path", f"{where}.ego"),
                           f"{where}.ego.path"),
            target_speed=float(_require(target, "speed", f"{where}.target")),
            ego_speed=float(_require(ego, "speed", f"{where}.ego")),
            v_max=float(data.get("v_max", 12.0)),
            dt=float(data.get("dt", 0.1)),
            horizon=float(data.get("horizon", 20.0)),
            target_policy=data.get("target_policy", "malicious"),
            collision_radius=float(data.get("collision_radius", 2.0)),
            ego_exit_s=math.inf if exit_s is None else float(exit_s),
            target_s0=float(target.get("s0", 0.0)),
            ego_s0=float(ego.get("s0", 0.0)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _build_section(cls, data: dict, where: str, tuple_fields: tuple[str, ...] = ()):
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{where}.{key}: unknown key")
    kwargs = dict(data)
    for f in tuple_fields:
        if f in kwargs and isinstance(kwargs[f], list):
            kwargs[f] = tuple(kwargs[f])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def to_dict(cfg: RunConfig) -> dict:
    return {
        "case": cfg.case,
        "scenario": _scenario_dict(cfg.scenario),
        "payoff": {f.name: (list(v) if isinstance((v := getattr(cfg.payoff, f.name)),
                                                  tuple) else v)
                   for f in dataclasses.fields(PayoffParams)},
        "decider": {f.name: (list(v) if isinstance((v := getattr(cfg.decider, f.name)),
                                                   tuple) else v)
                    for f in dataclasses.fields(DeciderConfig)},
        "learner": {f.name: getattr(cfg.learner, f.name)
                    for f in dataclasses.fields(LearnerParams)},
        "training": {f.name: (list(v) if isinstance((v := getattr(cfg.training, f.name)),
                                                    tuple) else v)
                     for f in dataclasses.fields(TrainingOptions)},
        "tom_network": cfg.tom_network,
    }


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping")
    known = {"case", "scenario", "payoff", "decider", "learner", "training",
             "tom_network"}
    for key in data:
        if key not in known:
            raise ConfigError(f"top level: unknown key {key!r}")

    case = data.get("case")
    if case is not None:
        try:
            setup = make_case(case)
        except ValueError as e:
            raise ConfigError(f"case: {e}") from e
        scenario, payoff, decider = setup.scenario, setup.payoff, setup.decider
    elif "scenario" not in data:
        raise ConfigError("top level: need either 'case' or 'scenario'")
    else:
        scenario, payoff, decider = None, PayoffParams(), DeciderConfig()

    if "scenario" in data and data["scenario"] is not None:
        scenario = _scenario_from_dict(data["scenario"])
    if "payoff" in data and data["payoff"] is not None:
        payoff = _build_section(PayoffParams, data["payoff"], "payoff",
                                ("actions",))
    if "decider" in data and data["decider"] is not None:
        decider = _build_section(DeciderConfig, data["decider"], "decider",
                                 ("fixed_weights",))
    learner = _build_section(LearnerParams, data.get("learner") or {}, "learner")
    training = _build_section(
        TrainingOptions, data.get("training") or {}, "training",
        ("ego_speed_range", "malicious_speed_range", "benign_speed_range",
         "start_offset_range"))
    return RunConfig(case, scenario, payoff, decider, learner, training,
                     data.get("tom_network"))


def load(path: str) -> RunConfig:
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from e
    if data is None:
        data = {}
    return from_dict(data)


def save(cfg: RunConfig, path: str) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(to_dict(cfg), f, sort_keys=False)
