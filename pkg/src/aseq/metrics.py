"""Trace-level evaluation metrics and cross-case comparison tables."""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass

from .scenarios import ScenarioConfig
from .sim import Trace

# region of interest for the minimum-speed metric: path distance from the
# conflict point within which the ego counts as "inside" the crossing
SPEED_REGION = 20.0

METRIC_COLUMNS = ("case", "crossing_time", "min_speed", "comfort_index",
                  "mean_abs_accel_change", "min_distance", "collided")


@dataclass(frozen=True)
class MetricsReport:
    """Headline numbers of one evaluated episode.

    ``comfort_index`` is the accumulated absolute change of commanded
    acceleration over the crossing (lower is smoother); the per-step mean is
    reported alongside. ``crossing_time`` is None when the ego never cleared
    the crossing (collision or horizon), in which case ``partial`` is set.
    """

    crossing_time: float | None
    min_speed: float
    comfort_index: float
    mean_abs_accel_change: float
    min_distance: float
    collided: bool
    partial: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d


def compute_metrics(trace: Trace, cfg: ScenarioConfig) -> MetricsReport:
    """Pure function of the trace; recomputation is bit-identical."""
    steps = trace.steps
    if not steps:
        return MetricsReport(None, math.nan, 0.0, 0.0, math.inf,
                             trace.collided, True)

    crossing_time = None
    crossing_end = len(steps)
    for i, st in enumerate(steps):
        if st.s2 >= cfg.ego_exit_s:
            crossing_time = st.t
            crossing_end = i + 1
            break

    if cfg.conflict is not None:
        region = [st for st in steps
                  if abs(st.s2 - cfg.conflict.s2) <= SPEED_REGION]
    else:
        region = []
    pool = region if region else steps[:crossing_end]
    min_speed = min(st.v2 for st in pool)

    accels = [st.a2 for st in steps[:crossing_end]]
    changes = [abs(b - a) for a, b in zip(accels, accels[1:])]
    comfort_index = sum(c * cfg.dt for c in changes)
    mean_change = sum(changes) / len(changes) if changes else 0.0

    both_active = [st.min_step_dist for st in steps
                   if not math.isnan(st.min_step_dist)]
    min_distance = min(both_active) if both_active else math.inf

    partial = crossing_time is None
    return MetricsReport(crossing_time, min_speed, comfort_index, mean_change,
                         min_distance, trace.collided, partial)


def comparison_rows(reports: dict[str, MetricsReport]) -> list[list[str]]:
    rows = [list(METRIC_COLUMNS)]
    for case, r in reports.items():
        rows.append([
            case,
            "" if r.crossing_time is None else f"{r.crossing_time:.3f}",
            f"{r.min_speed:.3f}",
            f"{r.comfort_index:.3f}",
            f"{r.mean_abs_accel_change:.3f}",
            "inf" if math.isinf(r.min_distance) else f"{r.min_distance:.3f}",
            "yes" if r.collided else "no",
        ])
    return rows


def comparison_csv(reports: dict[str, MetricsReport]) -> str:
    buf = io.StringIO()
    for row in comparison_rows(reports):
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def comparison_text(reports: dict[str, MetricsReport]) -> str:
    rows = comparison_rows(reports)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
