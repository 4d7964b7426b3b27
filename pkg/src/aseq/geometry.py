"""Path geometry: straight/arc segments, arc-length parameterization, crossings.

Every vehicle follows a fixed pre-planned path built from line segments and
circular arcs. Paths are parameterized by arc length so the kinematics only
ever deal with a scalar progress coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

Vec2 = tuple[float, float]

# Tolerance for geometric predicates (continuity checks, angular membership,
# duplicate-intersection merging).
_EPS = 1e-9
_DEDUPE_DIST = 1e-6


def euclidean_distance(p1: Vec2, p2: Vec2) -> float:
    """Straight-line distance between two points in the plane."""
    return math.hypot(p1[0] - p2[0], p1[1] - p2[1])


@dataclass(frozen=True)
class LineSegment:
    start: Vec2
    end: Vec2

    @cached_property
    def length(self) -> float:
        return euclidean_distance(self.start, self.end)

    def point_at(self, s: float) -> Vec2:
        f = s / self.length
        return (self.start[0] + (self.end[0] - self.start[0]) * f,
                self.start[1] + (self.end[1] - self.start[1]) * f)

    @cached_property
    def _unit(self) -> Vec2:
        L = self.length
        return ((self.end[0] - self.start[0]) / L,
                (self.end[1] - self.start[1]) / L)

    def tangent_at(self, s: float) -> Vec2:
        return self._unit


@dataclass(frozen=True)
class ArcSegment:
    """Circular arc. ``sweep`` is signed: positive is counterclockwise."""

    center: Vec2
    radius: float
    start_angle: float
    sweep: float

    @cached_property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def _angle_at(self, s: float) -> float:
        return self.start_angle + math.copysign(s / self.radius, self.sweep)

    def point_at(self, s: float) -> Vec2:
        a = self._angle_at(s)
        return (self.center[0] + self.radius * math.cos(a),
                self.center[1] + self.radius * math.sin(a))

    def tangent_at(self, s: float) -> Vec2:
        a = self._angle_at(s)
        if self.sweep >= 0:
            return (-math.sin(a), math.cos(a))
        return (math.sin(a), -math.cos(a))

    @property
    def start(self) -> Vec2:
        return self.point_at(0.0)

    @property
    def end(self) -> Vec2:
        return self.point_at(self.length)

    def contains_angle(self, angle: float) -> bool:
        """Whether a circle angle falls inside the swept angular range."""
        delta = (angle - self.start_angle) % (2.0 * math.pi)
        if self.sweep >= 0:
            return delta <= self.sweep + _EPS or delta >= 2.0 * math.pi - _EPS
        delta -= 2.0 * math.pi  # map into (-2pi, 0]
        if delta <= -2.0 * math.pi + _EPS:
            delta += 2.0 * math.pi
        return delta >= self.sweep - _EPS

    def arc_length_of_angle(self, angle: float) -> float:
        delta = (angle - self.start_angle) % (2.0 * math.pi)
        if self.sweep < 0:
            delta = delta - 2.0 * math.pi if delta > _EPS else delta
            return abs(delta) * self.radius
        if delta >= 2.0 * math.pi - _EPS:
            delta = 0.0
        return delta * self.radius


Segment = LineSegment | ArcSegment


@dataclass
class Path:
    """C0-continuous chain of segments with strictly increasing arc length."""

    segments: list[Segment]
    entry_tag: str = ""
    exit_tag: str = ""
    _offsets: list[float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("path needs at least one segment")
        prev_end = None
        offsets = [0.0]
        for seg in self.segments:
            if seg.length <= _EPS:
                raise ValueError("zero-length path segment")
            if prev_end is not None and euclidean_distance(prev_end, seg.start) > 1e-6:
                raise ValueError(
                    f"path is not C0-continuous at {prev_end} -> {seg.start}")
            prev_end = seg.end
            offsets.append(offsets[-1] + seg.length)
        self._offsets = offsets

    @property
    def length(self) -> float:
        return self._offsets[-1]

    def _locate(self, s: float) -> tuple[Segment, float]:
        s = min(max(s, 0.0), self.length)
        for seg, off in zip(self.segments, self._offsets):
            if s <= off + seg.length:
                return seg, s - off
        return self.segments[-1], self.segments[-1].length

    def point_at(self, s: float) -> Vec2:
        seg, local = self._locate(s)
        return seg.point_at(local)

    def tangent_at(self, s: float) -> Vec2:
        seg, local = self._locate(s)
        return seg.tangent_at(local)


@dataclass(frozen=True)
class Crossing:
    """One geometric intersection of two paths.

    ``s1``/``s2`` are the arc lengths at which path1/path2 reach the point.
    """

    point: Vec2
    s1: float
    s2: float


def _line_line(a: LineSegment, b: LineSegment) -> list[tuple[Vec2, float, float]]:
    ax, ay = a.start
    dx1, dy1 = a.end[0] - ax, a.end[1] - ay
    bx, by = b.start
    dx2, dy2 = b.end[0] - bx, b.end[1] - by
    den = dx1 * dy2 - dy1 * dx2
    if abs(den) < _EPS:
        return []  # parallel (overlapping collinear segments yield no conflict point)
    t = ((bx - ax) * dy2 - (by - ay) * dx2) / den
    u = ((bx - ax) * dy1 - (by - ay) * dx1) / den
    if -_EPS <= t <= 1.0 + _EPS and -_EPS <= u <= 1.0 + _EPS:
        t = min(max(t, 0.0), 1.0)
        u = min(max(u, 0.0), 1.0)
        p = (ax + t * dx1, ay + t * dy1)
        return [(p, t * a.length, u * b.length)]
    return []


def _line_arc(line: LineSegment, arc: ArcSegment) -> list[tuple[Vec2, float, float]]:
    # Solve |line(t) - center|^2 = r^2 for t in [0, 1].
    ax, ay = line.start
    dx, dy = line.end[0] - ax, line.end[1] - ay
    fx, fy = ax - arc.center[0], ay - arc.center[1]
    qa = dx * dx + dy * dy
    qb = 2.0 * (fx * dx + fy * dy)
    qc = fx * fx + fy * fy - arc.radius * arc.radius
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    out = []
    for t in ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)):
        if t < -_EPS or t > 1.0 + _EPS:
            continue
        t = min(max(t, 0.0), 1.0)
        p = (ax + t * dx, ay + t * dy)
        ang = math.atan2(p[1] - arc.center[1], p[0] - arc.center[0])
        if arc.contains_angle(ang):
            out.append((p, t * line.length, arc.arc_length_of_angle(ang)))
    return out


def _arc_arc(a: ArcSegment, b: ArcSegment) -> list[tuple[Vec2, float, float]]:
    # Circle-circle intersection, then filter by both angular spans.
    d = euclidean_distance(a.center, b.center)
    if d < _EPS:
        return []  # concentric: either disjoint or overlapping, no single point
    if d > a.radius + b.radius + _EPS or d < abs(a.radius - b.radius) - _EPS:
        return []
    h2 = a.radius * a.radius - ((d * d + a.radius * a.radius - b.radius * b.radius)
                                / (2.0 * d)) ** 2
    base = (d * d + a.radius * a.radius - b.radius * b.radius) / (2.0 * d)
    h = math.sqrt(max(h2, 0.0))
    ux, uy = ((b.center[0] - a.center[0]) / d, (b.center[1] - a.center[1]) / d)
    mid = (a.center[0] + base * ux, a.center[1] + base * uy)
    candidates = {(mid[0] - h * uy, mid[1] + h * ux),
                  (mid[0] + h * uy, mid[1] - h * ux)}
    out = []
    for p in candidates:
        ang_a = math.atan2(p[1] - a.center[1], p[0] - a.center[0])
        ang_b = math.atan2(p[1] - b.center[1], p[0] - b.center[0])
        if a.contains_angle(ang_a) and b.contains_angle(ang_b):
            out.append((p, a.arc_length_of_angle(ang_a), b.arc_length_of_angle(ang_b)))
    return out


def _segment_intersections(s1: Segment, s2: Segment) -> list[tuple[Vec2, float, float]]:
    if isinstance(s1, LineSegment) and isinstance(s2, LineSegment):
        return _line_line(s1, s2)
    if isinstance(s1, LineSegment) and isinstance(s2, ArcSegment):
        return _line_arc(s1, s2)
    if isinstance(s1, ArcSegment) and isinstance(s2, LineSegment):
        return [(p, sa, sl) for p, sl, sa in _line_arc(s2, s1)]
    return _arc_arc(s1, s2)


def path_crossings(path1: Path, path2: Path) -> list[Crossing]:
    """All intersection points of two paths, sorted by arc length along path2.

    Points closer than 1 um are merged (shared segment endpoints would
    otherwise be reported twice).
    """
    raw: list[Crossing] = []
    for seg1, off1 in zip(path1.segments, path1._offsets):
        for seg2, off2 in zip(path2.segments, path2._offsets):
            for p, l1, l2 in _segment_intersections(seg1, seg2):
                raw.append(Crossing(p, off1 + l1, off2 + l2))
    raw.sort(key=lambda c: (c.s2, c.s1))
    merged: list[Crossing] = []
    for c in raw:
        if any(euclidean_distance(c.point, m.point) < _DEDUPE_DIST for m in merged):
            continue
        merged.append(c)
    return merged


def conflict_point(path1: Path, path2: Path) -> Crossing | None:
    """First crossing of the two paths by arc length along path2.

    Returns None when the paths never intersect; the decision layer then treats
    the time to collision as infinite.
    """
    crossings = path_crossings(path1, path2)
    return crossings[0] if crossings else None
