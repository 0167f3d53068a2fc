"""Exact planar primitives: points, segments, diamond squares, rigid motions.

Distances are closed-form (no iterative solves); "exact" means correct up to
floating-point rounding, compared with a relative tolerance of ``RTOL``.
All types are immutable values and every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RTOL = 1e-12

_SQ2 = math.sqrt(2.0)
_HALF_SQ2 = math.sqrt(0.5)

# cos/sin of k*(pi/4) for k = 0..7, kept in exact-to-double form.
_COS8 = (1.0, _HALF_SQ2, 0.0, -_HALF_SQ2, -1.0, -_HALF_SQ2, 0.0, _HALF_SQ2)
_SIN8 = (0.0, _HALF_SQ2, 1.0, _HALF_SQ2, 0.0, -_HALF_SQ2, -1.0, -_HALF_SQ2)


@dataclass(frozen=True)
class Point:
    """A point (x1, x2) of the plane."""

    x1: float
    x2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValueError(f"non-finite coordinates ({self.x1}, {self.x2})")

    def __add__(self, other: "Point") -> "Point":
        return Point(self.x1 + other.x1, self.x2 + other.x2)

    def __sub__(self, other: "Point") -> "Point":
        return Point(self.x1 - other.x1, self.x2 - other.x2)

    def scaled(self, s: float) -> "Point":
        return Point(s * self.x1, s * self.x2)

    @property
    def u(self) -> float:
        """Rotated-frame coordinate x1 - x2 (constant on slope +1 lines)."""
        return self.x1 - self.x2

    @property
    def w(self) -> float:
        """Rotated-frame coordinate x1 + x2 (constant on slope -1 lines)."""
        return self.x1 + self.x2


@dataclass(frozen=True)
class Segment:
    """Closed segment [a, b], a != b."""

    a: Point
    b: Point

    def __post_init__(self) -> None:
        if self.a.x1 == self.b.x1 and self.a.x2 == self.b.x2:
            raise ValueError("degenerate segment: endpoints coincide")

    def length(self) -> float:
        return math.hypot(self.b.x1 - self.a.x1, self.b.x2 - self.a.x2)

    def at(self, t: float) -> Point:
        return Point(
            self.a.x1 + t * (self.b.x1 - self.a.x1),
            self.a.x2 + t * (self.b.x2 - self.a.x2),
        )

    def slope_kind(self) -> str:
        """One of 'horizontal', 'vertical', 'plus', 'minus', 'other'."""
        d1 = self.b.x1 - self.a.x1
        d2 = self.b.x2 - self.a.x2
        scale = max(abs(d1), abs(d2))
        if abs(d2) <= RTOL * scale:
            return "horizontal"
        if abs(d1) <= RTOL * scale:
            return "vertical"
        if abs(d1 - d2) <= RTOL * scale:
            return "plus"
        if abs(d1 + d2) <= RTOL * scale:
            return "minus"
        return "other"


@dataclass(frozen=True)
class DiamondSquare:
    """Square with slope +-1 sides, described by its north vertex and the
    length of its vertical diagonal."""

    north: Point
    diag: float

    def __post_init__(self) -> None:
        if not (self.diag > 0.0 and math.isfinite(self.diag)):
            raise ValueError(f"diagonal must be positive, got {self.diag}")

    @property
    def east(self) -> Point:
        return Point(self.north.x1 + self.diag / 2, self.north.x2 - self.diag / 2)

    @property
    def south(self) -> Point:
        return Point(self.north.x1, self.north.x2 - self.diag)

    @property
    def west(self) -> Point:
        return Point(self.north.x1 - self.diag / 2, self.north.x2 - self.diag / 2)

    @property
    def center(self) -> Point:
        return Point(self.north.x1, self.north.x2 - self.diag / 2)

    def vertices(self) -> tuple[Point, Point, Point, Point]:
        return (self.north, self.east, self.south, self.west)

    def sides(self) -> tuple[Segment, Segment, Segment, Segment]:
        n, e, s, w = self.vertices()
        return (Segment(n, e), Segment(e, s), Segment(s, w), Segment(w, n))

    def vertical_diagonal(self) -> Segment:
        return Segment(self.north, self.south)

    def horizontal_diagonal(self) -> Segment:
        return Segment(self.west, self.east)

    def contains(self, p: Point, tol: float = 0.0) -> bool:
        c = self.center
        return abs(p.x1 - c.x1) + abs(p.x2 - c.x2) <= self.diag / 2 + tol


@dataclass(frozen=True)
class RigidMotion:
    """Similarity x -> scale * L x + offset with L an eighth-turn rotation,
    optionally preceded by the reflection about the vertical axis.

    The constructions of triangular parts use odd ``eighth_turns`` (the
    pi/4-odd rotations that map axis-parallel lines to slope +-1 lines);
    even turns, including the identity, place already-diamond geometry.
    """

    eighth_turns: int = 0
    reflect: bool = False
    scale: float = 1.0
    offset: Point = Point(0.0, 0.0)

    def __post_init__(self) -> None:
        if not 0 <= self.eighth_turns <= 7:
            raise ValueError("eighth_turns must be in 0..7")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def is_odd(self) -> bool:
        return self.eighth_turns % 2 == 1

    def linear(self) -> tuple[float, float, float, float]:
        """Row-major entries of the linear part (without the scale)."""
        c, s = _COS8[self.eighth_turns], _SIN8[self.eighth_turns]
        if self.reflect:
            # Ref o Rot^k: negate the first row of the rotation matrix.
            return (-c, s, s, c)
        return (c, -s, s, c)

    def apply(self, p: Point) -> Point:
        m00, m01, m10, m11 = self.linear()
        return Point(
            self.scale * (m00 * p.x1 + m01 * p.x2) + self.offset.x1,
            self.scale * (m10 * p.x1 + m11 * p.x2) + self.offset.x2,
        )

    def apply_xy(self, x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m00, m01, m10, m11 = self.linear()
        return (
            self.scale * (m00 * x1 + m01 * x2) + self.offset.x1,
            self.scale * (m10 * x1 + m11 * x2) + self.offset.x2,
        )

    def inverse(self) -> "RigidMotion":
        if self.reflect:
            turns = self.eighth_turns  # Ref o Rot^k is an involution
        else:
            turns = (-self.eighth_turns) % 8
        inv = RigidMotion(turns, self.reflect, 1.0 / self.scale, Point(0.0, 0.0))
        o = inv.apply(self.offset)
        return RigidMotion(turns, self.reflect, 1.0 / self.scale, Point(-o.x1, -o.x2))

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """Motion equal to applying ``other`` first, then ``self``."""
        reflect = self.reflect ^ other.reflect
        # With L = Ref^r o R_t: R_t o Ref = Ref o R_{-t}, so an inner
        # reflection flips the sign of the outer rotation.
        if other.reflect:
            turns = (other.eighth_turns - self.eighth_turns) % 8
        else:
            turns = (self.eighth_turns + other.eighth_turns) % 8
        return RigidMotion(
            turns, reflect, self.scale * other.scale, self.apply(other.offset)
        )


def apply_motion(m: RigidMotion, p: Point) -> Point:
    return m.apply(p)


def inverse_motion(m: RigidMotion) -> RigidMotion:
    return m.inverse()


def _candidate_params(p: Point, s: Segment, crossings: bool) -> list[float]:
    """Parameters in [0,1] where the piecewise-linear distance objective can
    attain its minimum: endpoints, vanishing points of each coordinate gap,
    and (for the max objective) the two gap-crossing points."""
    d1 = s.b.x1 - s.a.x1
    d2 = s.b.x2 - s.a.x2
    ts = [0.0, 1.0]
    if d1 != 0.0:
        ts.append((p.x1 - s.a.x1) / d1)
    if d2 != 0.0:
        ts.append((p.x2 - s.a.x2) / d2)
    if crossings:
        g1 = p.x1 - s.a.x1
        g2 = p.x2 - s.a.x2
        if d1 != d2:
            ts.append((g1 - g2) / (d1 - d2))
        if d1 + d2 != 0.0:
            ts.append((g1 + g2) / (d1 + d2))
    return [t for t in ts if 0.0 <= t <= 1.0]


def d1_point_segment(p: Point, s: Segment) -> float:
    """l1 distance from ``p`` to the closed segment ``s`` (closed form)."""
    best = math.inf
    for t in _candidate_params(p, s, crossings=False):
        q = s.at(t)
        best = min(best, abs(p.x1 - q.x1) + abs(p.x2 - q.x2))
    return best


def dinf_point_segment(p: Point, s: Segment) -> float:
    """l-infinity distance from ``p`` to the closed segment ``s``."""
    best = math.inf
    for t in _candidate_params(p, s, crossings=True):
        q = s.at(t)
        best = min(best, max(abs(p.x1 - q.x1), abs(p.x2 - q.x2)))
    return best


def d1_points_segment(x1: np.ndarray, x2: np.ndarray, s: Segment) -> np.ndarray:
    """Vectorized ``d1_point_segment`` over arrays of coordinates."""
    d1 = s.b.x1 - s.a.x1
    d2 = s.b.x2 - s.a.x2
    g1 = x1 - s.a.x1
    g2 = x2 - s.a.x2
    best = None
    cands = [np.zeros_like(g1), np.ones_like(g1)]
    if d1 != 0.0:
        cands.append(g1 / d1)
    if d2 != 0.0:
        cands.append(g2 / d2)
    for t in cands:
        t = np.clip(t, 0.0, 1.0)
        val = np.abs(g1 - t * d1) + np.abs(g2 - t * d2)
        best = val if best is None else np.minimum(best, val)
    return best


def dinf_points_segment(x1: np.ndarray, x2: np.ndarray, s: Segment) -> np.ndarray:
    """Vectorized ``dinf_point_segment`` over arrays of coordinates."""
    d1 = s.b.x1 - s.a.x1
    d2 = s.b.x2 - s.a.x2
    g1 = x1 - s.a.x1
    g2 = x2 - s.a.x2
    cands = [np.zeros_like(g1), np.ones_like(g1)]
    if d1 != 0.0:
        cands.append(g1 / d1)
    if d2 != 0.0:
        cands.append(g2 / d2)
    if d1 != d2:
        cands.append((g1 - g2) / (d1 - d2))
    if d1 + d2 != 0.0:
        cands.append((g1 + g2) / (d1 + d2))
    best = None
    for t in cands:
        t = np.clip(t, 0.0, 1.0)
        val = np.maximum(np.abs(g1 - t * d1), np.abs(g2 - t * d2))
        best = val if best is None else np.minimum(best, val)
    return best
