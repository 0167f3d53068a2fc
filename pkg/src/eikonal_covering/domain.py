"""Compatible planar domains and their canonical builders.

A compatible domain is decomposed into a slope +-1 polygon part plus
rigid-motion images of triangular domains (regions under a strictly
decreasing boundary function h).  Builders are provided for the axis-aligned
square, the two staircase examples, triangular domains, and slope +-1
polygons; compatibility is guaranteed by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Point, RigidMotion, Segment

SQRT2 = math.sqrt(2.0)

#: pre-rotation frame <-> domain frame for the staircase examples:
#: x = Rot y gives u(x) = -sqrt(2) y2 and w(x) = sqrt(2) y1.
ROT = RigidMotion(eighth_turns=1)


class DomainError(ValueError):
    """Invalid domain construction or query outside the domain closure."""


class ResourceLimitError(RuntimeError):
    """Construction refused because it would materialize too much geometry."""


def monotone_bisect(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    side: str = "low",
) -> float:
    """Root of a function with fn(lo) >= 0 >= fn(hi) by bisection.

    ``side='low'`` returns the bracket end where fn >= 0 (conservative for
    callers that need the curve weakly above the returned point).
    """
    flo, fhi = fn(lo), fn(hi)
    if flo < 0.0 or fhi > 0.0:
        raise DomainError(f"root not bracketed: fn({lo})={flo}, fn({hi})={fhi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo if side == "low" else hi


def adaptive_simpson(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> float:
    """Adaptive Simpson quadrature (used for areas of curved triangles)."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fn(lm), fn(rm)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1) + recurse(
            mid, hi, fmid, frm, fhi, right, eps / 2.0, depth - 1
        )

    fa, fb, fm = fn(a), fn(b), fn(0.5 * (a + b))
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)


# ---------------------------------------------------------------------------
# Boundary functions


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Strictly decreasing continuous h on [a, b].

    ``unit_slope_points`` are the interior parameters where h' = -1; they are
    the stationary candidates of the exact l1 point-to-curve distance.
    """

    a: float
    b: float
    form: str
    fn: Callable[[float], float]
    dfn: Callable[[float], float] | None = None
    unit_slope_points: tuple[float, ...] = ()

    def __call__(self, t: float) -> float:
        return self.fn(t)

    def derivative(self, t: float) -> float:
        if self.dfn is not None:
            return self.dfn(t)
        step = 1e-7 * (self.b - self.a)
        lo = max(self.a, t - step)
        hi = min(self.b, t + step)
        return (self.fn(hi) - self.fn(lo)) / (hi - lo)

    def inverse(self, y: float, side: str = "low") -> float:
        """t with h(t) = y, by monotone bisection to 1e-12 (b - a).

        ``side='high'`` rounds the result up, which overestimates horizontal
        distances to the curve (safe for comparison bounds).
        """
        if y >= self.fn(self.a):
            return self.a
        if y <= self.fn(self.b):
            return self.b
        t = monotone_bisect(
            lambda s: self.fn(s) - y, self.a, self.b, 1e-12 * (self.b - self.a), side="low"
        )
        if side == "high":
            t = min(self.b, t + 1e-12 * (self.b - self.a))
        return t

    def polyline_params(self, max_err: float) -> np.ndarray:
        """Parameters of an adaptive polyline with sagitta below ``max_err``."""
        ts = [self.a, self.b]
        stack = [(self.a, self.b, self.fn(self.a), self.fn(self.b), 0)]
        while stack:
            lo, hi, flo, fhi, depth = stack.pop()
            mid = 0.5 * (lo + hi)
            fmid = self.fn(mid)
            if abs(fmid - 0.5 * (flo + fhi)) <= max_err or depth >= 28:
                continue
            ts.append(mid)
            stack.append((lo, mid, flo, fmid, depth + 1))
            stack.append((mid, hi, fmid, fhi, depth + 1))
        return np.array(sorted(ts))

    def slope_stats(self, n: int = 512) -> dict:
        """Grid diagnostic of h' + 1 (sign changes warn about h' = -1 crossings)."""
        ts = np.linspace(self.a, self.b, n + 2)[1:-1]
        dv = np.array([self.derivative(t) for t in ts])
        excess = dv + 1.0
        signs = np.sign(excess[np.abs(excess) > 1e-14])
        changes = int(np.sum(signs[1:] != signs[:-1])) if signs.size else 0
        return {
            "max_abs_hprime_plus_1": float(np.max(np.abs(excess))),
            "min_hprime": float(np.min(dv)),
            "max_hprime": float(np.max(dv)),
            "sign_changes_of_hprime_plus_1": changes,
        }

    def validate_decreasing(self, n: int = 256) -> None:
        ts = np.linspace(self.a, self.b, n)
        vals = np.array([self.fn(t) for t in ts])
        if not np.all(np.diff(vals) < 1e-14):
            raise DomainError(f"boundary function of form {self.form!r} is not strictly decreasing")


def affine_boundary(height: float = 1.0) -> BoundaryFunction:
    """h(t) = height * (1 - t) on [0, 1]."""
    if not 0.0 < height <= 1.0:
        raise DomainError(f"affine height must be in (0, 1], got {height}")
    pts = (() if height != 1.0 else ())
    return BoundaryFunction(
        0.0, 1.0, "affine", lambda t: height * (1.0 - t), lambda t: -height, pts
    )


def quadratic_boundary() -> BoundaryFunction:
    """h(t) = 1 - t^2 on [0, 1]; h' = -1 at t = 1/2."""
    return BoundaryFunction(0.0, 1.0, "quadratic", lambda t: 1.0 - t * t, lambda t: -2.0 * t, (0.5,))


def power_boundary(p: float) -> BoundaryFunction:
    """h(t) = (1 - t)^p on [0, 1] for p > 0."""
    if p <= 0.0:
        raise DomainError(f"power exponent must be positive, got {p}")
    if p == 1.0:
        return affine_boundary(1.0)
    s = 1.0 - (1.0 / p) ** (1.0 / (p - 1.0))
    pts = (s,) if 0.0 < s < 1.0 else ()
    return BoundaryFunction(
        0.0,
        1.0,
        "power",
        lambda t: (1.0 - t) ** p,
        lambda t: -p * (1.0 - t) ** (p - 1.0) if t < 1.0 else (-p if p == 1.0 else 0.0),
        pts,
    )


def table_boundary(ts: Sequence[float], hs: Sequence[float]) -> BoundaryFunction:
    """Piecewise-linear strictly decreasing h from monotone samples."""
    t_arr = np.asarray(ts, dtype=float)
    h_arr = np.asarray(hs, dtype=float)
    if t_arr.ndim != 1 or t_arr.shape != h_arr.shape or t_arr.size < 2:
        raise DomainError("table boundary needs matching 1-d sample arrays of length >= 2")
    if not np.all(np.diff(t_arr) > 0.0):
        raise DomainError("table parameters must be strictly increasing")
    if not np.all(np.diff(h_arr) < 0.0):
        raise DomainError("table values must be strictly decreasing")

    def fn(t: float) -> float:
        return float(np.interp(t, t_arr, h_arr))

    def dfn(t: float) -> float:
        i = int(np.clip(np.searchsorted(t_arr, t, side="right") - 1, 0, t_arr.size - 2))
        return float((h_arr[i + 1] - h_arr[i]) / (t_arr[i + 1] - t_arr[i]))

    return BoundaryFunction(float(t_arr[0]), float(t_arr[-1]), "table", fn, dfn)


def custom_boundary(
    fn: Callable[[float], float],
    dfn: Callable[[float], float] | None = None,
    a: float = 0.0,
    b: float = 1.0,
) -> BoundaryFunction:
    """Wrap an arbitrary strictly decreasing callable; h' = -1 points are
    located numerically when a derivative is supplied."""
    pts: tuple[float, ...] = ()
    if dfn is not None:
        grid = np.linspace(a, b, 514)[1:-1]
        vals = np.array([dfn(t) + 1.0 for t in grid])
        roots = []
        for i in range(vals.size - 1):
            if vals[i] == 0.0:
                roots.append(float(grid[i]))
            elif vals[i] * vals[i + 1] < 0.0:
                lo, hi = grid[i], grid[i + 1]
                g = (lambda s: dfn(s) + 1.0) if vals[i] >= 0 else (lambda s: -(dfn(s) + 1.0))
                roots.append(monotone_bisect(g, lo, hi, 1e-13 * (b - a)))
        pts = tuple(roots)
    bf = BoundaryFunction(a, b, "custom", fn, dfn, pts)
    bf.validate_decreasing()
    return bf


def normalize_boundary(h: BoundaryFunction) -> BoundaryFunction:
    """Rescale to [0, 1] with h(1) = 0 (the triangular-domain normalization)."""
    span = h.b - h.a
    floor = h.fn(h.b)
    if h.a == 0.0 and h.b == 1.0 and floor == 0.0:
        return h

    def fn(t: float) -> float:
        return (h.fn(h.a + t * span) - floor) / span

    dfn = None
    if h.dfn is not None:
        dfn = lambda t: h.dfn(h.a + t * span)  # noqa: E731
    pts = tuple((s - h.a) / span for s in h.unit_slope_points)
    return BoundaryFunction(0.0, 1.0, h.form, fn, dfn, pts)


# ---------------------------------------------------------------------------
# Domain pieces


@dataclass(frozen=True, eq=False)
class TriangularDomain:
    """Region {a <= x1 <= b, h(b) <= x2 <= h(x1)} under a decreasing h."""

    h: BoundaryFunction

    @property
    def floor(self) -> float:
        return self.h.fn(self.h.b)

    def area(self) -> float:
        floor = self.floor
        return adaptive_simpson(lambda t: self.h.fn(t) - floor, self.h.a, self.h.b)

    def contains(self, p: Point, tol: float = 0.0) -> bool:
        h = self.h
        if not (h.a - tol <= p.x1 <= h.b + tol):
            return False
        return self.floor - tol <= p.x2 <= h.fn(min(max(p.x1, h.a), h.b)) + tol


@dataclass(frozen=True)
class TrianglePart:
    """A triangular domain placed into the compatible domain by a motion.

    Odd-turn motions map the covering's axis-aligned squares to diamond
    squares; ``dyadic`` parts use the exactly self-similar covering of the
    square example instead of the root-split recursion.
    """

    part_id: int
    triangle: TriangularDomain
    motion: RigidMotion
    dyadic: bool = False


@dataclass(frozen=True)
class SlopePolygon:
    """Simple closed polygon whose edges all have slope +1 or -1."""

    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        v = self.vertices
        if len(v) < 3:
            raise DomainError("polygon needs at least 3 vertices")
        scale = max(max(abs(p.x1), abs(p.x2)) for p in v) or 1.0
        for p, q in self.edges_pairs():
            d1, d2 = q.x1 - p.x1, q.x2 - p.x2
            if max(abs(d1), abs(d2)) <= 1e-12 * scale:
                raise DomainError("polygon has a degenerate edge")
            if abs(abs(d1) - abs(d2)) > 1e-12 * scale:
                raise DomainError(f"polygon edge from {p} to {q} does not have slope +-1")
        self._check_simple(scale)

    def edges_pairs(self) -> list[tuple[Point, Point]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def edges(self) -> list[Segment]:
        return [Segment(p, q) for p, q in self.edges_pairs()]

    def _check_simple(self, scale: float) -> None:
        # In (u, w) coordinates the edges are axis-parallel; two edges cross
        # improperly only if perpendicular ones intersect in their interiors
        # or parallel ones overlap.
        eps = 1e-12 * scale
        segs = []
        for p, q in self.edges_pairs():
            segs.append(((p.u, p.w), (q.u, q.w)))
        n = len(segs)
        for i in range(n):
            (a0, b0), (a1, b1) = segs[i]
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (i == 0 and j == n - 1)
                (c0, d0), (c1, d1) = segs[j]
                iu = abs(a1 - a0) <= eps  # edge i has constant u
                ju = abs(c1 - c0) <= eps
                if iu == ju:
                    if iu:
                        same = abs(a0 - c0) <= eps
                        lo1, hi1 = sorted((b0, b1))
                        lo2, hi2 = sorted((d0, d1))
                    else:
                        same = abs(b0 - d0) <= eps
                        lo1, hi1 = sorted((a0, a1))
                        lo2, hi2 = sorted((c0, c1))
                    if same and min(hi1, hi2) - max(lo1, lo2) > (0.0 if not adjacent else eps):
                        raise DomainError("polygon edges overlap")
                else:
                    if adjacent:
                        continue
                    if iu:
                        uval, wlo, whi = a0, *sorted((b0, b1))
                        wval, ulo, uhi = d0, *sorted((c0, c1))
                    else:
                        uval, wlo, whi = c0, *sorted((d0, d1))
                        wval, ulo, uhi = b0, *sorted((a0, a1))
                    if ulo - eps < uval < uhi + eps and wlo - eps < wval < whi + eps:
                        raise DomainError("polygon is self-intersecting")

    def area(self) -> float:
        v = self.vertices
        s = 0.0
        for p, q in self.edges_pairs():
            s += p.x1 * q.x2 - q.x1 * p.x2
        return abs(s) / 2.0


def slope_polygon_rects(poly: SlopePolygon) -> list[tuple[float, float, float, float]]:
    """Exact partition of a slope +-1 polygon into (u0, u1, w0, w1) boxes
    (diamond rectangles in the plane), by a sweep in the rotated frame.

    Rotated coordinates are snapped to a 1e-12-relative grid so that edges
    intended to coincide produce shared rectangle boundaries.
    """
    scale = max(max(abs(p.u), abs(p.w)) for p in poly.vertices) or 1.0
    quantum = 1e-12 * scale

    def snap(v: float) -> float:
        return round(v / quantum) * quantum

    edges = [((snap(p.u), snap(p.w)), (snap(q.u), snap(q.w))) for p, q in poly.edges_pairs()]
    u_values = sorted({e[0][0] for e in edges} | {e[1][0] for e in edges})
    rects = []
    for u0, u1 in zip(u_values[:-1], u_values[1:]):
        if u1 - u0 <= 0.0:
            continue
        umid = 0.5 * (u0 + u1)
        crossings = []
        for (ua, wa), (ub, wb) in edges:
            if ua == ub:  # u-constant edge, parallel to the sweep line
                continue
            lo, hi = min(ua, ub), max(ua, ub)
            if lo < umid < hi:
                crossings.append(wa)  # w is constant on this edge
        crossings.sort()
        if len(crossings) % 2 != 0:
            raise DomainError("polygon sweep found an odd crossing count")
        for w0, w1 in zip(crossings[0::2], crossings[1::2]):
            if w1 - w0 > 0.0:
                rects.append((u0, u1, w0, w1))
    return rects


# ---------------------------------------------------------------------------
# Bad-staircase treads


@dataclass(frozen=True)
class Tread:
    """One tread of the fine-stepped staircase: N substeps of width
    (b - a) / N descending from base + (b - a) to base + (b - a) / N."""

    n: int
    a: float
    b: float
    base: float
    steps: int

    @property
    def width(self) -> float:
        return (self.b - self.a) / self.steps

    def top(self, j: int | np.ndarray):
        return self.base + (self.b - self.a) * (self.steps - j) / self.steps

    def substep_of(self, y1):
        return np.clip(np.floor((y1 - self.a) / self.width).astype(int), 0, self.steps - 1)

    def sigma_length(self) -> float:
        """Length of the middle third of the tread's descending secant."""
        return SQRT2 / (3.0 * 2.0**self.n)

    def fine_height(self) -> float:
        """Rotated-frame height bound sqrt(2) / (2^(n+1) N) of one substep."""
        return SQRT2 / (2.0 ** (self.n + 1) * self.steps)


# ---------------------------------------------------------------------------
# Compatible domains


class CompatibleDomain:
    """A compatible domain with its decomposition and distance queries.

    Immutable after construction; every query is pure.
    """

    def __init__(
        self,
        kind: str,
        *,
        parts: tuple[TrianglePart, ...] = (),
        polygon: SlopePolygon | None = None,
        piece_rects: tuple[tuple[float, float, float, float, int], ...] = (),
        boundary_segments: tuple[Segment, ...] = (),
        area: float,
        bbox: tuple[float, float, float, float],
        meta: dict | None = None,
    ) -> None:
        self.kind = kind
        self.parts = parts
        self.polygon = polygon
        #: prescribed solution pieces for polygon-like kinds, as
        #: (u0, u1, w0, w1, depth_label) boxes in the rotated frame
        self.piece_rects = piece_rects
        self.boundary_segments = boundary_segments
        self.area = area
        self.bbox = bbox
        self.meta = dict(meta or {})

    # -- generic helpers ---------------------------------------------------

    @property
    def diameter_l1(self) -> float:
        x1min, x1max, x2min, x2max = self.bbox
        return (x1max - x1min) + (x2max - x2min)

    def _tol(self) -> float:
        return 1e-9 * max(1.0, self.diameter_l1)

    def contains(self, p: Point, tol: float | None = None) -> bool:
        m = self.contains_many(np.array([p.x1]), np.array([p.x2]), tol)
        return bool(m[0])

    def contains_many(self, x1: np.ndarray, x2: np.ndarray, tol: float | None = None) -> np.ndarray:
        tol = self._tol() if tol is None else tol
        return self._contains_impl(np.asarray(x1, float), np.asarray(x2, float), tol)

    def d1_to_boundary(self, p: Point) -> float:
        if not self.contains(p):
            raise DomainError(f"point ({p.x1}, {p.x2}) is outside the domain closure")
        return float(self.d1_to_boundary_many(np.array([p.x1]), np.array([p.x2]))[0])

    def d1_to_boundary_many(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """l1 distance to the boundary for points inside the closure
        (membership is not re-checked on the vectorized path)."""
        return self._d1_impl(np.asarray(x1, float), np.asarray(x2, float))

    def sample_points(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Uniform points in the domain by rejection from the bounding box."""
        x1min, x1max, x2min, x2max = self.bbox
        out1, out2 = [], []
        got = 0
        while got < n:
            m = max(1024, int(1.5 * (n - got) * (x1max - x1min) * (x2max - x2min) / self.area))
            c1 = rng.uniform(x1min, x1max, m)
            c2 = rng.uniform(x2min, x2max, m)
            keep = self.contains_many(c1, c2, 0.0)
            out1.append(c1[keep])
            out2.append(c2[keep])
            got += int(np.count_nonzero(keep))
        x1 = np.concatenate(out1)[:n]
        x2 = np.concatenate(out2)[:n]
        return x1, x2

    def validate_decomposition(self, rng: np.random.Generator, samples: int = 20000) -> dict:
        """Sampled disjointness/coverage check of the decomposition."""
        x1, x2 = self.sample_points(samples, rng)
        inside = np.zeros(x1.shape[0], dtype=int)
        for part in self.parts:
            inv = part.motion.inverse()
            y1, y2 = inv.apply_xy(x1, x2)
            t = part.triangle
            h = t.h
            yc = np.clip(y1, h.a, h.b)
            hy = np.array([h.fn(v) for v in yc])
            ins = (y1 >= h.a) & (y1 <= h.b) & (y2 >= t.floor) & (y2 <= hy)
            inside += ins.astype(int)
        if self.piece_rects:
            u = x1 - x2
            w = x1 + x2
            for u0, u1, w0, w1, _ in self.piece_rects:
                ins = (u >= u0) & (u <= u1) & (w >= w0) & (w <= w1)
                inside += ins.astype(int)
        overlap = float(np.mean(inside > 1))
        covered = float(np.mean(inside >= 1))
        return {"overlap_fraction": overlap, "covered_fraction": covered}

    # -- kind dispatch -----------------------------------------------------

    def _contains_impl(self, x1, x2, tol):
        raise NotImplementedError

    def _d1_impl(self, x1, x2):
        raise NotImplementedError


class _SquareDomain(CompatibleDomain):
    def _contains_impl(self, x1, x2, tol):
        hs = self.meta["half_side"]
        return (np.abs(x1) <= hs + tol) & (np.abs(x2) <= hs + tol)

    def _d1_impl(self, x1, x2):
        hs = self.meta["half_side"]
        return np.maximum(hs - np.maximum(np.abs(x1), np.abs(x2)), 0.0)


class _RotatedStepDomain(CompatibleDomain):
    """Rotated under-graph of a step function (both staircase examples).

    Membership and distances are evaluated in the pre-rotation frame, where
    d1 in the domain equals sqrt(2) times the l-infinity distance.
    """

    def _pre_rotation(self, x1, x2):
        y1 = (x1 + x2) / SQRT2
        y2 = (x2 - x1) / SQRT2
        return y1, y2

    def _top_at(self, y1):
        raise NotImplementedError

    def _contains_impl(self, x1, x2, tol):
        y1, y2 = self._pre_rotation(x1, x2)
        t_end = self.meta["t_end"]
        inside_band = (y1 >= -tol) & (y1 <= t_end + tol) & (y2 >= -tol)
        top = self._top_at(np.clip(y1, 0.0, t_end))
        return inside_band & (y2 <= top + tol)


class _GoodStaircaseDomain(_RotatedStepDomain):
    def _top_at(self, y1):
        t = self.meta["t_grid"]
        heights = self.meta["heights"]
        idx = np.clip(np.searchsorted(t, y1, side="right") - 1, 0, len(heights) - 1)
        # closure: on a riser take the larger adjacent height
        top = heights[idx]
        on_edge = np.isclose(y1, t[idx], rtol=0.0, atol=1e-12)
        prev = heights[np.maximum(idx - 1, 0)]
        return np.where(on_edge & (idx > 0), np.maximum(top, prev), top)

    def _d1_impl(self, x1, x2):
        y1, y2 = self._pre_rotation(x1, x2)
        best = np.full(y1.shape, np.inf)
        for (a1, b1), (a2, b2) in self.meta["pre_rot_boundary"]:
            if a2 == b2:  # horizontal segment
                clear = np.maximum(np.maximum(a1 - y1, y1 - b1), 0.0)
                d = np.maximum(clear, np.abs(y2 - a2))
            else:  # vertical segment
                clear = np.maximum(np.maximum(a2 - y2, y2 - b2), 0.0)
                d = np.maximum(clear, np.abs(y1 - a1))
            best = np.minimum(best, d)
        return SQRT2 * best


class _BadStaircaseDomain(_RotatedStepDomain):
    def _tread_of(self, y1) -> np.ndarray:
        t = self.meta["t_grid"]
        return np.clip(np.searchsorted(t, y1, side="right") - 1, 0, len(self.treads()) - 1)

    def treads(self) -> tuple[Tread, ...]:
        return self.meta["treads"]

    def _top_at(self, y1):
        idx = self._tread_of(y1)
        top = np.empty(y1.shape)
        for k, tread in enumerate(self.treads()):
            sel = idx == k
            if not np.any(sel):
                continue
            j = tread.substep_of(y1[sel])
            top[sel] = tread.top(j)
        return top

    def _d1_impl(self, x1, x2):
        y1, y2 = self._pre_rotation(x1, x2)
        treads = self.treads()
        t_end = self.meta["t_end"]
        idx = self._tread_of(y1)
        best = np.minimum(y2, y1)  # floor and left wall
        own_top = self._top_at(y1) - y2
        best = np.minimum(best, own_top)
        last = treads[-1]
        f_last = last.top(last.steps - 1)
        best = np.minimum(best, np.maximum(t_end - y1, y2 - f_last))
        # Right-horizon candidates: on each tread at or right of the point,
        # the optimum of max(riser clearance, top gap) is at the crossing of
        # the two linear terms; check its floor/ceil plus the horizon riser.
        for k, tread in enumerate(treads):
            sel = idx <= k
            if not np.any(sel):
                continue
            yy1, yy2 = y1[sel], y2[sel]
            w = tread.width
            span = tread.b - tread.a
            # top(kk) - yy2 = (a + kk*w) - yy1  =>  crossing kk
            kk = (tread.base + span - yy2 + yy1 - tread.a) / (2.0 * w)
            lo_k = np.where(idx[sel] == k, tread.substep_of(yy1) + 1, 0)
            cand = best[sel]
            for kc in (np.floor(kk), np.ceil(kk)):
                kcl = np.clip(kc, lo_k, tread.steps - 1).astype(int)
                d = np.maximum(tread.a + kcl * w - yy1, tread.top(kcl) - yy2)
                valid = kcl >= lo_k
                cand = np.where(valid, np.minimum(cand, d), cand)
            # horizon riser: first substep whose top drops below yy2
            kh = np.ceil((tread.base + span - yy2) / w).astype(int)
            valid = (kh >= lo_k) & (kh <= tread.steps - 1) & (tread.a + kh * w >= yy1)
            kh = np.clip(kh, 0, tread.steps - 1)
            d = np.where(valid, tread.a + kh * w - yy1, np.inf)
            cand = np.minimum(cand, d)
            best[sel] = cand
        return SQRT2 * np.maximum(best, 0.0)


class _TriangleDomain(CompatibleDomain):
    def _contains_impl(self, x1, x2, tol):
        h = self.meta["h"]
        floor = self.meta["floor"]
        xc = np.clip(x1, h.a, h.b)
        hv = np.array([h.fn(v) for v in xc])
        return (x1 >= h.a - tol) & (x1 <= h.b + tol) & (x2 >= floor - tol) & (x2 <= hv + tol)

    def _d1_impl(self, x1, x2):
        h = self.meta["h"]
        floor = self.meta["floor"]
        best = np.minimum(x1 - h.a, x2 - floor)
        xc = np.clip(x1, h.a, h.b)
        vertical = np.array([h.fn(v) for v in xc]) - x2
        best = np.minimum(best, vertical)
        horizontal = np.array([h.inverse(v, side="high") for v in x2]) - x1
        best = np.minimum(best, horizontal)
        for s in h.unit_slope_points:
            hs_val = h.fn(s)
            cand = (s - x1) + (hs_val - x2)
            best = np.where(x1 < s, np.minimum(best, cand), best)
        return np.maximum(best, 0.0)


class _PolygonDomain(CompatibleDomain):
    def _contains_impl(self, x1, x2, tol):
        u = x1 - x2
        w = x1 + x2
        # rotated-frame tolerance: |du| <= 2 tol covers an l1 tolerance of tol
        inside = np.zeros(u.shape, dtype=bool)
        for u0, u1, w0, w1, _ in self.piece_rects:
            inside |= (u >= u0 - 2 * tol) & (u <= u1 + 2 * tol) & (w >= w0 - 2 * tol) & (w <= w1 + 2 * tol)
        return inside

    def _d1_impl(self, x1, x2):
        u = x1 - x2
        w = x1 + x2
        best = np.full(u.shape, np.inf)
        for seg in self.boundary_segments:
            kind = seg.slope_kind()
            if kind == "plus":
                us = seg.a.u
                lo, hi = sorted((seg.a.w, seg.b.w))
                clear = np.maximum(np.maximum(lo - w, w - hi), 0.0)
                d = np.maximum(np.abs(u - us), clear)
            elif kind == "minus":
                ws = seg.a.w
                lo, hi = sorted((seg.a.u, seg.b.u))
                clear = np.maximum(np.maximum(lo - u, u - hi), 0.0)
                d = np.maximum(np.abs(w - ws), clear)
            else:  # pragma: no cover - polygon edges are slope +-1 by invariant
                raise DomainError("polygon boundary segment is not slope +-1")
            best = np.minimum(best, d)
        return best


# ---------------------------------------------------------------------------
# Builders


def build_unit_square(half_side: float) -> CompatibleDomain:
    """Axis-aligned square (-half_side, half_side)^2, decomposed into the
    four quarter-turn images of the dyadic triangle."""
    if not (half_side > 0.0 and math.isfinite(half_side)):
        raise DomainError(f"half_side must be positive, got {half_side}")
    hs = half_side
    tri = TriangularDomain(affine_boundary(1.0))
    parts = tuple(
        TrianglePart(
            part_id=k,
            triangle=tri,
            motion=RigidMotion(eighth_turns=2 * k + 1, scale=SQRT2 * hs),
            dyadic=True,
        )
        for k in range(4)
    )
    corners = [Point(hs, hs), Point(-hs, hs), Point(-hs, -hs), Point(hs, -hs)]
    boundary = tuple(Segment(corners[i], corners[(i + 1) % 4]) for i in range(4))
    return _SquareDomain(
        "unit_square",
        parts=parts,
        boundary_segments=boundary,
        area=4.0 * hs * hs,
        bbox=(-hs, hs, -hs, hs),
        meta={"half_side": hs},
    )


def default_good_heights(depth: int) -> list[float]:
    """h_n = 2^-(n+1), comfortably below the required bound 2^-n."""
    return [2.0 ** -(n + 1) for n in range(1, depth + 1)]


def build_staircase_good(depth: int, heights: Sequence[float] | None = None) -> CompatibleDomain:
    """Rotation of the under-graph of sum h_n chi_((t_{n-1}, t_n)), truncated
    at ``depth`` treads; heights must satisfy h_n < 2^-n."""
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if heights is None:
        heights = default_good_heights(depth)
    heights = [float(v) for v in heights]
    if len(heights) != depth:
        raise DomainError(f"expected {depth} heights, got {len(heights)}")
    for n, h in enumerate(heights, 1):
        if not 0.0 < h < 2.0**-n:
            raise DomainError(f"height h_{n}={h} violates 0 < h_n < 2^-{n}")
    t = [1.0 - 2.0**-n for n in range(depth + 1)]  # t_0 = 0

    rects = []  # (u0, u1, w0, w1, tread index) in the rotated frame
    for n in range(1, depth + 1):
        a, b, h = t[n - 1], t[n], heights[n - 1]
        rects.append((-SQRT2 * h, 0.0, SQRT2 * a, SQRT2 * b, n))

    pre_boundary = []  # axis-parallel segments ((a1,b1),(a2,b2)) in pre-rotation frame
    pre_boundary.append(((0.0, t[depth]), (0.0, 0.0)))  # floor
    pre_boundary.append(((0.0, 0.0), (0.0, heights[0])))  # left wall
    pre_boundary.append(((t[depth], t[depth]), (0.0, heights[-1])))  # right wall
    verts = [(0.0, 0.0), (0.0, heights[0])]
    for n in range(1, depth + 1):
        a, b, h = t[n - 1], t[n], heights[n - 1]
        pre_boundary.append(((a, b), (h, h)))  # tread top
        verts.append((b, h))
        if n < depth and heights[n] != h:
            lo, hi = sorted((h, heights[n]))
            pre_boundary.append(((b, b), (lo, hi)))  # riser
            verts.append((b, heights[n]))
    verts.append((t[depth], 0.0))

    boundary = []
    for (x, y), (x2, y2) in zip(verts, verts[1:] + verts[:1]):
        pa = ROT.apply(Point(x, y))
        pb = ROT.apply(Point(x2, y2))
        boundary.append(Segment(pa, pb))

    area = sum((t[n] - t[n - 1]) * heights[n - 1] for n in range(1, depth + 1))
    xs = [ROT.apply(Point(x, y)) for x, y in verts]
    bbox = (
        min(p.x1 for p in xs),
        max(p.x1 for p in xs),
        min(p.x2 for p in xs),
        max(p.x2 for p in xs),
    )
    # untiled tail toward the accumulation point, bounded by sum 4^-n
    leftover_bound = (4.0 ** -(depth)) / 3.0
    return _GoodStaircaseDomain(
        "staircase_good",
        piece_rects=tuple(rects),
        boundary_segments=tuple(boundary),
        area=area,
        bbox=bbox,
        meta={
            "depth": depth,
            "heights": np.array(heights),
            "t_grid": np.array(t[:-1]),
            "t_end": t[depth],
            "pre_rot_boundary": tuple(pre_boundary),
            "pre_rot_rects": tuple(
                (t[n - 1], t[n], heights[n - 1]) for n in range(1, depth + 1)
            ),
            "leftover_area_bound": leftover_bound,
        },
    )


#: substep-column materialization cap for the fine staircase (columns per domain)
BAD_STAIRCASE_MATERIALIZE_LIMIT = 300_000


def build_staircase_bad(depth: int) -> CompatibleDomain:
    """Rotation of the under-graph of sum (h_n + g_n): treads of height 2^-n
    carrying N_n fine substeps, N_n chosen so every solution picks up at
    least unit jump length per cell.  N_n grows double-exponentially, so the
    treads are stored functionally, not as materialized segments."""
    from .analysis import choose_bad_N

    if depth < 1:
        raise DomainError("depth must be >= 1")
    if depth > 6:
        raise ResourceLimitError(
            f"staircase_bad depth {depth} refused: N_n grows double-exponentially "
            "and is not representable beyond n = 6"
        )
    t = [1.0 - 2.0**-n for n in range(depth + 1)]
    treads = []
    for n in range(1, depth + 1):
        treads.append(Tread(n=n, a=t[n - 1], b=t[n], base=2.0**-n, steps=choose_bad_N(n)))

    total_steps = sum(tr.steps for tr in treads)
    # f on tread n descends from 2^-n + 2^-n to 2^-n + 2^-n / N
    area = 0.0
    for tr in treads:
        span = tr.b - tr.a
        area += span * tr.base + span * span * (tr.steps + 1) / (2.0 * tr.steps)
    top0 = treads[0].top(0)
    corners = [
        ROT.apply(Point(0.0, 0.0)),
        ROT.apply(Point(0.0, top0)),
        ROT.apply(Point(t[depth], top0)),
        ROT.apply(Point(t[depth], 0.0)),
    ]
    bbox = (
        min(p.x1 for p in corners),
        max(p.x1 for p in corners),
        min(p.x2 for p in corners),
        max(p.x2 for p in corners),
    )
    # coarse boundary outline (walls and floor only); the fine graph is functional
    outline = (
        Segment(ROT.apply(Point(0.0, top0)), ROT.apply(Point(0.0, 0.0))),
        Segment(ROT.apply(Point(0.0, 0.0)), ROT.apply(Point(t[depth], 0.0))),
        Segment(
            ROT.apply(Point(t[depth], 0.0)),
            ROT.apply(Point(t[depth], treads[-1].top(treads[-1].steps - 1))),
        ),
    )
    tail = sum(
        4.0**-n * (1.0 + 0.5)  # area of tread n is about 1.5 * 4^-n
        for n in range(depth + 1, 60)
    )
    return _BadStaircaseDomain(
        "staircase_bad",
        boundary_segments=outline,
        area=area,
        bbox=bbox,
        meta={
            "depth": depth,
            "treads": tuple(treads),
            "t_grid": np.array(t[:-1]),
            "t_end": t[depth],
            "total_substeps": total_steps,
            "materializable": total_steps <= BAD_STAIRCASE_MATERIALIZE_LIMIT,
            "leftover_area_estimate": tail,
        },
    )


def bad_staircase_piece_rects(dom: CompatibleDomain) -> tuple[tuple[float, float, float, float, int], ...]:
    """Per-substep diamond-rectangle pieces for the fine staircase; refused
    when the substep count exceeds the materialization cap."""
    if dom.kind != "staircase_bad":
        raise DomainError("expected a staircase_bad domain")
    total = dom.meta["total_substeps"]
    if not dom.meta["materializable"]:
        raise ResourceLimitError(
            f"staircase_bad with {total} substep columns exceeds the "
            f"materialization cap {BAD_STAIRCASE_MATERIALIZE_LIMIT}"
        )
    rects = []
    for tread in dom.meta["treads"]:
        w = tread.width
        tops = tread.top(np.arange(tread.steps))
        for j in range(tread.steps):
            a = tread.a + j * w
            rects.append((-SQRT2 * float(tops[j]), 0.0, SQRT2 * a, SQRT2 * (a + w), tread.n))
    return tuple(rects)


def build_triangle_domain(h: BoundaryFunction) -> CompatibleDomain:
    """Triangular domain T_h in its own frame (identity placement), after the
    normalization to [0, 1] with h(1) = 0 and h(0) <= 1."""
    h.validate_decreasing()
    hn = normalize_boundary(h)
    if hn.fn(0.0) > 1.0 + 1e-12:
        raise DomainError(
            f"normalized boundary has h(0) = {hn.fn(0.0)} > 1; swap the axes "
            "(use the inverse function) to normalize this triangle"
        )
    tri = TriangularDomain(hn)
    part = TrianglePart(part_id=0, triangle=tri, motion=RigidMotion(), dyadic=False)
    area = tri.area()
    diam = 2.0
    ts = hn.polyline_params(1e-8 * diam)
    hs_vals = [hn.fn(t) for t in ts]
    curve = tuple(
        Segment(Point(ts[i], hs_vals[i]), Point(ts[i + 1], hs_vals[i + 1]))
        for i in range(len(ts) - 1)
    )
    boundary = (
        Segment(Point(0.0, hn.fn(0.0)), Point(0.0, 0.0)),
        Segment(Point(0.0, 0.0), Point(1.0, 0.0)),
    ) + curve
    return _TriangleDomain(
        "triangle",
        parts=(part,),
        boundary_segments=boundary,
        area=area,
        bbox=(0.0, 1.0, 0.0, hn.fn(0.0)),
        meta={"h": hn, "floor": 0.0},
    )


def build_polygon_domain(vertices: Sequence[Point | tuple[float, float]]) -> CompatibleDomain:
    """Domain from a slope +-1 polygon, partitioned exactly into diamond
    rectangles by the rotated-frame sweep."""
    pts = tuple(p if isinstance(p, Point) else Point(float(p[0]), float(p[1])) for p in vertices)
    poly = SlopePolygon(pts)
    rects = tuple((u0, u1, w0, w1, 0) for u0, u1, w0, w1 in slope_polygon_rects(poly))
    if not rects:
        raise DomainError("polygon partition produced no pieces")
    bbox = (
        min(p.x1 for p in pts),
        max(p.x1 for p in pts),
        min(p.x2 for p in pts),
        max(p.x2 for p in pts),
    )
    return _PolygonDomain(
        "polygon",
        polygon=poly,
        piece_rects=rects,
        boundary_segments=tuple(poly.edges()),
        area=poly.area(),
        bbox=bbox,
        meta={},
    )


def build_diamond_domain(north: Point, diag: float) -> CompatibleDomain:
    """Single diamond square as a domain (the smallest slope +-1 polygon)."""
    half = diag / 2.0
    verts = (
        north,
        Point(north.x1 + half, north.x2 - half),
        Point(north.x1, north.x2 - diag),
        Point(north.x1 - half, north.x2 - half),
    )
    return build_polygon_domain(verts)


def d1_to_boundary(dom: CompatibleDomain, p: Point) -> float:
    """l1 distance from a point of the closure to the domain boundary."""
    return dom.d1_to_boundary(p)
