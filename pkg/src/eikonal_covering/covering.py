"""Recursive square coverings of triangular domains.

The root split takes the largest axis-aligned square q(T) anchored at the
south-west corner of T, leaving an upper and a right sub-triangle; iterating
over words in {u, r} yields a covering of the interior of T by squares with
disjoint interiors.  The dyadic covering is the exactly self-similar variant
for the square example, generated directly as diamond squares.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .domain import BoundaryFunction, DomainError, TriangularDomain, adaptive_simpson, monotone_bisect
from .geometry import DiamondSquare, Point

#: children with width or height below this fraction of the root scale are
#: dropped into the residual instead of being recursed
DEGENERATE_FRACTION = 1e-13


@dataclass(frozen=True, eq=False)
class SubTriangle:
    """Piece {a <= x1 <= b, floor <= x2 <= h(x1)} of a triangular domain,
    with floor = h(b)."""

    a: float
    b: float
    floor: float
    h: BoundaryFunction

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise DomainError(f"empty subtriangle: a={self.a} >= b={self.b}")

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def height(self) -> float:
        return self.h.fn(self.a) - self.floor

    def area(self) -> float:
        return adaptive_simpson(lambda t: self.h.fn(t) - self.floor, self.a, self.b)

    @classmethod
    def from_triangle(cls, tri: TriangularDomain) -> "SubTriangle":
        h = tri.h
        return cls(h.a, h.b, h.fn(h.b), h)


@dataclass(frozen=True)
class AxisSquare:
    """Axis-aligned square in the triangle frame (lower-left corner + side)."""

    x1: float
    x2: float
    side: float

    @property
    def ne_corner(self) -> Point:
        return Point(self.x1 + self.side, self.x2 + self.side)

    @property
    def sw_corner(self) -> Point:
        return Point(self.x1, self.x2)


@dataclass(frozen=True)
class CoveringSquare:
    """q-square of one word of the recursion; ``word`` is read as in the
    operator composition, leftmost letter applied last."""

    square: AxisSquare
    depth: int
    word: str


def q_split(t: SubTriangle) -> tuple[AxisSquare, SubTriangle | None, SubTriangle | None]:
    """Split T into its corner square q(T), the upper piece u(T) and the
    right piece r(T); degenerate pieces come back as None.

    The split abscissa solves h(x) - x - floor + a = 0 by bisection to
    1e-13 (b - a), rounded toward the side where the curve is weakly above
    the square so containment is exact.
    """
    h = t.h

    def gap(x: float) -> float:
        return h.fn(x) - (x - t.a) - t.floor

    x10 = monotone_bisect(gap, t.a, t.b, 1e-13 * t.width, side="low")
    side = x10 - t.a
    if side <= 0.0:
        raise DomainError("root split produced an empty square")
    square = AxisSquare(t.a, t.floor, side)
    scale = max(t.width, t.height)
    eps = DEGENERATE_FRACTION * scale

    upper: SubTriangle | None = None
    if h.fn(t.a) - (t.floor + side) > eps and side > eps:
        upper = SubTriangle(t.a, x10, t.floor + side, h)
    right: SubTriangle | None = None
    if t.b - x10 > eps and h.fn(x10) - t.floor > eps:
        right = SubTriangle(x10, t.b, t.floor, h)
    return square, upper, right


@dataclass(frozen=True, eq=False)
class Covering:
    """Truncated covering of a triangular domain, in the triangle frame."""

    triangle: SubTriangle
    squares: tuple[CoveringSquare, ...]
    min_side: float
    max_depth: int | None
    residual_area: float

    def covered_area(self) -> float:
        return sum(sq.square.side**2 for sq in self.squares)


def generate_covering(
    t: SubTriangle, min_side: float = 0.0, max_depth: int | None = None
) -> Covering:
    """Breadth-first recursion over words in {u, r}.

    A branch stops expanding when its q-square side falls below ``min_side``
    (the square is dropped and its subtriangle goes to the residual) or when
    the word length reaches ``max_depth`` (depth ``m`` squares included).
    """
    if min_side <= 0.0 and max_depth is None:
        raise DomainError("need min_side > 0 or a finite max_depth")
    squares: list[CoveringSquare] = []
    queue: deque[tuple[SubTriangle, int, str]] = deque([(t, 0, "")])
    while queue:
        tri, depth, word = queue.popleft()
        if max_depth is not None and depth > max_depth:
            continue
        square, upper, right = q_split(tri)
        if min_side > 0.0 and square.side < min_side:
            continue
        squares.append(CoveringSquare(square, depth, word))
        if max_depth is not None and depth >= max_depth:
            continue
        if upper is not None:
            queue.append((upper, depth + 1, "u" + word))
        if right is not None:
            queue.append((right, depth + 1, "r" + word))
    area = t.area()
    covered = sum(sq.square.side**2 for sq in squares)
    return Covering(
        triangle=t,
        squares=tuple(squares),
        min_side=min_side,
        max_depth=max_depth,
        residual_area=max(area - covered, 0.0),
    )


@dataclass(frozen=True)
class DyadicSquare:
    """Diamond square of the dyadic covering: generation ``depth`` and
    horizontal index ``index`` (0 for the central square, +-i otherwise)."""

    diamond: DiamondSquare
    depth: int
    index: int

    @property
    def word(self) -> str:
        """Generation/index label used where recursion words are reported."""
        return f"n{self.depth}i{self.index}"


@dataclass(frozen=True, eq=False)
class DyadicCovering:
    """Dyadic covering of the square-example triangle with apex at the
    origin and north edge at height ``half_width``."""

    half_width: float
    levels: int
    squares: tuple[DyadicSquare, ...]
    residual_area: float

    def covered_area(self) -> float:
        return sum(sq.diamond.diag**2 / 2.0 for sq in self.squares)


def generate_dyadic_covering(half_width: float, levels: int) -> DyadicCovering:
    """Squares hanging from the north edge: the central one of diagonal
    ``half_width`` plus, per generation n, the 2^n squares of diagonal
    half_width / 2^n with north vertices at odd multiples of
    half_width / 2^n."""
    if half_width <= 0.0:
        raise DomainError(f"half_width must be positive, got {half_width}")
    if levels < 0:
        raise DomainError("levels must be >= 0")
    hw = half_width
    squares = [DyadicSquare(DiamondSquare(Point(0.0, hw), hw), 0, 0)]
    for n in range(1, levels + 1):
        diag = hw / 2.0**n
        for i in range(1, 2 ** (n - 1) + 1):
            x = (2 * i - 1) * diag
            squares.append(DyadicSquare(DiamondSquare(Point(x, hw), diag), n, i))
            squares.append(DyadicSquare(DiamondSquare(Point(-x, hw), diag), n, -i))
    area = hw * hw
    covered = sum(sq.diamond.diag**2 / 2.0 for sq in squares)
    return DyadicCovering(
        half_width=hw,
        levels=levels,
        squares=tuple(squares),
        residual_area=max(area - covered, 0.0),
    )


def classify_layer(gamma_distance: float) -> int:
    """The unique n with 1/(n+1) < d <= 1/n; d exactly 1/n belongs to n."""
    if not 0.0 < gamma_distance <= 1.0:
        raise DomainError(f"distance {gamma_distance} outside (0, 1]")
    n = max(int(1.0 / gamma_distance), 1)
    while gamma_distance <= 1.0 / (n + 1):
        n += 1
    while gamma_distance > 1.0 / n:
        n -= 1
    return n


def dinf_to_curve(h: BoundaryFunction, p: Point) -> float:
    """l-infinity distance from a point weakly below the graph of h to the
    graph, via the balance equation s - p1 = h(s) - p2 (monotone in s)."""
    if p.x1 >= h.b:
        return max(0.0, p.x1 - h.b, h.fn(h.b) - p.x2)

    def gap(s: float) -> float:
        return (h.fn(s) - p.x2) - (s - p.x1)

    lo = max(h.a, p.x1)
    if gap(lo) <= 0.0:
        return 0.0  # on or above the curve at the bracket start
    s = monotone_bisect(gap, lo, h.b, 1e-12 * (h.b - h.a), side="low")
    return s - p.x1


def _square_dinf_range(c: Covering, sq: AxisSquare) -> tuple[float, float]:
    """d-infinity distances of the nearest (NE) and farthest (SW) corners of
    an axis square to the curve; monotone along both axes, so corners give
    the exact range."""
    h = c.triangle.h
    return (
        dinf_to_curve(h, sq.ne_corner),
        dinf_to_curve(h, sq.sw_corner),
    )


def _meets_layer(dmin: float, dmax: float, n: int) -> bool:
    return dmin <= 1.0 / n and dmax > 1.0 / (n + 1)


def count_layer_squares(c: Covering | DyadicCovering, n: int) -> int:
    """Number of covering squares whose closure intersects the layer
    {1/(n+1) < d <= 1/n}: curve distance d-infinity in the triangle frame,
    vertical distance to the north edge in the dyadic frame."""
    if n < 1:
        raise DomainError("layer index must be >= 1")
    count = 0
    if isinstance(c, DyadicCovering):
        for sq in c.squares:
            if _meets_layer(0.0, sq.diamond.diag, n):
                count += 1
        return count
    for sq in c.squares:
        dmin, dmax = _square_dinf_range(c, sq.square)
        if _meets_layer(dmin, dmax, n):
            count += 1
    return count


def layer_count_constant(c: Covering | DyadicCovering, n_max: int) -> float:
    """Smallest constant with count <= const * (n + 1) over n = 1..n_max,
    the shape of the covering lemma's bound."""
    best = 0.0
    for n in range(1, n_max + 1):
        best = max(best, count_layer_squares(c, n) / (n + 1.0))
    return best


@dataclass(frozen=True)
class LayerStats:
    """Band-intersection lengths for one square meeting a layer."""

    depth: int
    word: str
    east_len: float
    north_len: float
    diag_len: float
    diag_proj: float
    east_bound: float | None
    north_bound: float | None
    diag_bound: float


def _band_interval(dmin: float, dmax: float, n: int) -> float:
    """Measure of [dmin, dmax] intersected with (1/(n+1), 1/n]."""
    lo = max(dmin, 1.0 / (n + 1))
    hi = min(dmax, 1.0 / n)
    return max(hi - lo, 0.0)


def _crossing_param(
    dist_of, lo: float, hi: float, target: float, tol: float
) -> float:
    """Parameter where a monotone-decreasing distance profile crosses
    ``target``; assumes dist_of(lo) >= target >= dist_of(hi)."""
    return monotone_bisect(lambda t: dist_of(t) - target, lo, hi, tol, side="low")


def layer_intersection_stats(c: Covering | DyadicCovering, n: int) -> list[LayerStats]:
    """Per-square east-side, north-side and +diagonal intersection lengths
    with layer n, with the corresponding analytic bounds.

    In the triangle frame the +diagonal bound of the covering analysis
    applies to the axis projection of the diagonal (``diag_proj``); the
    Euclidean length is sqrt(2) times it.  In the dyadic frame the bound
    applies directly to the vertical diagonal's length.
    """
    if n < 1:
        raise DomainError("layer index must be >= 1")
    out: list[LayerStats] = []
    band = 1.0 / n - 1.0 / (n + 1.0)

    if isinstance(c, DyadicCovering):
        for sq in c.squares:
            diag = sq.diamond.diag
            if not _meets_layer(0.0, diag, n):
                continue
            side_span = _band_interval(0.0, diag / 2.0, n)
            diag_span = _band_interval(0.0, diag, n)
            out.append(
                LayerStats(
                    depth=sq.depth,
                    word=f"n{sq.depth}i{sq.index}",
                    east_len=math.sqrt(2.0) * side_span,
                    north_len=math.sqrt(2.0) * side_span,
                    diag_len=diag_span,
                    diag_proj=diag_span,
                    east_bound=math.sqrt(2.0) * band,
                    north_bound=math.sqrt(2.0) * band,
                    diag_bound=band,
                )
            )
        return out

    h = c.triangle.h
    tol = 1e-12 * c.triangle.width
    for sq in c.squares:
        dmin, dmax = _square_dinf_range(c, sq.square)
        if not _meets_layer(dmin, dmax, n):
            continue
        s = sq.square
        ne = s.ne_corner

        def east_dist(y: float) -> float:
            return dinf_to_curve(h, Point(s.x1 + s.side, y))

        def north_dist(x: float) -> float:
            return dinf_to_curve(h, Point(x, s.x2 + s.side))

        def diag_dist(t: float) -> float:
            return dinf_to_curve(h, Point(s.x1 + t, s.x2 + t))

        def crossing_span(dist_of, lo: float, hi: float, d_lo: float, d_hi: float) -> float:
            # dist decreases from d_lo at ``lo`` to d_hi at ``hi``
            top = min(d_lo, 1.0 / n)
            bot = max(d_hi, 1.0 / (n + 1.0))
            if top <= bot:
                return 0.0
            p_hi = _crossing_param(dist_of, lo, hi, bot, tol) if bot > d_hi else hi
            p_lo = _crossing_param(dist_of, lo, hi, top, tol) if top < d_lo else lo
            return max(p_hi - p_lo, 0.0)

        # east side: distance decreases upward from the SE to the NE corner
        d_se = east_dist(s.x2)
        d_ne = east_dist(s.x2 + s.side)
        e_len = crossing_span(east_dist, s.x2, s.x2 + s.side, d_se, d_ne)
        d_nw = north_dist(s.x1)
        n_len = crossing_span(north_dist, s.x1, s.x1 + s.side, d_nw, d_ne)
        d_sw = diag_dist(0.0)
        proj = crossing_span(diag_dist, 0.0, s.side, d_sw, diag_dist(s.side))

        x_tilde = ne.x1
        east_bound = None
        if x_tilde + 1.0 / n <= h.b:
            east_bound = (
                h.fn(x_tilde + 1.0 / (n + 1.0)) - h.fn(x_tilde + 1.0 / n) + band
            )
        north_bound = None
        upper = h.fn(x_tilde) + 1.0 / n
        if upper <= h.fn(h.a):
            north_bound = (
                h.inverse(h.fn(x_tilde) + 1.0 / (n + 1.0)) - h.inverse(upper) + band
            )
        out.append(
            LayerStats(
                depth=sq.depth,
                word=sq.word,
                east_len=e_len,
                north_len=n_len,
                diag_len=math.sqrt(2.0) * proj,
                diag_proj=proj,
                east_bound=east_bound,
                north_bound=north_bound,
                diag_bound=band,
            )
        )
    return out
