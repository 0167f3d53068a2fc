"""Piecewise l1-pyramid solution fields and their exact jump sets.

Every piece is a box either in rotated coordinates (u, w) = (x1 - x2, x1 + x2)
(a diamond square or rectangle, the eikonal case) or in plain (x1, x2)
coordinates (identity-placed triangle parts).  On a piece the field is the l1
distance to the piece boundary, zero on the boundary, so the assembled v is
continuous and vanishes outside the covered region.

Jump segments are computed from the exact piece arrangement: piece edges are
deduplicated on their carrier lines, and the jump amplitude of each partial
derivative comes from the constant face gradients on the two sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covering import SubTriangle, generate_covering, generate_dyadic_covering
from .domain import (
    CompatibleDomain,
    DomainError,
    SQRT2,
    bad_staircase_piece_rects,
)
from .geometry import DiamondSquare, Point, RigidMotion, Segment
from .covering import AxisSquare

#: inverse of the triangle-frame -> square-example-frame change of frame
_EX_FRAME = RigidMotion(eighth_turns=1, scale=SQRT2)


def xy_from_uw(u: float, w: float) -> Point:
    return Point((u + w) / 2.0, (w - u) / 2.0)


def axis_square_to_diamond(motion: RigidMotion, sq: AxisSquare) -> DiamondSquare:
    """Image of a triangle-frame axis square under an odd-turn motion."""
    if not motion.is_odd:
        raise DomainError("only odd-turn motions map axis squares to diamonds")
    half = sq.side / 2.0
    c = motion.apply(Point(sq.x1 + half, sq.x2 + half))
    diag = sq.side * motion.scale * SQRT2
    return DiamondSquare(Point(c.x1, c.x2 + diag / 2.0), diag)


def map_diamond(motion: RigidMotion, ds: DiamondSquare) -> DiamondSquare:
    """Image of a diamond square under an even-turn motion."""
    if motion.is_odd:
        raise DomainError("odd-turn motions do not preserve diamond orientation")
    c = motion.apply(ds.center)
    diag = ds.diag * motion.scale
    return DiamondSquare(Point(c.x1, c.x2 + diag / 2.0), diag)


# face gradients (d v / d x1, d v / d x2) by frame and active margin
_DIAMOND_GRADS = {
    "c1lo": (1.0, -1.0),
    "c1hi": (-1.0, 1.0),
    "c2lo": (1.0, 1.0),
    "c2hi": (-1.0, -1.0),
}
_AXIS_GRADS = {
    "c1lo": (1.0, 0.0),
    "c1hi": (-1.0, 0.0),
    "c2lo": (0.0, 1.0),
    "c2hi": (0.0, -1.0),
}


@dataclass(frozen=True)
class Piece:
    """One pyramid support: a (c1, c2) box in the diamond or axis frame."""

    lo1: float
    hi1: float
    lo2: float
    hi2: float
    diamond: bool
    part_id: int
    depth: int
    word: str
    piece_id: int

    def coords(self, p: Point) -> tuple[float, float]:
        if self.diamond:
            return p.u, p.w
        return p.x1, p.x2

    def point(self, c1: float, c2: float) -> Point:
        if self.diamond:
            return xy_from_uw(c1, c2)
        return Point(c1, c2)

    def contains(self, p: Point, tol: float = 0.0) -> bool:
        c1, c2 = self.coords(p)
        return (
            self.lo1 - tol <= c1 <= self.hi1 + tol
            and self.lo2 - tol <= c2 <= self.hi2 + tol
        )

    def v(self, p: Point) -> float:
        c1, c2 = self.coords(p)
        return max(
            0.0, min(c1 - self.lo1, self.hi1 - c1, c2 - self.lo2, self.hi2 - c2)
        )

    def face_gradient(self, p: Point) -> tuple[float, float] | None:
        """Gradient of the pyramid face containing p, None on a ridge tie."""
        c1, c2 = self.coords(p)
        margins = {
            "c1lo": c1 - self.lo1,
            "c1hi": self.hi1 - c1,
            "c2lo": c2 - self.lo2,
            "c2hi": self.hi2 - c2,
        }
        items = sorted(margins.items(), key=lambda kv: kv[1])
        scale = max(self.hi1 - self.lo1, self.hi2 - self.lo2)
        if items[1][1] - items[0][1] <= 1e-12 * scale:
            return None
        grads = _DIAMOND_GRADS if self.diamond else _AXIS_GRADS
        return grads[items[0][0]]

    def grads(self) -> dict:
        return _DIAMOND_GRADS if self.diamond else _AXIS_GRADS

    def vertices(self) -> tuple[Point, Point, Point, Point]:
        return (
            self.point(self.lo1, self.lo2),
            self.point(self.hi1, self.lo2),
            self.point(self.hi1, self.hi2),
            self.point(self.lo1, self.hi2),
        )

    def xy_bbox(self) -> tuple[float, float, float, float]:
        vs = self.vertices()
        return (
            min(p.x1 for p in vs),
            max(p.x1 for p in vs),
            min(p.x2 for p in vs),
            max(p.x2 for p in vs),
        )


#: jump-segment kinds: piece edges, the x1-jumping (vertical-in-diamond-frame)
#: ridge, the x2-jumping ridge, and rectangle spines where both partials flip
KIND_SIDE = "side"
KIND_PLUS = "plus_diagonal"
KIND_MINUS = "minus_diagonal"
KIND_SPINE = "spine"

LOC_INTERIOR = "interior"
LOC_BOUNDARY = "boundary"
LOC_RESIDUAL = "residual"


@dataclass(frozen=True)
class JumpSegment:
    """A maximal segment of the jump set of (v_x1, v_x2).

    ``amp`` holds the jump magnitude of each partial; on the paper's diamond
    constructions every affected partial jumps by exactly 2 (values +-1).
    Boundary-located segments carry no measure in the open domain and
    residual-facing ones are truncation artifacts; both are excluded from
    functional totals.
    """

    seg: Segment
    kind: str
    affects: frozenset
    amp: tuple[float, float]
    depth: int
    location: str
    #: triangle part the segment belongs to (-1 for polygon pieces, -2 when
    #: it is shared between two parts)
    part: int = -1

    #: amplitude of the paper's construction (each affected partial is +-1)
    amplitude: float = 2.0


class SolutionField:
    """Assembled candidate solution over a covered compatible domain."""

    def __init__(
        self,
        domain: CompatibleDomain,
        pieces: tuple[Piece, ...],
        residual_area: float,
        min_side: float,
        max_depth: int | None,
    ) -> None:
        self.domain = domain
        self.pieces = pieces
        self.residual_area = residual_area
        self.min_side = min_side
        self.max_depth = max_depth
        self._grid = None
        self._segments: tuple[JumpSegment, ...] | None = None
        self._piece_arrays = None

    # -- point location ----------------------------------------------------

    def _build_grid(self):
        x1min, x1max, x2min, x2max = self.domain.bbox
        n = int(np.clip(math.isqrt(max(len(self.pieces), 1)) * 2, 8, 1024))
        dx1 = (x1max - x1min) / n or 1.0
        dx2 = (x2max - x2min) / n or 1.0
        cells: dict[tuple[int, int], list[int]] = {}
        for idx, pc in enumerate(self.pieces):
            b1lo, b1hi, b2lo, b2hi = pc.xy_bbox()
            i0 = int((b1lo - x1min) / dx1)
            i1 = int((b1hi - x1min) / dx1)
            j0 = int((b2lo - x2min) / dx2)
            j1 = int((b2hi - x2min) / dx2)
            for i in range(max(i0, 0), min(i1, n - 1) + 1):
                for j in range(max(j0, 0), min(j1, n - 1) + 1):
                    cells.setdefault((i, j), []).append(idx)
        self._grid = (x1min, x2min, dx1, dx2, n, cells)
        return self._grid

    def locate(self, p: Point) -> Piece | None:
        grid = self._grid or self._build_grid()
        x1min, x2min, dx1, dx2, n, cells = grid
        i = int(np.clip((p.x1 - x1min) / dx1, 0, n - 1))
        j = int(np.clip((p.x2 - x2min) / dx2, 0, n - 1))
        for idx in cells.get((i, j), ()):
            if self.pieces[idx].contains(p):
                return self.pieces[idx]
        return None

    def eval_v(self, p: Point) -> float:
        """Field value at a point of the domain closure (0 on the uncovered
        residual); raises outside the domain."""
        if not self.domain.contains(p):
            raise DomainError(f"point ({p.x1}, {p.x2}) is outside the domain")
        piece = self.locate(p)
        return piece.v(p) if piece is not None else 0.0

    def locate_many(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Vectorized piece lookup: index of the containing piece, -1 for
        points in the uncovered residual (or outside)."""
        x1 = np.asarray(x1, float)
        x2 = np.asarray(x2, float)
        u = x1 - x2
        w = x1 + x2
        found = np.full(x1.shape, -1, dtype=np.int64)
        grid = self._grid or self._build_grid()
        x1min, x2min, dx1, dx2, n, cells = grid
        ci = np.clip(((x1 - x1min) / dx1).astype(int), 0, n - 1)
        cj = np.clip(((x2 - x2min) / dx2).astype(int), 0, n - 1)
        key = ci * n + cj
        order = np.argsort(key, kind="stable")
        sorted_key = key[order]
        starts = np.searchsorted(sorted_key, np.unique(sorted_key), side="left")
        ends = np.append(starts[1:], sorted_key.size)
        for s, e in zip(starts, ends):
            sel = order[s:e]
            i, j = int(ci[sel[0]]), int(cj[sel[0]])
            for idx in cells.get((i, j), ()):
                pc = self.pieces[idx]
                todo = sel[found[sel] < 0]
                if todo.size == 0:
                    break
                if pc.diamond:
                    c1, c2 = u[todo], w[todo]
                else:
                    c1, c2 = x1[todo], x2[todo]
                inside = (
                    (c1 >= pc.lo1) & (c1 <= pc.hi1) & (c2 >= pc.lo2) & (c2 <= pc.hi2)
                )
                found[todo[inside]] = idx
        return found

    def eval_v_many(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Vectorized field evaluation; points are assumed inside the domain
        (the uncovered residual evaluates to 0)."""
        x1 = np.asarray(x1, float)
        x2 = np.asarray(x2, float)
        idx = self.locate_many(x1, x2)
        out = np.zeros(x1.shape)
        hit = idx >= 0
        if not np.any(hit):
            return out
        u = x1 - x2
        w = x1 + x2
        if self._piece_arrays is None:
            self._piece_arrays = (
                np.array([pc.lo1 for pc in self.pieces]),
                np.array([pc.hi1 for pc in self.pieces]),
                np.array([pc.lo2 for pc in self.pieces]),
                np.array([pc.hi2 for pc in self.pieces]),
                np.array([pc.diamond for pc in self.pieces]),
            )
        lo1, hi1, lo2, hi2, dia = self._piece_arrays
        pid = idx[hit]
        c1 = np.where(dia[pid], u[hit], x1[hit])
        c2 = np.where(dia[pid], w[hit], x2[hit])
        m = np.minimum(
            np.minimum(c1 - lo1[pid], hi1[pid] - c1),
            np.minimum(c2 - lo2[pid], hi2[pid] - c2),
        )
        out[hit] = np.maximum(m, 0.0)
        return out

    # -- jump set ------------------------------------------------------------

    def jump_segments(self) -> tuple[JumpSegment, ...]:
        if self._segments is None:
            self._segments = tuple(_compute_jump_segments(self))
        return self._segments


def _boundary_lines(domain: CompatibleDomain) -> dict:
    """Boundary segments grouped by carrier-line kind, as
    (line value, along-lo, along-hi) triples."""
    groups: dict[str, list[tuple[float, float, float]]] = {
        "u": [],
        "w": [],
        "x1": [],
        "x2": [],
    }
    for seg in domain.boundary_segments:
        kind = seg.slope_kind()
        if kind == "plus":
            lo, hi = sorted((seg.a.w, seg.b.w))
            groups["u"].append((seg.a.u, lo, hi))
        elif kind == "minus":
            lo, hi = sorted((seg.a.u, seg.b.u))
            groups["w"].append((seg.a.w, lo, hi))
        elif kind == "vertical":
            lo, hi = sorted((seg.a.x2, seg.b.x2))
            groups["x1"].append((seg.a.x1, lo, hi))
        elif kind == "horizontal":
            lo, hi = sorted((seg.a.x1, seg.b.x1))
            groups["x2"].append((seg.a.x2, lo, hi))
    return groups


def _segment_from_line(orient: str, value: float, lo: float, hi: float) -> Segment:
    if orient == "u":
        return Segment(xy_from_uw(value, lo), xy_from_uw(value, hi))
    if orient == "w":
        return Segment(xy_from_uw(lo, value), xy_from_uw(hi, value))
    if orient == "x1":
        return Segment(Point(value, lo), Point(value, hi))
    return Segment(Point(lo, value), Point(hi, value))


def _compute_jump_segments(field: SolutionField) -> list[JumpSegment]:
    domain = field.domain
    scale = max(domain.diameter_l1, 1.0)
    quantum = 1e-12 * scale

    def snap(v: float) -> int:
        return round(v / quantum)

    # collect piece edges on their carrier lines
    lines: dict[tuple[str, int], list] = {}
    for pc in field.pieces:
        if pc.diamond:
            edge_defs = [
                ("u", pc.lo1, pc.lo2, pc.hi2, "c1lo"),
                ("u", pc.hi1, pc.lo2, pc.hi2, "c1hi"),
                ("w", pc.lo2, pc.lo1, pc.hi1, "c2lo"),
                ("w", pc.hi2, pc.lo1, pc.hi1, "c2hi"),
            ]
        else:
            edge_defs = [
                ("x1", pc.lo1, pc.lo2, pc.hi2, "c1lo"),
                ("x1", pc.hi1, pc.lo2, pc.hi2, "c1hi"),
                ("x2", pc.lo2, pc.lo1, pc.hi1, "c2lo"),
                ("x2", pc.hi2, pc.lo1, pc.hi1, "c2hi"),
            ]
        for orient, value, lo, hi, face in edge_defs:
            lines.setdefault((orient, snap(value)), []).append(
                (value, lo, hi, face, pc)
            )

    boundary = _boundary_lines(domain)
    segments: list[JumpSegment] = []

    for (orient, _), entries in sorted(lines.items(), key=lambda kv: kv[0]):
        value = entries[0][0]
        marks = sorted({snap(lo) for _, lo, _, _, _ in entries} | {snap(hi) for _, _, hi, _, _ in entries})
        on_boundary_line = [
            (blo, bhi)
            for bval, blo, bhi in boundary.get(orient, ())
            if abs(bval - value) <= quantum * 2
        ]
        for klo, khi in zip(marks[:-1], marks[1:]):
            alo, ahi = klo * quantum, khi * quantum
            if ahi - alo <= quantum:
                continue
            mid = 0.5 * (alo + ahi)
            adj = [e for e in entries if e[1] <= mid <= e[2]]
            if not adj:
                continue
            if len(adj) > 2:
                raise DomainError("piece arrangement has more than two pieces on one edge")
            if len(adj) == 2:
                (_, _, _, fa, pa), (_, _, _, fb, pb) = adj
                ga = pa.grads()[fa]
                gb = pb.grads()[fb]
                amp = (abs(ga[0] - gb[0]), abs(ga[1] - gb[1]))
                location = LOC_INTERIOR
                depth = min(pa.depth, pb.depth)
                part = pa.part_id if pa.part_id == pb.part_id else -2
            else:
                (_, _, _, fa, pa) = adj[0]
                ga = pa.grads()[fa]
                amp = (abs(ga[0]), abs(ga[1]))
                depth = pa.depth
                part = pa.part_id
                location = LOC_RESIDUAL
                for blo, bhi in on_boundary_line:
                    if alo >= blo - 2 * quantum and ahi <= bhi + 2 * quantum:
                        location = LOC_BOUNDARY
                        break
            affects = frozenset(
                name for name, a in zip(("x1", "x2"), amp) if a > 0.0
            )
            if not affects:
                continue
            segments.append(
                JumpSegment(
                    seg=_segment_from_line(orient, value, alo, ahi),
                    kind=KIND_SIDE,
                    affects=affects,
                    amp=amp,
                    depth=depth,
                    location=location,
                    part=part,
                )
            )

    # ridges are interior to their piece: no deduplication needed
    for pc in field.pieces:
        segments.extend(_ridge_segments(pc))
    return segments


def _ridge_segments(pc: Piece) -> list[JumpSegment]:
    w1 = pc.hi1 - pc.lo1
    w2 = pc.hi2 - pc.lo2
    grads = pc.grads()
    out: list[JumpSegment] = []
    scale = max(w1, w2)

    def make(c1a, c2a, c1b, c2b, ga, gb) -> JumpSegment | None:
        pa, pb = pc.point(c1a, c2a), pc.point(c1b, c2b)
        if abs(pa.x1 - pb.x1) <= 1e-15 * scale and abs(pa.x2 - pb.x2) <= 1e-15 * scale:
            return None
        amp = (abs(ga[0] - gb[0]), abs(ga[1] - gb[1]))
        affects = frozenset(n for n, a in zip(("x1", "x2"), amp) if a > 0.0)
        if not affects:
            return None
        if affects == {"x1"}:
            kind = KIND_PLUS
        elif affects == {"x2"}:
            kind = KIND_MINUS
        else:
            kind = KIND_SPINE
        return JumpSegment(
            seg=Segment(pa, pb),
            kind=kind,
            affects=affects,
            amp=amp,
            depth=pc.depth,
            location=LOC_INTERIOR,
            part=pc.part_id,
        )

    if abs(w1 - w2) <= 1e-12 * scale:
        # square: the two full box diagonals
        for (c1a, c2a, c1b, c2b, fa, fb) in (
            (pc.lo1, pc.lo2, pc.hi1, pc.hi2, "c1lo", "c2lo"),
            (pc.lo1, pc.hi2, pc.hi1, pc.lo2, "c1lo", "c2hi"),
        ):
            seg = make(c1a, c2a, c1b, c2b, grads[fa], grads[fb])
            if seg:
                out.append(seg)
        return out

    m = min(w1, w2) / 2.0
    if w1 > w2:
        mid2 = 0.5 * (pc.lo2 + pc.hi2)
        spine = make(pc.lo1 + m, mid2, pc.hi1 - m, mid2, grads["c2lo"], grads["c2hi"])
    else:
        mid1 = 0.5 * (pc.lo1 + pc.hi1)
        spine = make(mid1, pc.lo2 + m, mid1, pc.hi2 - m, grads["c1lo"], grads["c1hi"])
    if spine:
        out.append(spine)
    corner_defs = (
        (pc.lo1, pc.lo2, 1.0, 1.0, "c1lo", "c2lo"),
        (pc.hi1, pc.lo2, -1.0, 1.0, "c1hi", "c2lo"),
        (pc.lo1, pc.hi2, 1.0, -1.0, "c1lo", "c2hi"),
        (pc.hi1, pc.hi2, -1.0, -1.0, "c1hi", "c2hi"),
    )
    for c1, c2, s1, s2, fa, fb in corner_defs:
        seg = make(c1, c2, c1 + s1 * m, c2 + s2 * m, grads[fa], grads[fb])
        if seg:
            out.append(seg)
    return out


def _dyadic_levels(min_side: float) -> int:
    """Largest generation whose triangle-frame square side 2^-(g+1) stays at
    or above ``min_side``."""
    if min_side <= 0.0:
        raise DomainError("dyadic truncation needs min_side > 0 or max_depth")
    return max(int(math.floor(-math.log2(min_side))) - 1, 0)


def build_solution(
    dom: CompatibleDomain,
    min_side: float = 0.0,
    max_depth: int | None = None,
) -> SolutionField:
    """Cover every part of the domain and assemble the pyramid field.

    Triangle parts are covered by the recursion (or the dyadic covering when
    flagged) and mapped through their motions; polygon-like domains use their
    prescribed diamond-rectangle pieces.  ``max_depth`` is the covering depth
    (dyadic generation); ``min_side`` is the triangle-frame side threshold.
    """
    if min_side <= 0.0 and max_depth is None:
        min_side = 1e-4
    pieces: list[Piece] = []
    residual = 0.0

    for part in dom.parts:
        if part.dyadic:
            levels = max_depth if max_depth is not None else _dyadic_levels(min_side)
            dy = generate_dyadic_covering(1.0, levels)
            ex_to_domain = part.motion.compose(_EX_FRAME.inverse())
            for sq in dy.squares:
                ds = map_diamond(ex_to_domain, sq.diamond)
                pieces.append(
                    Piece(
                        lo1=ds.north.u,
                        hi1=ds.north.u + ds.diag,
                        lo2=ds.north.w - ds.diag,
                        hi2=ds.north.w,
                        diamond=True,
                        part_id=part.part_id,
                        depth=sq.depth,
                        word=sq.word,
                        piece_id=len(pieces),
                    )
                )
            residual += dy.residual_area * ex_to_domain.scale**2
        else:
            cov = generate_covering(
                SubTriangle.from_triangle(part.triangle), min_side, max_depth
            )
            odd = part.motion.is_odd
            for sq in cov.squares:
                if odd:
                    ds = axis_square_to_diamond(part.motion, sq.square)
                    pieces.append(
                        Piece(
                            lo1=ds.north.u,
                            hi1=ds.north.u + ds.diag,
                            lo2=ds.north.w - ds.diag,
                            hi2=ds.north.w,
                            diamond=True,
                            part_id=part.part_id,
                            depth=sq.depth,
                            word=sq.word,
                            piece_id=len(pieces),
                        )
                    )
                else:
                    a = part.motion.apply(sq.square.sw_corner)
                    b = part.motion.apply(sq.square.ne_corner)
                    lo1, hi1 = sorted((a.x1, b.x1))
                    lo2, hi2 = sorted((a.x2, b.x2))
                    pieces.append(
                        Piece(
                            lo1=lo1,
                            hi1=hi1,
                            lo2=lo2,
                            hi2=hi2,
                            diamond=False,
                            part_id=part.part_id,
                            depth=sq.depth,
                            word=sq.word,
                            piece_id=len(pieces),
                        )
                    )
            residual += cov.residual_area * part.motion.scale**2

    rects = dom.piece_rects
    if dom.kind == "staircase_bad":
        rects = bad_staircase_piece_rects(dom)
    for u0, u1, w0, w1, label in rects:
        pieces.append(
            Piece(
                lo1=u0,
                hi1=u1,
                lo2=w0,
                hi2=w1,
                diamond=True,
                part_id=-1,
                depth=label,
                word=f"rect{label}",
                piece_id=len(pieces),
            )
        )

    if not pieces:
        raise DomainError("solution build produced no pieces")
    return SolutionField(dom, tuple(pieces), residual, min_side, max_depth)


def eval_v(field: SolutionField, p: Point) -> float:
    return field.eval_v(p)


def jump_segments(field: SolutionField) -> tuple[JumpSegment, ...]:
    return field.jump_segments()
