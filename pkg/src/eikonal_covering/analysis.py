"""Verification and counterexample machinery.

Grid checks of the eikonal property away from the jump set, the slicing
inequality (crossing counts against one-dimensional projections), the
fine-staircase step counts with their per-cell jump lower bound, and the
premeasure demonstration that the jump set is null for every dimension
above one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .domain import ResourceLimitError
from .geometry import dinf_points_segment

SQRT2 = math.sqrt(2.0)


@dataclass
class GridCheckReport:
    grid_size: tuple[int, int]
    eligible_points: int
    pass_points: int
    max_residual: float
    excluded: int
    tolerance: float
    step: float
    exclusion_radius: float

    @property
    def pass_rate(self) -> float:
        return self.pass_points / self.eligible_points if self.eligible_points else 0.0

    def as_dict(self) -> dict:
        return {
            "grid_size": list(self.grid_size),
            "eligible_points": self.eligible_points,
            "pass_points": self.pass_points,
            "pass_rate": self.pass_rate,
            "max_residual": self.max_residual,
            "excluded": self.excluded,
            "tolerance": self.tolerance,
            "step": self.step,
            "exclusion_radius": self.exclusion_radius,
        }


def _segment_linf_window_mask(
    mask: np.ndarray, xs: np.ndarray, ys: np.ndarray, seg, radius: float
) -> None:
    """Mark grid nodes within l-infinity ``radius`` of a segment, editing the
    boolean mask in place; only the index window near the segment is touched."""
    kind = seg.slope_kind()
    b1lo, b1hi = sorted((seg.a.x1, seg.b.x1))
    b2lo, b2hi = sorted((seg.a.x2, seg.b.x2))
    pad = 2.01 * radius
    i0 = int(np.searchsorted(xs, b1lo - pad, side="left"))
    i1 = int(np.searchsorted(xs, b1hi + pad, side="right"))
    j0 = int(np.searchsorted(ys, b2lo - pad, side="left"))
    j1 = int(np.searchsorted(ys, b2hi + pad, side="right"))
    if i0 >= i1 or j0 >= j1:
        return
    gx = xs[i0:i1][:, None]
    gy = ys[j0:j1][None, :]
    if kind == "vertical":
        d = np.maximum(
            np.abs(gx - seg.a.x1),
            np.maximum(np.maximum(b2lo - gy, gy - b2hi), 0.0),
        )
    elif kind == "horizontal":
        d = np.maximum(
            np.abs(gy - seg.a.x2),
            np.maximum(np.maximum(b1lo - gx, gx - b1hi), 0.0),
        )
    elif kind == "plus":
        du = np.abs((gx - gy) - seg.a.u)
        wlo, whi = sorted((seg.a.w, seg.b.w))
        wdist = np.maximum(np.maximum(wlo - (gx + gy), (gx + gy) - whi), 0.0)
        d = 0.5 * (du + wdist)
    elif kind == "minus":
        dw = np.abs((gx + gy) - seg.a.w)
        ulo, uhi = sorted((seg.a.u, seg.b.u))
        udist = np.maximum(np.maximum(ulo - (gx - gy), (gx - gy) - uhi), 0.0)
        d = 0.5 * (dw + udist)
    else:
        g1 = np.broadcast_to(gx, (i1 - i0, j1 - j0)).ravel()
        g2 = np.broadcast_to(gy, (i1 - i0, j1 - j0)).ravel()
        d = dinf_points_segment(g1, g2, seg).reshape(i1 - i0, j1 - j0)
    mask[i0:i1, j0:j1] |= d <= radius


def eikonal_grid_check(
    field,
    grid: int = 256,
    exclusion_radius: float | None = None,
    tolerance: float = 1e-6,
    step: float | None = None,
) -> GridCheckReport:
    """Central-difference check of max_i ||dv/dx_i| - 1| on interior grid
    nodes farther than ``exclusion_radius`` (l-infinity) from every jump
    segment and from the domain boundary, and covered by a piece."""
    if grid < 16:
        raise ValueError("grid must be at least 16")
    dom = field.domain
    x1min, x1max, x2min, x2max = dom.bbox
    xs = np.linspace(x1min, x1max, grid)
    ys = np.linspace(x2min, x2max, grid)
    cell = max((x1max - x1min), (x2max - x2min)) / (grid - 1)
    if exclusion_radius is None:
        exclusion_radius = 2.0 * cell
    if step is None:
        step = cell / 4.0

    X1, X2 = np.meshgrid(xs, ys, indexing="ij")
    flat1, flat2 = X1.ravel(), X2.ravel()

    near = np.zeros((grid, grid), dtype=bool)
    for seg in field.jump_segments():
        _segment_linf_window_mask(near, xs, ys, seg.seg, exclusion_radius)
    for seg in dom.boundary_segments:
        _segment_linf_window_mask(near, xs, ys, seg, exclusion_radius)

    in_domain = dom.contains_many(flat1, flat2, 0.0).reshape(grid, grid)
    if dom.kind == "staircase_bad":
        covered = in_domain  # pieces tile the treads exactly
    else:
        idx = field.locate_many(flat1, flat2).reshape(grid, grid)
        covered = idx >= 0
    eligible_mask = in_domain & covered & ~near
    total_in_domain = int(np.count_nonzero(in_domain))

    e1 = flat1[eligible_mask.ravel()]
    e2 = flat2[eligible_mask.ravel()]
    eligible = e1.size
    if eligible == 0:
        return GridCheckReport(
            (grid, grid), 0, 0, math.nan, total_in_domain, tolerance, step, exclusion_radius
        )
    vxp = field.eval_v_many(e1 + step, e2)
    vxm = field.eval_v_many(e1 - step, e2)
    vyp = field.eval_v_many(e1, e2 + step)
    vym = field.eval_v_many(e1, e2 - step)
    g1 = (vxp - vxm) / (2.0 * step)
    g2 = (vyp - vym) / (2.0 * step)
    res = np.maximum(np.abs(np.abs(g1) - 1.0), np.abs(np.abs(g2) - 1.0))
    passed = int(np.count_nonzero(res < tolerance))
    return GridCheckReport(
        grid_size=(grid, grid),
        eligible_points=eligible,
        pass_points=passed,
        max_residual=float(np.max(res)),
        excluded=total_in_domain - eligible,
        tolerance=tolerance,
        step=step,
        exclusion_radius=exclusion_radius,
    )


def slicing_count(segments, direction: str, n_lines: int) -> float:
    """Numerical integral of the crossing counts of uniformly spaced lines,
    an approximation of the coarea/projection integral that the slicing
    inequality bounds by the total segment length.

    ``direction='horizontal'`` sweeps horizontal lines (projection onto x2).
    Lines hitting a segment's lower endpoint exactly do not count (half-open
    extent), so collinear stacked segments are never double counted and a
    line containing a parallel segment counts zero.
    """
    if n_lines < 2:
        raise ValueError("n_lines must be >= 2")
    if direction not in ("horizontal", "vertical"):
        raise ValueError("direction must be 'horizontal' or 'vertical'")
    if not segments:
        return 0.0

    def extent(seg):
        s = seg.seg if hasattr(seg, "seg") else seg
        if direction == "horizontal":
            return sorted((s.a.x2, s.b.x2))
        return sorted((s.a.x1, s.b.x1))

    exts = np.array([extent(s) for s in segments])
    lo = float(np.min(exts[:, 0]))
    hi = float(np.max(exts[:, 1]))
    if hi <= lo:
        return 0.0
    delta = (hi - lo) / n_lines
    # line k sits at lo + (k + 1/2) delta; a segment covers the half-open
    # band (ymin, ymax]
    first = np.ceil((exts[:, 0] - lo) / delta - 0.5)
    last = np.ceil((exts[:, 1] - lo) / delta - 0.5) - 1.0
    first = np.clip(first, 0, n_lines - 1).astype(np.int64)
    last = np.clip(last, -1, n_lines - 1).astype(np.int64)
    diff = np.zeros(n_lines + 1, dtype=np.int64)
    valid = last >= first
    np.add.at(diff, first[valid], 1)
    np.add.at(diff, last[valid] + 1, -1)
    counts = np.cumsum(diff[:-1])
    return float(delta * np.sum(counts))


def _bad_predicate(n: int, N) -> mpmath.mpf:
    """The per-cell jump lower bound as a function of the step count."""
    s2 = mpmath.sqrt(2)
    return (s2 / (3 * 2 ** (n + 1))) * mpmath.log((s2 / 12) * N + 1) - s2 / (
        3 * 2 ** (n + 2)
    )


def choose_bad_N(n: int) -> int:
    """Smallest step count making the fine-staircase cell lower bound reach
    1; grows double-exponentially and is refused beyond n = 6."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > 6:
        raise ResourceLimitError(
            f"choose_bad_N({n}) refused: the step count exceeds double precision"
        )
    with mpmath.workdps(220):
        s2 = mpmath.sqrt(2)
        t = 3 * 2 ** (n + 1) / s2 + mpmath.mpf(1) / 2
        threshold = (12 / s2) * (mpmath.e**t - 1)
        N = int(mpmath.ceil(threshold))
        if _bad_predicate(n, N) < 1:
            N += 1  # guard against a ceiling landing just below the bound
        assert _bad_predicate(n, N) >= 1
    return N


def bad_staircase_lower_bound(dom, n: int, n_strips: int = 1000) -> float:
    """Exact piecewise integral of floor(|sigma| / (2 (t + h))) over
    t in (0, |sigma| / 4): the slicing lower bound for the number of jumps
    the cell forces on every admissible solution."""
    treads = dom.meta["treads"]
    if not 1 <= n <= len(treads):
        raise ValueError(f"tread {n} not built (depth {len(treads)})")
    tread = treads[n - 1]
    sigma = tread.sigma_length()
    h = tread.fine_height()
    with mpmath.workdps(80):
        B = mpmath.mpf(sigma) / 2
        hh = mpmath.mpf(h)
        S = mpmath.mpf(sigma) / 4 + hh
        klo = int(mpmath.floor(B / S))
        khi = int(mpmath.floor(B / hh))
        if klo == khi:
            exact = klo * (S - hh)
        else:
            exact = khi * (B / khi - hh) + klo * (S - B / (klo + 1))
            if khi - 1 >= klo + 1:
                # sum of k (B/k - B/(k+1)) = B (harmonic(khi) - harmonic(klo + 1))
                exact += B * (mpmath.digamma(khi + 1) - mpmath.digamma(klo + 2))
        exact_f = float(exact)
    if n_strips > 0:
        # right-endpoint Riemann sum of a decreasing integrand: certified
        # lower bound for the exact integral
        ts = (np.arange(1, n_strips + 1) / n_strips) * (sigma / 4.0)
        vals = np.floor((sigma / 2.0) / (ts + h))
        riemann = float(np.sum(vals) * (sigma / 4.0) / n_strips)
        if riemann > exact_f * (1.0 + 1e-9) + 1e-12:
            raise AssertionError("piecewise integral fell below its Riemann lower sum")
    return exact_f


def higher_t_vanishing_note(
    segments,
    t: float = 1.5,
    deltas: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4),
) -> dict:
    """Premeasure of covers by balls of radius delta: for a finite-length
    segment family the sum scales like delta^(t-1) times the length, so it
    vanishes as delta -> 0 for every t > 1 (and is stable for t = 1)."""
    lengths = []
    for s in segments:
        seg = s.seg if hasattr(s, "seg") else s
        lengths.append(seg.length())
    sums = {}
    for d in deltas:
        sums[d] = float(sum(math.ceil(ln / d) * d**t for ln in lengths))
    vals = [sums[d] for d in sorted(deltas, reverse=True)]
    monotone = all(b <= a * (1.0 + 1e-12) for a, b in zip(vals, vals[1:]))
    return {
        "t": t,
        "total_length": float(sum(lengths)),
        "cover_sums": sums,
        "monotone_decreasing": monotone,
    }
