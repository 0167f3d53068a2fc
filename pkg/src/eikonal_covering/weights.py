"""Weight family H and its admissibility analysis.

A weight is an increasing continuous H: R+ -> R+; it is admissible when
the integral of H(t)/t over (0, 1] is finite, the hypothesis under which
the distance-weighted jump functional of the covering construction is
finite.  Closed forms get analytic verdicts; tabulated weights are checked
numerically and may legitimately come back inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: numeric thresholds of the table-weight admissibility check
CONVERGE_REL = 1e-6
DIVERGE_TOTAL = 1e3
DYADIC_DEPTH = 40

ADMISSIBLE = "admissible"
INADMISSIBLE = "inadmissible"
INCONCLUSIVE = "inconclusive"


class WeightError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Weight:
    """H in one of the registered forms.

    power(alpha):      H(t) = t^alpha, alpha > 0 admissible
    log_power(beta):   H(t) = ln(e/t)^(-beta), beta > 1 admissible
    constant(c):       H(t) = c, inadmissible for c > 0
    table(ts, hs):     monotone linear interpolation
    """

    form: str
    alpha: float = 0.0
    table_t: np.ndarray | None = None
    table_h: np.ndarray | None = None

    def __call__(self, t):
        return eval_weight(self, t)

    def describe(self) -> str:
        if self.form in ("power", "log_power"):
            return f"{self.form}({self.alpha:g})"
        if self.form == "constant":
            return f"constant({self.alpha:g})"
        return f"table[{self.table_t.size} samples]"


def power_weight(alpha: float) -> Weight:
    if alpha < 0.0:
        raise WeightError(f"power weight needs alpha >= 0, got {alpha}")
    return Weight("power", alpha)


def log_power_weight(beta: float) -> Weight:
    if beta <= 0.0:
        raise WeightError(f"log_power weight needs beta > 0, got {beta}")
    return Weight("log_power", beta)


def constant_weight(c: float) -> Weight:
    if c < 0.0:
        raise WeightError(f"constant weight must be nonnegative, got {c}")
    return Weight("constant", c)


def table_weight(ts, hs) -> Weight:
    t_arr = np.asarray(ts, dtype=float)
    h_arr = np.asarray(hs, dtype=float)
    if t_arr.ndim != 1 or t_arr.shape != h_arr.shape or t_arr.size < 2:
        raise WeightError("table weight needs matching 1-d arrays of length >= 2")
    if not np.all(np.diff(t_arr) > 0.0):
        raise WeightError("table abscissae must be strictly increasing")
    if np.any(h_arr < 0.0) or np.any(np.diff(h_arr) < 0.0):
        raise WeightError("table values must be nonnegative and non-decreasing")
    if t_arr[0] < 0.0:
        raise WeightError("table abscissae must be nonnegative")
    return Weight("table", 0.0, t_arr, h_arr)


def eval_weight(w: Weight, t) -> float | np.ndarray:
    """H(t); vectorizes over numpy arrays.  Negative t is an error."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0):
        raise WeightError("weights are defined for t >= 0 only")
    if w.form == "power":
        if w.alpha == 0.0:
            out = np.ones_like(arr)
        else:
            out = np.where(arr > 0.0, arr**w.alpha, 0.0)
    elif w.form == "log_power":
        # ln(e/t) = 1 - ln t > 1 for t < 1; H increasing, H(0+) = 0
        with np.errstate(divide="ignore"):
            out = np.where(arr > 0.0, (1.0 - np.log(np.maximum(arr, 1e-320))) ** (-w.alpha), 0.0)
    elif w.form == "constant":
        out = np.full_like(arr, w.alpha)
    else:
        out = np.interp(arr, w.table_t, w.table_h)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class AdmissibilityResult:
    verdict: str
    diagnostic: float
    detail: str


def _dyadic_integral_blocks(w: Weight, depth: int = DYADIC_DEPTH) -> np.ndarray:
    """Integral of H(t)/t over the dyadic intervals [2^-(k+1), 2^-k],
    k = 0..depth-1, each by 16-point Gauss-Legendre in log t."""
    nodes, wts = np.polynomial.legendre.leggauss(16)
    blocks = np.empty(depth)
    for k in range(depth):
        lo, hi = -(k + 1.0) * math.log(2.0), -k * math.log(2.0)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        s = mid + half * nodes
        # substitute t = e^s: integral of H(e^s) ds
        blocks[k] = half * float(np.sum(wts * eval_weight(w, np.exp(s))))
    return blocks


def numeric_admissibility(w: Weight, depth: int = DYADIC_DEPTH) -> AdmissibilityResult:
    """Trend classification of the partial sums of the dyadic blocks."""
    blocks = _dyadic_integral_blocks(w, depth)
    total = float(np.sum(blocks))
    if total > DIVERGE_TOTAL:
        return AdmissibilityResult(INADMISSIBLE, total, "partial integral exceeded the divergence cap")
    tail = blocks[depth // 2 :]
    head = blocks[: depth // 2]
    if float(np.sum(tail)) <= CONVERGE_REL * max(total, 1e-300):
        return AdmissibilityResult(ADMISSIBLE, total, "tail blocks negligible")
    # harmonic-like divergence: deep blocks stop decaying
    if float(np.sum(tail)) > 0.5 * float(np.sum(head)):
        return AdmissibilityResult(
            INADMISSIBLE, total, "block sums do not decay with depth (divergent trend)"
        )
    ratios = blocks[1:][blocks[:-1] > 0] / blocks[:-1][blocks[:-1] > 0]
    if ratios.size and float(np.max(ratios[-8:])) < 0.95:
        return AdmissibilityResult(ADMISSIBLE, total, "block sums decay geometrically")
    return AdmissibilityResult(INCONCLUSIVE, total, "no clear trend at the probed depth")


def admissibility_check(w: Weight) -> AdmissibilityResult:
    """Analytic verdict for closed forms, numeric trend test for tables."""
    if w.form == "power":
        if w.alpha > 0.0:
            return AdmissibilityResult(ADMISSIBLE, 1.0 / w.alpha, "integral of t^(a-1) = 1/a")
        return AdmissibilityResult(INADMISSIBLE, math.inf, "integral of 1/t diverges")
    if w.form == "log_power":
        if w.alpha > 1.0:
            val = 1.0 / (w.alpha - 1.0)
            return AdmissibilityResult(ADMISSIBLE, val, "integral of u^(-beta) from 1, beta > 1")
        return AdmissibilityResult(INADMISSIBLE, math.inf, "log-power tail needs beta > 1")
    if w.form == "constant":
        if w.alpha == 0.0:
            return AdmissibilityResult(ADMISSIBLE, 0.0, "zero weight")
        return AdmissibilityResult(INADMISSIBLE, math.inf, "integral of c/t diverges")
    return numeric_admissibility(w)


@dataclass(frozen=True)
class CondensationReport:
    """Partial sums of sum H(1/n)/n and the condensed sum H(2^-n)."""

    harmonic_sums: np.ndarray
    dyadic_sums: np.ndarray
    harmonic_trend: str
    dyadic_trend: str


def _trend(partial_sums: np.ndarray) -> str:
    """Compare the last two doubling blocks of a partial-sum sequence."""
    n = partial_sums.size
    if n < 8:
        return INCONCLUSIVE
    last = partial_sums[-1] - partial_sums[n // 2 - 1]
    prev = partial_sums[n // 2 - 1] - partial_sums[n // 4 - 1]
    total = partial_sums[-1]
    if total > DIVERGE_TOTAL:
        return "diverging"
    if last <= CONVERGE_REL * max(total, 1e-300):
        return "converging"
    if prev > 0 and last / prev < 0.75:
        return "converging"
    return "diverging" if prev > 0 and last / prev > 0.9 else INCONCLUSIVE


def condensation_sum(w: Weight, n_max: int) -> CondensationReport:
    """Cauchy-condensation pair: the two series converge together for
    increasing H."""
    if n_max < 1:
        raise WeightError("n_max must be >= 1")
    n = np.arange(1, n_max + 1, dtype=float)
    harmonic = np.cumsum(eval_weight(w, 1.0 / n) / n)
    k = np.arange(1, min(n_max, 1060) + 1, dtype=float)
    dyadic = np.cumsum(eval_weight(w, 2.0**-k))
    return CondensationReport(harmonic, dyadic, _trend(harmonic), _trend(dyadic))


@dataclass(frozen=True)
class SchlomilchReport:
    u: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    partial_sums: np.ndarray
    trend: str


def schlomilch_check(w: Weight, epsilon: float, n_max: int) -> SchlomilchReport:
    """Condensation along u_n = floor((2 - eps)^n): the ratio condition
    (u_{n+1} - u_n) / (u_n - u_{n-1}) <= C and the partial sums of
    H(2 / u_n)."""
    if not 0.0 < epsilon < 1.0:
        raise WeightError("epsilon must be in (0, 1)")
    if n_max < 3:
        raise WeightError("n_max must be >= 3")
    base = 2.0 - epsilon
    ns = np.arange(1, n_max + 1)
    u = np.floor(base ** ns.astype(float)).astype(np.int64)
    diffs = np.diff(u)
    ratios = np.full(diffs.size - 1, np.nan)
    ok = diffs[:-1] > 0
    ratios[ok] = diffs[1:][ok] / diffs[:-1][ok]
    valid = ratios[~np.isnan(ratios)]
    max_ratio = float(np.max(valid)) if valid.size else math.nan
    sums = np.cumsum(eval_weight(w, 2.0 / u.astype(float)))
    return SchlomilchReport(u, ratios, max_ratio, sums, _trend(sums))
