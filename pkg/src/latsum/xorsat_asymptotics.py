"""Asymptotics of the 2-core 3XOR-SAT second-moment sum.

The summand over the (r, alpha) grid is

    S(r, alpha) = n 2^{m-n} 3^{3(1-r)m/2} C(m, 3(1-r)m/2)
                  S2(3rm, alpha n) S2(3(1-r)m, (1-alpha)n) / S2(3m, n),

living on the lattice r in (2/(3m)) Z + 1, alpha in (1/n) Z intersected with
[1/3, 1] x [0, 1].  With y = 3m/n in (2, 3) the summand is sandwiched by the
envelope g_{m,n}(r, alpha) e^{-n h_y(r, alpha)}, whose rate h_y vanishes only
at (1/2, 1/2); the normalized sum over the whole grid then tends to 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .numkernel import (
    LOG_ZERO,
    LogScalar,
    big_p,
    g_b,
    g_s,
    h_b,
    h_s,
    ln_big_a,
    ln_binomial,
)
from .stirling import StirlingTable, build_table

LN2 = math.log(2.0)
LN3 = math.log(3.0)

GRID_ALIGN_TOL = 1e-6


@dataclass(frozen=True)
class XorLattice:
    """Grid descriptor for clause count m and variable count n.

    r runs over 1 - 2j/(3m) for j = 0..m, alpha over i/n for i = 0..n, so
    3rm = 3m - 2j, (3/2)(1-r)m = j, and alpha n = i are integers by
    construction.  The asymptotic regime needs 2 < 3m/n < 3.
    """

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not 2 * self.n < 3 * self.m < 3 * self.n:
            raise ValueError(
                f"3m/n = {3 * self.m / self.n:.4f} outside the regime (2, 3)")

    @property
    def y(self) -> float:
        return 3.0 * self.m / self.n

    def r_value(self, j: int) -> float:
        return 1.0 - 2.0 * j / (3.0 * self.m)

    def alpha_value(self, i: int) -> float:
        return i / self.n

    @property
    def shape(self) -> tuple:
        return (self.m + 1, self.n + 1)


# ---------------------------------------------------------------------------
# trapezoid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trapezoid:
    """The region 1 - (1-r)y/2 <= alpha <= ry/2 where both Stirling factors
    of the summand can be nonzero; contains (1/2, 1/2) for every y in (2,3)."""

    y: float

    def __post_init__(self):
        if not 2.0 < self.y < 3.0:
            raise ValueError("trapezoid parameter y must lie in (2, 3)")

    def classify(self, r: float, alpha: float) -> str:
        """interior / boundary / exterior, exact on the given binary floats."""
        yq = Fraction(self.y)
        rq = Fraction(r)
        aq = Fraction(alpha)
        upper = rq * yq / 2
        lower = 1 - (1 - rq) * yq / 2
        if aq > upper or aq < lower:
            return "exterior"
        if aq == upper or aq == lower:
            return "boundary"
        return "interior"

    def contains(self, r: float, alpha: float) -> bool:
        return self.classify(r, alpha) != "exterior"


def classify_grid_point(m: int, n: int, j: int, i: int) -> str:
    """Trapezoid classification of the grid point (r, alpha) = (1 - 2j/3m, i/n)
    against y = 3m/n, in pure integer arithmetic."""
    if not 0 <= j <= m or not 0 <= i <= n:
        raise ValueError("grid indices out of range")
    # alpha <= ry/2  <=>  2i <= 3m - 2j ;  alpha >= 1 - (1-r)y/2  <=>  i >= n - j
    upper_slack = (3 * m - 2 * j) - 2 * i
    lower_slack = i - (n - j)
    if upper_slack < 0 or lower_slack < 0:
        return "exterior"
    if upper_slack == 0 or lower_slack == 0:
        return "boundary"
    return "interior"


def trapezoid_contains(y: float, r: float, alpha: float,
                       m: int | None = None, n: int | None = None) -> str:
    """Classification of (r, alpha); with m and n given, the point is snapped
    to its grid indices and classified in exact integer arithmetic."""
    if m is not None and n is not None:
        j = round(3 * m * (1.0 - r) / 2.0)
        i = round(alpha * n)
        return classify_grid_point(m, n, j, i)
    return Trapezoid(y).classify(r, alpha)


# ---------------------------------------------------------------------------
# summand and envelope on the grid
# ---------------------------------------------------------------------------


def _grid_indices(m: int, n: int, r: float, alpha: float) -> tuple:
    j = 3.0 * m * (1.0 - r) / 2.0
    i = alpha * n
    if abs(j - round(j)) > GRID_ALIGN_TOL or abs(i - round(i)) > GRID_ALIGN_TOL:
        raise ValueError(
            f"(r, alpha) = ({r}, {alpha}) is not aligned with the m={m}, "
            f"n={n} grid")
    return int(round(j)), int(round(i))


def summand_log_grid(table: StirlingTable, m: int, n: int, j: int, i: int) -> float:
    """ln S at grid indices (j, i); -inf where a Stirling factor vanishes."""
    p1 = 3 * m - 2 * j
    ln_s1 = table.log_value(p1, i)
    ln_s2 = table.log_value(2 * j, n - i)
    if ln_s1 == LOG_ZERO or ln_s2 == LOG_ZERO:
        return LOG_ZERO
    return (
        math.log(n)
        + (m - n) * LN2
        + j * LN3
        + ln_binomial(m, j)
        + ln_s1
        + ln_s2
        - table.log_value(3 * m, n)
    )


def summand_log(table: StirlingTable, m: int, n: int,
                r: float, alpha: float) -> LogScalar:
    """Second-moment summand at a grid point, in log space.

    Assembled from the factorial, binomial and Stirling-table pieces; exactly
    zero wherever either Stirling factor is zero.  The (1, 1) corner comes out
    as n 2^{m-n} because the S2(3m, n) factors cancel.
    """
    if table.p_max < 3 * m:
        raise ValueError(f"Stirling table covers p <= {table.p_max} < 3m = {3 * m}")
    j, i = _grid_indices(m, n, r, alpha)
    lv = summand_log_grid(table, m, n, j, i)
    if lv == LOG_ZERO:
        return LogScalar.zero()
    return LogScalar(1, lv)


def g_mn(m: int, n: int, r: float, alpha: float) -> float:
    """Slowly varying prefactor of the summand envelope at a grid point.

    Zero outside the trapezoid (a Stirling prefactor vanishes there);
    r = 1 is rejected, the prefactor is singular at the (1, 1) corner.
    """
    j, i = _grid_indices(m, n, r, alpha)
    if j == 0:
        raise ValueError("g_mn is not defined at r = 1")
    return float(_g_mn_grid(m, n, j, np.asarray([i]))[0])


def _g_mn_grid(m: int, n: int, j: int, i: np.ndarray) -> np.ndarray:
    """Vectorized g_mn over alpha indices i at fixed r index j >= 1."""
    p1 = 3 * m - 2 * j
    num = (
        g_s(np.full_like(i, p1), i)
        * g_s(np.full_like(i, 2 * j), n - i)
        * g_b(i, np.full_like(i, n))
        * g_b(j, m)
    )
    den = g_s(3 * m, n) * g_b(p1, 3 * m)
    return n * num / den


def g_y_closed(y: float, r, alpha):
    """Closed form of the envelope prefactor on the open trapezoid interior:
    sqrt(r) P(y) / (pi a (1-a) sqrt(3r-1) P(ry/a) P((1-r)y/(1-a))).

    Singular (inf) on the r = 1/3 edge and as alpha reaches the slanted
    boundary; the piecewise g_mn stays finite there instead.
    """
    r_arr = np.asarray(r, dtype=float)
    a_arr = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore"):
        out = (np.sqrt(r_arr) * big_p(y)
               / (math.pi * a_arr * (1.0 - a_arr) * np.sqrt(3.0 * r_arr - 1.0)
                  * np.asarray(big_p(r_arr * y / a_arr))
                  * np.asarray(big_p((1.0 - r_arr) * y / (1.0 - a_arr)))))
    return out if (np.ndim(r) or np.ndim(alpha)) else float(out)


# ---------------------------------------------------------------------------
# the rate function h_y
# ---------------------------------------------------------------------------


def _validate_domain(r_arr: np.ndarray, a_arr: np.ndarray) -> None:
    if np.any(r_arr < 1.0 / 3.0 - 1e-12) or np.any(r_arr >= 1.0):
        raise ValueError("r must lie in [1/3, 1); the (1,1) corner is excluded")
    if np.any((a_arr < 0.0) | (a_arr > 1.0)):
        raise ValueError("alpha must lie in [0, 1]")


def _h_y_formula(y: float, rr: np.ndarray, aa: np.ndarray) -> np.ndarray:
    """The trapezoid branch of h_y, with the conventions 0 * h_s(..) = 0 at
    alpha in {0, 1}.  Safe to evaluate on the closed trapezoid and within
    rounding slop of its boundary (h_s is continuous at argument 2)."""
    pos = aa > 0.0
    sub = aa < 1.0
    arg1 = rr * y / np.where(pos, aa, 1.0)
    arg2 = (1.0 - rr) * y / np.where(sub, 1.0 - aa, 1.0)
    t1 = np.where(pos, aa * np.asarray(h_s(np.maximum(arg1, 1e-300))), 0.0)
    t2 = np.where(sub, (1.0 - aa) * np.asarray(h_s(np.maximum(arg2, 1e-300))), 0.0)
    return (
        t1
        + t2
        - h_s(y)
        + np.asarray(h_b(aa))
        + LN2
        - y * (np.asarray(h_b(rr))
               - np.asarray(h_b(np.clip(1.5 * (1.0 - rr), 0.0, 1.0))) / 3.0
               + LN2 / 3.0
               + LN3 * (1.0 - rr) / 2.0)
    )


# Absolute slack when classifying against the trapezoid in floats; keeps
# grid points that sit exactly on the slanted boundary on the inside branch.
_TRAP_TOL = 32 * np.finfo(float).eps


def h_y_grid(y: float, r, alpha) -> np.ndarray:
    """Vectorized h_y; the displayed formula on the trapezoid, 1 outside."""
    if not 2.0 < y < 3.0:
        raise ValueError("y must lie in (2, 3)")
    r_arr, a_arr = np.broadcast_arrays(
        np.asarray(r, dtype=float), np.asarray(alpha, dtype=float))
    _validate_domain(r_arr, a_arr)
    inside = ((a_arr <= r_arr * y / 2.0 + _TRAP_TOL)
              & (a_arr >= 1.0 - (1.0 - r_arr) * y / 2.0 - _TRAP_TOL))
    out = np.ones(r_arr.shape)
    if not np.any(inside):
        return out
    rr = np.where(inside, r_arr, 0.5)
    aa = np.where(inside, a_arr, 0.5)
    val = _h_y_formula(y, rr, aa)
    return np.where(inside, val, out)


def h_y_eval(y: float, r: float, alpha: float) -> float:
    """Scalar h_y(r, alpha)."""
    return float(h_y_grid(y, np.asarray([r]), np.asarray([alpha]))[0])


def h_y_gradient_fd(y: float, r: float = 0.5, alpha: float = 0.5,
                    step: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of h_y."""
    dr = (h_y_eval(y, r + step, alpha) - h_y_eval(y, r - step, alpha)) / (2 * step)
    da = (h_y_eval(y, r, alpha + step) - h_y_eval(y, r, alpha - step)) / (2 * step)
    return np.array([dr, da])


# ---------------------------------------------------------------------------
# minimizer curve
# ---------------------------------------------------------------------------


def _ln_l(y: float, r: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """ln L_{r,y}(alpha) = ln(alpha/(1-alpha)) + ln A((1-r)y/(1-alpha))
    - ln A(ry/alpha); increasing in alpha, with limits -inf and +inf at the
    ends of the admissible interval."""
    return (
        np.log(alpha)
        - np.log1p(-alpha)
        + np.asarray(ln_big_a((1.0 - r) * y / (1.0 - alpha)))
        - np.asarray(ln_big_a(r * y / alpha))
    )


def _ln_l_beta(y: float, r: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """ln L in terms of beta = 1 - alpha; every piece stays well conditioned
    when the root sits close to alpha = 1 (r near 1)."""
    return (
        np.log1p(-beta)
        - np.log(beta)
        + np.asarray(ln_big_a((1.0 - r) * y / beta))
        - np.asarray(ln_big_a(r * y / (1.0 - beta)))
    )


def alpha_y_curve(y: float, r) -> np.ndarray:
    """Minimizer alpha_y(r) of alpha -> h_y(r, alpha), vectorized over r.

    Unique root of L_{r,y}(alpha) = 1 strictly inside the trapezoid slice;
    found by bisection (L is monotone, so this cannot be fooled by the
    ill-conditioned derivatives of A near argument 2).  The bisection runs in
    beta = 1 - alpha, where the float grid is fine enough next to alpha = 1,
    and returns whichever neighboring float of the result has the smallest
    residual |ln L|.
    """
    if not 2.0 < y < 3.0:
        raise ValueError("y must lie in (2, 3)")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any((r_arr < 1.0 / 3.0 - 1e-12) | (r_arr >= 1.0)):
        raise ValueError("r must lie in [1/3, 1)")
    lo = np.maximum(1.0 - r_arr * y / 2.0, 0.0)       # beta at alpha = ry/2 or 1
    hi = (1.0 - r_arr) * y / 2.0                      # beta at the lower alpha edge
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        high = _ln_l_beta(y, r_arr, mid) > 0.0        # ln L decreases in beta
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    alpha = 1.0 - 0.5 * (lo + hi)
    # snap to the float neighbor with the smallest residual, evaluated the
    # same way a caller would (from alpha)
    candidates = np.stack([
        alpha,
        np.nextafter(alpha, 0.0),
        np.nextafter(alpha, 1.0),
    ])
    resid = np.abs(_ln_l(y, np.broadcast_to(r_arr, candidates.shape), candidates))
    alpha = candidates[np.argmin(resid, axis=0), np.arange(alpha.size)]
    best = np.min(resid, axis=0)
    if np.any(best > 1e-9):
        raise RuntimeError(
            f"alpha_y bisection failed to bracket, residual {best.max():.3e}")
    return alpha if np.ndim(r) else alpha[0]


def alpha_y(y: float, r: float) -> float:
    """Scalar minimizer alpha_y(r)."""
    return float(alpha_y_curve(y, np.asarray([r]))[0])


def curve_values(y: float, r) -> np.ndarray:
    """h_y along the minimizer curve (r, alpha_y(r))."""
    r_arr = np.asarray(r, dtype=float)
    return h_y_grid(y, r_arr, alpha_y_curve(y, r_arr))


# ---------------------------------------------------------------------------
# center data and certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CenterData:
    """Everything the asymptote formula needs at (1/2, 1/2)."""

    y: float
    g_center: float
    hessian: np.ndarray
    det_a: float

    def det_hessian(self) -> float:
        h = self.hessian
        return float(h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0])

    def omega_ratio(self) -> float:
        """2 pi g(1/2,1/2) / (|det A| sqrt(det Hessian)); equals 1."""
        return (2.0 * math.pi * self.g_center
                / (self.det_a * math.sqrt(self.det_hessian())))


def center_data(y: float) -> CenterData:
    """g, Hessian and lattice determinant at the center, for given y = 3c."""
    if not 2.0 < y < 3.0:
        raise ValueError("y must lie in (2, 3)")
    p = big_p(y)
    a = 4.0 * y * y / (p * p)
    hessian = np.array([[a, -a], [-a, a + 4.0]])
    return CenterData(y=y, g_center=4.0 / (math.pi * p), hessian=hessian,
                      det_a=2.0 / y)


def hessian_fd(y: float, step: float = 1e-4) -> np.ndarray:
    """Central second differences of h_y at (1/2, 1/2)."""
    r0 = alpha0 = 0.5
    f = h_y_eval
    f00 = f(y, r0, alpha0)
    h_rr = (f(y, r0 + step, alpha0) - 2 * f00 + f(y, r0 - step, alpha0)) / step**2
    h_aa = (f(y, r0, alpha0 + step) - 2 * f00 + f(y, r0, alpha0 - step)) / step**2
    h_ra = (
        f(y, r0 + step, alpha0 + step)
        - f(y, r0 + step, alpha0 - step)
        - f(y, r0 - step, alpha0 + step)
        + f(y, r0 - step, alpha0 - step)
    ) / (4 * step**2)
    return np.array([[h_rr, h_ra], [h_ra, h_aa]])


def hessian_fd_check(y: float, step: float = 1e-4) -> float:
    """Max entrywise relative deviation of the FD Hessian from the closed form."""
    fd = hessian_fd(y, step)
    exact = center_data(y).hessian
    return float(np.max(np.abs(fd - exact) / np.abs(exact)))


def positivity_certificate(y: float, excluded_radius: float = 0.05,
                           grid_per_axis: int = 400) -> float:
    """Minimum of h_y over a uniform grid of [1/3, 1) x [0, 1] minus the ball
    around (1/2, 1/2), together with the minimum along the minimizer curve
    off the ball.  A numerical certificate, not a proof."""
    if excluded_radius <= 0:
        raise ValueError("excluded_radius must be positive")
    r_grid = np.linspace(1.0 / 3.0, 1.0, grid_per_axis, endpoint=False)
    a_grid = np.linspace(0.0, 1.0, grid_per_axis)
    rr, aa = np.meshgrid(r_grid, a_grid, indexing="ij")
    vals = h_y_grid(y, rr, aa)
    off_ball = (rr - 0.5) ** 2 + (aa - 0.5) ** 2 > excluded_radius**2
    grid_min = float(vals[off_ball].min())
    curve_alpha = alpha_y_curve(y, r_grid)
    on_curve = h_y_grid(y, r_grid, curve_alpha)
    curve_mask = (r_grid - 0.5) ** 2 + (curve_alpha - 0.5) ** 2 > excluded_radius**2
    curve_min = float(on_curve[curve_mask].min())
    return min(grid_min, curve_min)


# ---------------------------------------------------------------------------
# the limit experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SumLimitRow:
    n: int
    m: int
    normalized_sum: float
    corner_term: float
    err_vs_1: float


def grid_sum_log(table: StirlingTable, m: int, n: int) -> float:
    """ln of the full-grid summand sum, r = 1 column included.

    Row partials (fixed j, vector over i) are reduced first, then merged, so
    the result is deterministic.
    """
    if table.mode != "log":
        raise ValueError("grid_sum_log needs a log-mode table")
    if table.p_max < 3 * m:
        raise ValueError("table too small for 3m")
    base = math.log(n) + (m - n) * LN2 - table.log_value(3 * m, n)
    partials = []
    for j in range(0, m + 1):
        p1 = 3 * m - 2 * j
        i_lo = max(0, n - j)
        i_hi = min(n, p1 // 2)
        if i_lo > i_hi:
            continue
        i = np.arange(i_lo, i_hi + 1)
        vals = (base + j * LN3 + ln_binomial(m, j)
                + table.log_row(p1)[i] + table.log_row(2 * j)[n - i])
        finite = vals[np.isfinite(vals)]
        if finite.size:
            partials.append(float(logsumexp(finite)))
    if not partials:
        return LOG_ZERO
    return float(logsumexp(np.array(partials)))


def sum_limit_experiment(c: float, n_list, table: StirlingTable | None = None) -> list:
    """Normalized grid sums for m = round(c n) along a list of sizes.

    The corner term is the exact contribution 2^{m-n} of the (1, 1) grid
    point, reported separately because it is the only grid value known in
    closed form at finite size.
    """
    if not 2.0 / 3.0 < c < 1.0:
        raise ValueError(f"c = {c} outside the regime (2/3, 1)")
    pairs = []
    for n in n_list:
        n = int(n)
        m = round(c * n)
        XorLattice(m, n)  # validates the 2 < 3m/n < 3 regime
        pairs.append((n, m))
    p_needed = max(3 * m for _, m in pairs)
    if table is None:
        table = build_table(p_needed, "log")
    elif table.mode != "log" or table.p_max < p_needed:
        raise ValueError("provided table unusable (mode or size)")
    rows = []
    for n, m in pairs:
        total = grid_sum_log(table, m, n)
        normalized = math.exp(total - math.log(n))
        corner = math.ldexp(1.0, m - n)
        rows.append(SumLimitRow(n=n, m=m, normalized_sum=normalized,
                                corner_term=corner,
                                err_vs_1=abs(normalized - 1.0)))
    return rows


def write_sum_limit_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "normalized_sum", "corner_term", "err_vs_1"])
        for row in rows:
            writer.writerow([row.n, row.m, repr(row.normalized_sum),
                             repr(row.corner_term), repr(row.err_vs_1)])


def write_alpha_curve_csv(y: float, r_grid, path) -> None:
    r_arr = np.asarray(r_grid, dtype=float)
    alpha = alpha_y_curve(y, r_arr)
    hv = h_y_grid(y, r_arr, alpha)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "alpha_y", "h_on_curve"])
        for r, a, h in zip(r_arr, alpha, hv):
            writer.writerow([repr(float(r)), repr(float(a)), repr(float(h))])


# ---------------------------------------------------------------------------
# envelope diagnostics
# ---------------------------------------------------------------------------


def envelope_margin(table: StirlingTable, m: int, n: int) -> float:
    """Measured ln C such that ln S <= ln C + ln g_mn - n h_y on the whole
    r < 1 support; finite because the envelope dominates the summand."""
    y = 3.0 * m / n
    base = math.log(n) + (m - n) * LN2 - table.log_value(3 * m, n)
    j_parts, i_parts, ln_s_parts = [], [], []
    for j in range(1, m + 1):
        p1 = 3 * m - 2 * j
        i_lo = max(0, n - j)
        i_hi = min(n, p1 // 2)
        if i_lo > i_hi:
            continue
        i = np.arange(i_lo, i_hi + 1)
        ln_s = (base + j * LN3 + ln_binomial(m, j)
                + table.log_row(p1)[i] + table.log_row(2 * j)[n - i])
        support = np.isfinite(ln_s)
        if not np.any(support):
            continue
        j_parts.append(np.full(int(support.sum()), j))
        i_parts.append(i[support])
        ln_s_parts.append(ln_s[support])
    if not j_parts:
        return -math.inf
    j_all = np.concatenate(j_parts)
    i_all = np.concatenate(i_parts)
    ln_s_all = np.concatenate(ln_s_parts)
    p1 = 3 * m - 2 * j_all
    g_vals = (n * g_s(p1, i_all) * g_s(2 * j_all, n - i_all)
              * g_b(i_all, np.full_like(i_all, n)) * g_b(j_all, np.full_like(j_all, m))
              / (g_s(3 * m, n) * g_b(p1, np.full_like(p1, 3 * m))))
    # support points lie in the closed trapezoid by the Stirling zero
    # pattern, so evaluate the trapezoid branch directly
    h_vals = _h_y_formula(y, 1.0 - 2.0 * j_all / (3.0 * m), i_all / n)
    ln_env = np.log(g_vals) - n * h_vals
    return float(np.max(ln_s_all - ln_env))


def local_asymptotics_error(table: StirlingTable, m: int, n: int,
                            radius: float = 0.05) -> float:
    """Max |S / (g e^{-n h}) - 1| over grid points within the given radius of
    (1/2, 1/2); shrinks as the grid refines."""
    y = 3.0 * m / n
    base = math.log(n) + (m - n) * LN2 - table.log_value(3 * m, n)
    worst = 0.0
    j_lo = max(1, math.floor(3 * m * (0.5 - radius) / 2))
    j_hi = min(m, math.ceil(3 * m * (0.5 + radius) / 2))
    for j in range(j_lo, j_hi + 1):
        r = 1.0 - 2.0 * j / (3.0 * m)
        dr2 = (r - 0.5) ** 2
        if dr2 > radius**2:
            continue
        da = math.sqrt(radius**2 - dr2)
        i_lo = max(0, n - j, math.ceil((0.5 - da) * n))
        i_hi = min(n, (3 * m - 2 * j) // 2, math.floor((0.5 + da) * n))
        if i_lo > i_hi:
            continue
        i = np.arange(i_lo, i_hi + 1)
        ln_s = (base + j * LN3 + ln_binomial(m, j)
                + table.log_row(3 * m - 2 * j)[i] + table.log_row(2 * j)[n - i])
        g_vals = _g_mn_grid(m, n, j, i)
        h_vals = _h_y_formula(y, np.full(i.shape, r), i / n)
        ln_env = np.log(g_vals) - n * h_vals
        worst = max(worst, float(np.max(np.abs(np.exp(ln_s - ln_env) - 1.0))))
    return worst
