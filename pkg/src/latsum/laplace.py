"""Discrete Laplace lattice sums.

Enumerates the points of a scaled affine grid inside a bounded region,
accumulates log-space sums of g(x) e^{-n h(x)} (or of arbitrary discrete
summands), and compares them against the closed-form asymptote and a
continuous quadrature reference.

Summation contract: points are visited in lexicographic order of the integer
coordinates, partial sums are formed per block of the trailing coordinate and
merged in a fixed reduction tree, so repeated runs are bit-identical.
Summand callables must be pure; they may be invoked concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .numkernel import LOG_ZERO, LogScalar, _ln_sub_exp

_MEMBERSHIP_SLACK = 8 * np.finfo(float).eps


class FamilyEvaluationError(RuntimeError):
    """A summand family failed (raised or returned non-finite) at a point."""

    def __init__(self, point, detail):
        self.point = np.asarray(point)
        super().__init__(f"family evaluation failed at {self.point}: {detail}")


@dataclass(frozen=True, eq=False)
class Lattice:
    """The affine grid (1/n) A z + v over integer vectors z."""

    n: int
    a_matrix: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if self.n < 1:
            raise ValueError("lattice scale n must be a positive integer")
        if a.shape[0] != a.shape[1] or a.shape[0] != v.size:
            raise ValueError("a_matrix must be d x d and v of length d")
        if abs(np.linalg.det(a)) <= 1e-12:
            raise ValueError("a_matrix must be invertible (|det| > 1e-12)")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.v.size

    @property
    def det_a(self) -> float:
        return float(np.linalg.det(self.a_matrix))

    def points_of(self, z: np.ndarray) -> np.ndarray:
        """Map integer vectors (N, d) to lattice points (N, d)."""
        return z @ self.a_matrix.T / self.n + self.v


@dataclass(frozen=True, eq=False)
class Region:
    """A bounded region: an axis box, optionally restricted by a predicate.

    Predicate regions carry their enclosing box; the predicate receives an
    (N, d) array and returns a boolean mask.
    """

    lower: np.ndarray
    upper: np.ndarray
    predicate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
            raise ValueError("region bounds must be finite arrays of equal length")
        if np.any(hi < lo):
            raise ValueError("region upper bounds must dominate lower bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def box(cls, lower, upper) -> "Region":
        return cls(lower=lower, upper=upper)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership mask; box bounds get an 8-ulp slack so grid points that
        land on a face are not lost to rounding of (1/n) A z + v."""
        pts = np.atleast_2d(points)
        tol = _MEMBERSHIP_SLACK * np.maximum(1.0, np.maximum(np.abs(self.lower),
                                                             np.abs(self.upper)))
        mask = np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)
        if self.predicate is not None:
            mask &= np.asarray(self.predicate(pts), dtype=bool)
        return mask


@dataclass(eq=False)
class SummandFamily:
    """Evaluation bundle for one problem instance.

    ``eval_g`` and ``eval_h`` map an (N, d) array of points to (N,) values;
    ``eval_s``, when present, maps points to a (signs, log magnitudes) pair.
    ``hessian_at_x0`` must be symmetric positive definite.  Families must be
    pure: the engine may evaluate blocks of points in any grouping.
    """

    eval_g: Callable[[np.ndarray], np.ndarray]
    eval_h: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    h_at_x0: float
    hessian_at_x0: np.ndarray
    a_limit: np.ndarray
    eval_s: Optional[Callable[[np.ndarray], tuple]] = None

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.hessian_at_x0 = np.atleast_2d(np.asarray(self.hessian_at_x0, dtype=float))
        self.a_limit = np.atleast_2d(np.asarray(self.a_limit, dtype=float))
        if not np.allclose(self.hessian_at_x0, self.hessian_at_x0.T, atol=1e-10):
            raise ValueError("hessian_at_x0 must be symmetric")
        np.linalg.cholesky(self.hessian_at_x0)  # raises if not positive definite

    @property
    def d(self) -> int:
        return self.x0.size

    def g_at_x0(self) -> float:
        return float(np.asarray(self.eval_g(self.x0[None, :]))[0])

    def ln_det_hessian(self) -> float:
        chol = np.linalg.cholesky(self.hessian_at_x0)
        return 2.0 * float(np.sum(np.log(np.diag(chol))))


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _integer_ranges(lattice: Lattice, region: Region) -> tuple:
    """Per-coordinate integer ranges covering n A^{-1}(box - v), with +-1 slack."""
    d = lattice.d
    corners = np.array(np.meshgrid(*[(region.lower[i], region.upper[i])
                                     for i in range(d)], indexing="ij"))
    corners = corners.reshape(d, -1).T  # (2^d, d)
    z_img = (corners - lattice.v) @ np.linalg.inv(lattice.a_matrix).T * lattice.n
    z_lo = np.floor(z_img.min(axis=0)).astype(np.int64) - 1
    z_hi = np.ceil(z_img.max(axis=0)).astype(np.int64) + 1
    return z_lo, z_hi


def iter_point_blocks(lattice: Lattice, region: Region):
    """Yield (Z, X) arrays of member points, lexicographic in z.

    Leading coordinates index the blocks; the trailing coordinate is
    vectorized within each block.
    """
    z_lo, z_hi = _integer_ranges(lattice, region)
    d = lattice.d
    tail = np.arange(z_lo[-1], z_hi[-1] + 1, dtype=np.int64)
    if tail.size == 0:
        return
    if d == 1:
        z = tail[:, None]
        x = lattice.points_of(z)
        keep = region.contains(x)
        if np.any(keep):
            yield z[keep], x[keep]
        return
    lead_ranges = [range(z_lo[i], z_hi[i] + 1) for i in range(d - 1)]
    z_block = np.empty((tail.size, d), dtype=np.int64)
    z_block[:, -1] = tail
    for lead in np.ndindex(*[len(r) for r in lead_ranges]):
        for i, li in enumerate(lead):
            z_block[:, i] = z_lo[i] + li
        x = lattice.points_of(z_block)
        keep = region.contains(x)
        if np.any(keep):
            yield z_block[keep].copy(), x[keep]


def lattice_points(lattice: Lattice, region: Region):
    """Stream of lattice points inside the region, deterministic order."""
    for _, x in iter_point_blocks(lattice, region):
        yield from x


def count_lattice_points(lattice: Lattice, region: Region) -> int:
    return sum(x.shape[0] for _, x in iter_point_blocks(lattice, region))


# ---------------------------------------------------------------------------
# log-space summation
# ---------------------------------------------------------------------------


def _family_terms(family: SummandFamily, x: np.ndarray, n: int, use: str):
    """Signs and log magnitudes of the chosen summand at points x."""
    if use not in ("s_k", "g_exp_h"):
        raise ValueError(f"unknown summand selector {use!r}")
    if use == "s_k" and family.eval_s is None:
        raise ValueError("family has no eval_s")
    try:
        if use == "s_k":
            signs, logs = family.eval_s(x)
            signs = np.asarray(signs, dtype=float)
            logs = np.asarray(logs, dtype=float)
        else:
            g = np.asarray(family.eval_g(x), dtype=float)
            h = np.asarray(family.eval_h(x), dtype=float)
            if np.any(~np.isfinite(h)):
                bad = x[np.argmax(~np.isfinite(h))]
                raise FamilyEvaluationError(bad, "h is not finite")
            signs = np.sign(g)
            with np.errstate(divide="ignore"):
                logs = np.where(signs != 0.0, np.log(np.abs(np.where(g != 0, g, 1.0))), LOG_ZERO)
            logs = logs - n * h
    except FamilyEvaluationError:
        raise
    except Exception as exc:  # locate the offending point for the caller
        for row in np.atleast_2d(x):
            try:
                if use == "s_k":
                    family.eval_s(row[None, :])
                else:
                    family.eval_g(row[None, :])
                    family.eval_h(row[None, :])
            except Exception as inner:
                raise FamilyEvaluationError(row, inner) from exc
        raise FamilyEvaluationError(np.atleast_2d(x)[0], exc) from exc
    if np.any(np.isnan(logs[signs != 0])):
        bad = x[np.argmax(np.isnan(logs) & (signs != 0))]
        raise FamilyEvaluationError(bad, "summand log magnitude is NaN")
    return signs, logs


def _signed_logsumexp(logs: np.ndarray, signs: np.ndarray) -> tuple:
    """(sign, ln|sum|) of sum signs[i] e^{logs[i]}.

    Positive and negative parts reduce separately (plain logsumexp is safe),
    then combine; exact cancellation of the parts gives an exact zero.
    """
    def one_side(mask):
        vals = logs[mask]
        vals = vals[vals > LOG_ZERO]
        return float(logsumexp(vals)) if vals.size else LOG_ZERO

    pos = one_side(signs > 0)
    neg = one_side(signs < 0)
    if pos == neg:
        return 0, LOG_ZERO
    if pos > neg:
        return 1, _ln_sub_exp(pos, neg)
    return -1, _ln_sub_exp(neg, pos)


def _combine_partials(partials) -> LogScalar:
    """Merge (sign, log) block partials with one fixed signed reduction."""
    if not partials:
        return LogScalar.zero()
    signs = np.array([p[0] for p in partials], dtype=float)
    logs = np.array([p[1] for p in partials])
    sign, total = _signed_logsumexp(logs, signs)
    if sign == 0:
        return LogScalar.zero()
    return LogScalar(sign, total)


def discrete_sum(family: SummandFamily, lattice: Lattice, region: Region,
                 use: str = "g_exp_h") -> LogScalar:
    """Log-space sum of the summand over all lattice points in the region."""
    partials = []
    for _, x in iter_point_blocks(lattice, region):
        signs, logs = _family_terms(family, x, lattice.n, use)
        if np.all(signs == 0):
            continue
        sgn, lse = _signed_logsumexp(logs, signs)
        partials.append((float(sgn), lse))
    return _combine_partials(partials)


def omega_asymptote(family: SummandFamily, n: int) -> LogScalar:
    """Closed-form asymptote (2 pi n)^{d/2} g(x0) e^{-n h(x0)} /
    (|det A| sqrt(det Hessian)), in log space."""
    d = family.d
    g0 = family.g_at_x0()
    if g0 == 0.0:
        return LogScalar.zero()
    ln_det_a = math.log(abs(np.linalg.det(family.a_limit)))
    ln_mag = (
        0.5 * d * math.log(2.0 * math.pi * n)
        + math.log(abs(g0))
        - n * family.h_at_x0
        - ln_det_a
        - 0.5 * family.ln_det_hessian()
    )
    return LogScalar(1 if g0 > 0 else -1, ln_mag)


def omega_limit(family: SummandFamily) -> float:
    """Limit of the normalized sum: (2 pi)^{d/2} g(x0) / (|det A| sqrt(det H))."""
    d = family.d
    return float((2.0 * math.pi) ** (0.5 * d) * family.g_at_x0()
                 / (abs(np.linalg.det(family.a_limit))
                    * math.exp(0.5 * family.ln_det_hessian())))


def normalized_discrete_sum(family: SummandFamily, lattice: Lattice,
                            region: Region, use: str = "g_exp_h") -> float:
    """n^{-d/2} e^{n h(x0)} times the discrete sum, as a float."""
    total = discrete_sum(family, lattice, region, use)
    if total.is_zero:
        return 0.0
    ln_norm = (-0.5 * family.d * math.log(lattice.n)
               + lattice.n * family.h_at_x0)
    return total.sign * math.exp(total.log_mag + ln_norm)


# ---------------------------------------------------------------------------
# references
# ---------------------------------------------------------------------------


def gaussian_lattice_sum(h_matrix, x0, lattice: Lattice, region: Region) -> float:
    """n^{-d/2} sum over the region of exp(-(n/2)(x-x0)^T H (x-x0)).

    Converges to (2 pi)^{d/2} / (|det A| sqrt(det H)) as the grid refines.
    """
    h = np.atleast_2d(np.asarray(h_matrix, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    np.linalg.cholesky(h)
    if not bool(region.contains(x0[None, :])[0]):
        raise ValueError("x0 must lie inside the region")
    n = lattice.n
    block_sums = []
    for _, x in iter_point_blocks(lattice, region):
        dx = x - x0
        quad = np.einsum("ni,ij,nj->n", dx, h, dx)
        block_sums.append(float(np.sum(np.exp(-0.5 * n * quad))))
    return n ** (-0.5 * lattice.d) * math.fsum(block_sums)


def _scalarized(fn, d):
    def call(*coords):
        pt = np.array([coords], dtype=float)
        return float(np.asarray(fn(pt))[0])
    return call


def find_minimum(h, region: Region, grid: int = 201) -> np.ndarray:
    """Locate the interior minimizer of h by grid scan plus local refinement."""
    d = region.d
    axes = [np.linspace(region.lower[i], region.upper[i], grid) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.asarray(h(pts))
    start = pts[int(np.argmin(vals))]
    hs = _scalarized(h, d)
    res = optimize.minimize(lambda x: hs(*x), start, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-14})
    return np.clip(res.x, region.lower, region.upper)


def continuous_reference(g, h, region: Region, n: int,
                         x0=None, abs_tol: float = 1e-9) -> float:
    """Adaptive quadrature of n^{d/2} e^{n h(x0)} int g e^{-n h} over the box.

    Only the quadrature reference for d <= 2; raises if the integrator cannot
    certify the requested absolute tolerance on the normalized value.
    """
    d = region.d
    if d > 2:
        raise ValueError("quadrature reference supports d <= 2 only")
    if region.predicate is not None:
        raise ValueError("quadrature reference needs a plain box region")
    if x0 is None:
        x0 = find_minimum(h, region, grid=201 if d == 1 else 101)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    h0 = float(np.asarray(h(x0[None, :]))[0])
    scale = n ** (0.5 * d)

    def integrand(pts):
        hv = np.asarray(h(pts))
        return np.asarray(g(pts)) * np.exp(-n * (hv - h0))

    fs = _scalarized(integrand, d)
    raw_tol = abs_tol / scale
    if d == 1:
        pts = [float(x0[0])] if region.lower[0] < x0[0] < region.upper[0] else None
        val, err = integrate.quad(fs, region.lower[0], region.upper[0],
                                  points=pts, limit=400,
                                  epsabs=0.1 * raw_tol, epsrel=1e-11)
    else:
        opts = [{"points": [float(x0[i])], "limit": 200,
                 "epsabs": 0.1 * raw_tol, "epsrel": 1e-10} for i in range(2)]
        val, err = integrate.nquad(
            lambda y, x: fs(x, y),
            [(region.lower[0], region.upper[0]),
             (region.lower[1], region.upper[1])],
            opts=opts,
        )
    if err * scale > abs_tol:
        raise RuntimeError(
            f"quadrature did not converge: error {err * scale:.3e} "
            f"exceeds {abs_tol:.3e}")
    return scale * val


@dataclass(frozen=True)
class TailSplit:
    interior: LogScalar
    exterior: LogScalar


def tail_decomposition(family: SummandFamily, lattice: Lattice, region: Region,
                       neighborhood_radius: float,
                       use: str = "g_exp_h") -> TailSplit:
    """Split the normalized sum at the Euclidean ball around x0.

    Both parts carry the n^{-d/2} e^{n h(x0)} normalization; the exterior part
    vanishes as n grows whenever h stays above h(x0) off the ball.
    """
    if neighborhood_radius <= 0:
        raise ValueError("neighborhood_radius must be positive")
    inside_parts, outside_parts = [], []
    for _, x in iter_point_blocks(lattice, region):
        signs, logs = _family_terms(family, x, lattice.n, use)
        dist2 = np.sum((x - family.x0) ** 2, axis=1)
        near = dist2 <= neighborhood_radius**2
        for mask, parts in ((near, inside_parts), (~near, outside_parts)):
            if np.any(mask & (signs != 0)):
                sgn, lse = _signed_logsumexp(logs[mask], signs[mask])
                parts.append((float(sgn), lse))
    ln_norm = (-0.5 * family.d * math.log(lattice.n)
               + lattice.n * family.h_at_x0)
    shift = LogScalar(1, ln_norm)
    return TailSplit(interior=_combine_partials(inside_parts) * shift,
                     exterior=_combine_partials(outside_parts) * shift)


def taylor_sandwich_radius(family: SummandFamily, lattice: Lattice,
                           region: Region, eps: float,
                           initial_radius: float = 0.5,
                           shrink: float = 0.7,
                           min_radius: float = 1e-4) -> Optional[float]:
    """Largest tested radius inside which every lattice point satisfies the
    two-sided quadratic bound (1 +- eps)/2 (x-x0)^T H (x-x0) around h(x0)."""
    h_mat = family.hessian_at_x0
    radius = initial_radius
    while radius >= min_radius:
        ok = True
        seen = False
        for _, x in iter_point_blocks(lattice, region):
            dx = x - family.x0
            mask = np.sum(dx * dx, axis=1) <= radius**2
            if not np.any(mask):
                continue
            seen = True
            dxm = dx[mask]
            quad = np.einsum("ni,ij,nj->n", dxm, h_mat, dxm)
            dev = np.asarray(family.eval_h(x[mask])) - family.h_at_x0
            lo = 0.5 * (1.0 - eps) * quad
            hi = 0.5 * (1.0 + eps) * quad
            slack = 1e-12 * np.maximum(1.0, np.abs(dev))
            if np.any(dev < lo - slack) or np.any(dev > hi + slack):
                ok = False
                break
        if ok and seen:
            return radius
        radius *= shrink
    return None


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    normalized_sum: float
    omega_normalized: float
    ratio: float
    abs_error: float


def convergence_study(family: SummandFamily, region: Region, n_list,
                      use: str = "g_exp_h") -> list:
    """Normalized sums against the constant asymptote for each grid scale."""
    target = omega_limit(family)
    rows = []
    for n in n_list:
        lattice = Lattice(n=int(n), a_matrix=family.a_limit, v=np.zeros(family.d))
        value = normalized_discrete_sum(family, lattice, region, use)
        rows.append(ConvergenceRow(
            n=int(n),
            normalized_sum=float(value),
            omega_normalized=target,
            ratio=float(value / target) if target != 0 else math.inf,
            abs_error=float(abs(value - target)),
        ))
    return rows


def write_convergence_csv(rows, path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["n", "normalized_sum", "omega_normalized",
                         "ratio", "abs_error"])
        for row in rows:
            writer.writerow([row.n, repr(row.normalized_sum),
                             repr(row.omega_normalized), repr(row.ratio),
                             repr(row.abs_error)])
