"""Log-space scalar arithmetic and the special-function kernels.

Everything downstream (Stirling tables, lattice sums, the XOR-SAT summand)
is assembled from the functions in this module.  All kernels accept either
a Python scalar or a numpy array and are pure / stateless, so they are safe
to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_ZERO = float("-inf")

# Below this, e^x - 1 - x and relatives are evaluated by truncated series;
# the quadratic/quartic leading terms otherwise cancel catastrophically.
SERIES_CUTOFF = 0.25

# ln n! is an exact cumulative log sum up to here, Stirling series above.
_LN_FACTORIAL_EXACT_LIMIT = 1024


# ---------------------------------------------------------------------------
# log-space scalars
# ---------------------------------------------------------------------------


def ln_add_exp(a: float, b: float) -> float:
    """ln(e^a + e^b) with the max factored out; -inf encodes an exact zero."""
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _ln_sub_exp(a: float, b: float) -> float:
    """ln(e^a - e^b) for a > b; -inf when a == b."""
    if b == LOG_ZERO:
        return a
    if a == b:
        return LOG_ZERO
    return a + math.log(-math.expm1(b - a))


@dataclass(frozen=True)
class LogScalar:
    """A signed real stored as (sign, ln|value|).

    ``sign == 0`` is an exact zero and ``log_mag`` is then ignored.  Products
    and sums of factorial-scale magnitudes stay representable here long after
    they overflow a float.
    """

    sign: int
    log_mag: float = LOG_ZERO

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")

    @staticmethod
    def zero() -> "LogScalar":
        return LogScalar(0)

    @staticmethod
    def one() -> "LogScalar":
        return LogScalar(1, 0.0)

    @classmethod
    def from_real(cls, x: float) -> "LogScalar":
        if x == 0:
            return cls(0)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log_mag: float, sign: int = 1) -> "LogScalar":
        if sign == 0 or log_mag == LOG_ZERO:
            return cls(0)
        return cls(sign, log_mag)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def to_real(self) -> float:
        """Back to a float; may over/underflow outside the float range."""
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_mag)

    def __neg__(self) -> "LogScalar":
        return LogScalar(-self.sign, self.log_mag)

    def __abs__(self) -> "LogScalar":
        return LogScalar(abs(self.sign), self.log_mag)

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        s = self.sign * other.sign
        if s == 0:
            return LogScalar(0)
        return LogScalar(s, self.log_mag + other.log_mag)

    def __truediv__(self, other: "LogScalar") -> "LogScalar":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogScalar")
        if self.sign == 0:
            return LogScalar(0)
        return LogScalar(self.sign * other.sign, self.log_mag - other.log_mag)

    def __add__(self, other: "LogScalar") -> "LogScalar":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.sign == other.sign:
            return LogScalar(self.sign, ln_add_exp(self.log_mag, other.log_mag))
        # Opposite signs: the larger magnitude wins.
        if self.log_mag == other.log_mag:
            return LogScalar(0)
        if self.log_mag > other.log_mag:
            return LogScalar(self.sign, _ln_sub_exp(self.log_mag, other.log_mag))
        return LogScalar(other.sign, _ln_sub_exp(other.log_mag, self.log_mag))

    def __sub__(self, other: "LogScalar") -> "LogScalar":
        return self + (-other)


# ---------------------------------------------------------------------------
# array plumbing
# ---------------------------------------------------------------------------


def _asarray(x):
    return np.asarray(x, dtype=float)


def _scalarize(out, x):
    return out if np.ndim(x) else float(out)


# ---------------------------------------------------------------------------
# factorials
# ---------------------------------------------------------------------------

_LN_FACTORIAL_TABLE = None


def _ln_factorial_table():
    global _LN_FACTORIAL_TABLE
    if _LN_FACTORIAL_TABLE is None:
        # Cumulative sum in extended precision, so every table entry is a
        # correctly rounded ln n!.
        k = np.arange(1, _LN_FACTORIAL_EXACT_LIMIT + 1, dtype=np.longdouble)
        table = np.zeros(_LN_FACTORIAL_EXACT_LIMIT + 1, dtype=np.longdouble)
        table[1:] = np.cumsum(np.log(k))
        _LN_FACTORIAL_TABLE = table.astype(float)
    return _LN_FACTORIAL_TABLE


def ln_factorial(n):
    """ln(n!) for nonnegative integers; exact log sums up to 1024, Stirling
    series with 1/(12n) - 1/(360n^3) + 1/(1260n^5) corrections above."""
    arr = np.asarray(n)
    if np.any(arr < 0):
        raise ValueError("ln_factorial requires n >= 0")
    nf = arr.astype(float)
    table = _ln_factorial_table()
    small = arr <= _LN_FACTORIAL_EXACT_LIMIT
    idx = np.where(small, arr, 0).astype(np.int64)
    nn = np.where(small, 2.0, nf)  # dummy value keeps the series finite
    series = (
        0.5 * math.log(2.0 * math.pi)
        + (nn + 0.5) * np.log(nn)
        - nn
        + 1.0 / (12.0 * nn)
        - 1.0 / (360.0 * nn**3)
        + 1.0 / (1260.0 * nn**5)
    )
    out = np.where(small, table[idx], series)
    return _scalarize(out, n)


def ln_binomial(n, k):
    """ln C(n, k); -inf outside 0 <= k <= n."""
    n_arr = np.asarray(n)
    k_arr = np.asarray(k)
    valid = (k_arr >= 0) & (k_arr <= n_arr)
    kk = np.where(valid, k_arr, 0)
    nn = np.where(valid, n_arr, 0)
    out = np.where(
        valid,
        ln_factorial(nn) - ln_factorial(kk) - ln_factorial(nn - kk),
        LOG_ZERO,
    )
    return out if (np.ndim(n) or np.ndim(k)) else float(out)


# ---------------------------------------------------------------------------
# series-guarded primitives
# ---------------------------------------------------------------------------

# e^x - 1 - x = sum_{j>=2} x^j / j!
_E2_COEFFS = [1.0 / math.factorial(j) for j in range(26, 1, -1)]
# 1 - (1+x)e^{-x} = sum_{j>=2} (-1)^j (j-1)/j! x^j
_B_COEFFS = [(-1.0) ** j * (j - 1) / math.factorial(j) for j in range(26, 1, -1)]
# 1 - (x^2+2)e^{-x} + e^{-2x} = sum_{j>=4} (-1)^j (2^j - j^2 + j - 2)/j! x^j
_T_COEFFS = [
    (-1.0) ** j * (2.0**j - j * j + j - 2) / math.factorial(j)
    for j in range(28, 3, -1)
]


def _poly_tail(coeffs, x, low_power):
    """Horner evaluation of sum coeffs[j] x^j starting at x^low_power."""
    acc = np.zeros_like(x)
    for c in coeffs:
        acc = acc * x + c
    return acc * x**low_power


def _expm1_minus_x(x):
    """e^x - 1 - x, series below the cutoff, expm1 otherwise."""
    small = x < SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    with np.errstate(over="ignore"):
        direct = np.where(small, 0.0, np.expm1(np.where(small, 1.0, x)) - x)
    return np.where(small, _poly_tail(_E2_COEFFS, xs, 2), direct)


def _ln_a_of_u(u):
    """ln(e^u - 1 - u) for u > 0, stable from u -> 0 up to huge u."""
    u = _asarray(u)
    small = u < SERIES_CUTOFF
    big = u > 30.0
    mid = ~small & ~big
    out = np.empty_like(u)
    if np.any(small):
        us = np.where(small, u, 1.0)
        out = np.where(small, np.log(_poly_tail(_E2_COEFFS, us, 2)), out)
    if np.any(mid):
        um = np.where(mid, u, 1.0)
        out = np.where(mid, np.log(np.expm1(um) - um), out)
    if np.any(big):
        ub = np.where(big, u, 40.0)
        out = np.where(big, ub + np.log1p(-(1.0 + ub) * np.exp(-ub)), out)
    return out


# ---------------------------------------------------------------------------
# Q, its inverse and derivative
# ---------------------------------------------------------------------------


def q_of(x):
    """Q(x) = x(e^x - 1)/(e^x - 1 - x) on x > 0.

    Strictly increasing from 2 (at 0+) to infinity; numerator and denominator
    switch to truncated series below the cancellation cutoff, and to the
    e^{-x}-scaled form above 500 so huge arguments do not overflow.
    """
    arr = _asarray(x)
    if np.any(arr <= 0):
        raise ValueError("q_of requires x > 0")
    small = arr < SERIES_CUTOFF
    huge = arr > 500.0
    mid = ~small & ~huge
    out = np.empty_like(arr)
    if np.any(small):
        xs = np.where(small, arr, 1.0)
        # numerator x(e^x - 1) = sum_{j>=2} x^j/(j-1)!
        num_coeffs = [1.0 / math.factorial(j - 1) for j in range(26, 1, -1)]
        num = _poly_tail(num_coeffs, xs, 2)
        den = _poly_tail(_E2_COEFFS, xs, 2)
        out = np.where(small, num / den, out)
    if np.any(mid):
        xm = np.where(mid, arr, 1.0)
        e1 = np.expm1(xm)
        out = np.where(mid, xm * e1 / (e1 - xm), out)
    if np.any(huge):
        xh = np.where(huge, arr, 1.0)
        w = np.exp(-xh)
        out = np.where(huge, xh * (-np.expm1(-xh)) / (1.0 - (1.0 + xh) * w), out)
    return _scalarize(out, x)


def q_prime(x):
    """Q'(x) = (1 - (x^2+2)e^{-x} + e^{-2x}) / (1 - (1+x)e^{-x})^2.

    Increases from 1/3 at 0+ to 1 at infinity.  Numerator and denominator
    both vanish like x^4/12 and x^2/2 near zero, hence the series branch.
    """
    arr = _asarray(x)
    if np.any(arr <= 0):
        raise ValueError("q_prime requires x > 0")
    small = arr < SERIES_CUTOFF
    out = np.empty_like(arr)
    if np.any(small):
        xs = np.where(small, arr, 1.0)
        t = _poly_tail(_T_COEFFS, xs, 4)
        b = _poly_tail(_B_COEFFS, xs, 2)
        out = np.where(small, t / (b * b), out)
    if np.any(~small):
        xl = np.where(small, 1.0, arr)
        w = np.exp(-xl)
        t = 1.0 - (xl * xl + 2.0) * w + w * w
        b = 1.0 - (1.0 + xl) * w
        out = np.where(small, out, t / (b * b))
    return _scalarize(out, x)


def q_inverse(xi, rel_tol: float = 1e-12):
    """Inverse of Q on (2, inf).

    Root isolated inside the bracket [max(xi - 2, 1e-12), xi] (which is valid
    because Q(u) - u = u^2/(e^u - 1 - u) lies in (0, 2)), narrowed by
    bisection and polished by bracket-clipped Newton until
    |Q(u) - xi| <= rel_tol * xi.
    """
    arr = _asarray(xi)
    if np.any(arr <= 2.0):
        raise ValueError("q_inverse requires xi > 2")
    lo = np.maximum(arr - 2.0, 1e-12)
    hi = arr.copy()
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        too_low = q_of(mid) < arr
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    u = 0.5 * (lo + hi)
    # Newton runs to the machine floor; downstream consumers (ln A near
    # argument 2) amplify any leftover residual by 1/u.
    for _ in range(6):
        resid = q_of(u) - arr
        u = np.clip(u - resid / q_prime(u), lo, hi)
    if np.any(np.abs(q_of(u) - arr) > rel_tol * arr):
        raise RuntimeError("q_inverse failed to reach its tolerance")
    return _scalarize(u, xi)


# ---------------------------------------------------------------------------
# derived kernels
# ---------------------------------------------------------------------------


def big_a(xi):
    """A(xi) = e^u - 1 - u with u = Q^{-1}(xi); positive, increasing on xi > 2."""
    arr = _asarray(xi)
    if np.any(arr <= 2.0):
        raise ValueError("big_a requires xi > 2")
    out = np.exp(_ln_a_of_u(_asarray(q_inverse(arr))))
    return _scalarize(out, xi)


def ln_big_a(xi):
    """ln A(xi), computed in log space so it never overflows."""
    arr = _asarray(xi)
    if np.any(arr <= 2.0):
        raise ValueError("ln_big_a requires xi > 2")
    out = _ln_a_of_u(_asarray(q_inverse(arr)))
    return _scalarize(out, xi)


def big_p(xi):
    """P(xi) = sqrt(Q^{-1}(xi) * Q'(Q^{-1}(xi))) on xi > 2."""
    arr = _asarray(xi)
    if np.any(arr <= 2.0):
        raise ValueError("big_p requires xi > 2")
    u = _asarray(q_inverse(arr))
    out = np.sqrt(u * q_prime(u))
    return _scalarize(out, xi)


def h_s(xi):
    """Exponential rate of the Stirling-number envelope.

    Equals ln 2 on (0, 2] and at infinity, and
    xi * ln(Q^{-1}(xi)) - ln(A(xi)) on (2, inf); continuous at 2 but not at
    infinity.
    """
    arr = _asarray(xi)
    if np.any(arr <= 0):
        raise ValueError("h_s requires xi > 0")
    upper = np.isfinite(arr) & (arr > 2.0)
    out = np.full_like(arr, math.log(2.0))
    if np.any(upper):
        xs = np.where(upper, arr, 3.0)
        u = _asarray(q_inverse(xs))
        out = np.where(upper, xs * np.log(u) - _ln_a_of_u(u), out)
    return _scalarize(out, xi)


def g_s(p, q):
    """Polynomial prefactor of the Stirling-number envelope.

    1/(sqrt(2 pi q) P(p/q)) for 1 <= q < p/2, exactly 1 at q = p/2, and 0
    at q = 0 or q > p/2.
    """
    p_arr = np.asarray(p)
    q_arr = np.asarray(q)
    if np.any(p_arr < 1):
        raise ValueError("g_s requires p >= 1")
    if np.any(q_arr < 0):
        raise ValueError("g_s requires q >= 0")
    zero = (q_arr == 0) | (2 * q_arr > p_arr)
    half = 2 * q_arr == p_arr
    interior = ~zero & ~half
    out = np.zeros(np.broadcast(p_arr, q_arr).shape)
    out[...] = np.where(half, 1.0, 0.0)
    if np.any(interior):
        ps = np.where(interior, p_arr, 3).astype(float)
        qs = np.where(interior, q_arr, 1).astype(float)
        val = 1.0 / (np.sqrt(2.0 * math.pi * qs) * big_p(ps / qs))
        out = np.where(interior, val, out)
    return out if (np.ndim(p) or np.ndim(q)) else float(out)


def h_b(xi):
    """Binary entropy-type rate xi ln xi + (1-xi) ln(1-xi); 0 at the endpoints."""
    arr = _asarray(xi)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("h_b requires 0 <= xi <= 1")
    # xlogy-style: endpoint terms contribute exactly zero
    left = np.where(arr > 0, arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
    onem = 1.0 - arr
    right = np.where(onem > 0, onem * np.log(np.where(onem > 0, onem, 1.0)), 0.0)
    return _scalarize(left + right, xi)


def g_b(p, q):
    """Binomial-coefficient envelope prefactor sqrt(q / (2 pi max(p,1) max(q-p,1)))."""
    p_arr = np.asarray(p)
    q_arr = np.asarray(q)
    if np.any(q_arr < 1):
        raise ValueError("g_b requires q >= 1")
    if np.any(p_arr < 0) or np.any(p_arr > q_arr):
        raise ValueError("g_b requires 0 <= p <= q")
    num = q_arr.astype(float)
    den = 2.0 * math.pi * np.maximum(p_arr, 1) * np.maximum(q_arr - p_arr, 1)
    out = np.sqrt(num / den)
    return out if (np.ndim(p) or np.ndim(q)) else float(out)
