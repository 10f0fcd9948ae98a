"""2-associated Stirling numbers of the second kind.

S2(p, q) counts partitions of a p-set into q blocks of size at least two.
The module builds dense triangular tables from the recurrence

    S2(p, q) = q * S2(p-1, q) + (p-1) * S2(p-2, q-1),

either exactly (arbitrary-precision integers) or in log space, and provides
the closed-form envelope (p!/q!) g_s e^{-q h_s(p/q)} plus the sharper
asymptotic approximation built from it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numkernel import (
    LOG_ZERO,
    LogScalar,
    g_b,
    g_s,
    h_b,
    h_s,
    ln_factorial,
)

EXACT_P_MAX_DEFAULT = 5000

BRUTE_FORCE_P_MAX = 14

TABLE_FORMAT_VERSION = 1


def ln_of_int(n: int) -> float:
    """ln(n) for a positive int of any size (floats overflow past ~1e308)."""
    if n <= 0:
        raise ValueError("ln_of_int requires n > 0")
    shift = max(n.bit_length() - 53, 0)
    return math.log(n >> shift) + shift * math.log(2.0)


@dataclass
class StirlingTable:
    """Dense triangular table of S2(p, q) for 0 <= q <= p//2, p <= p_max.

    ``mode`` is "exact" (rows are lists of Python ints) or "log" (rows are
    float arrays of ln S2, with -inf marking exact zeros).  A built table is
    immutable by convention and safe to share across threads.
    """

    p_max: int
    mode: str
    rows: list

    def value(self, p: int, q: int) -> int:
        """Exact integer S2(p, q); zero outside the triangle."""
        if self.mode != "exact":
            raise ValueError("value() requires an exact-mode table")
        self._check_p(p)
        if q < 0 or q > p // 2:
            return 0
        return self.rows[p][q]

    def log_value(self, p: int, q: int) -> float:
        """ln S2(p, q) as a float, -inf for zero entries."""
        self._check_p(p)
        if q < 0 or q > p // 2:
            return LOG_ZERO
        if self.mode == "log":
            return float(self.rows[p][q])
        v = self.rows[p][q]
        return ln_of_int(v) if v > 0 else LOG_ZERO

    def log_row(self, p: int) -> np.ndarray:
        """Array of ln S2(p, q) for q = 0 .. p//2 (log mode only)."""
        if self.mode != "log":
            raise ValueError("log_row() requires a log-mode table")
        self._check_p(p)
        return self.rows[p]

    def _check_p(self, p: int) -> None:
        if p < 0 or p > self.p_max:
            raise ValueError(f"p={p} outside table range [0, {self.p_max}]")

    def dump_csv(self, path) -> None:
        """Regression snapshot with columns p,q,ln_S2."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["p", "q", "ln_S2"])
            for p in range(self.p_max + 1):
                for q in range(p // 2 + 1):
                    writer.writerow([p, q, repr(self.log_value(p, q))])


def build_table(p_max: int, mode: str = "exact",
                exact_limit: int = EXACT_P_MAX_DEFAULT) -> StirlingTable:
    """Populate a full table bottom-up.

    Exact mode refuses p_max beyond ``exact_limit`` (memory guard); log mode
    runs the same recurrence through ln_add_exp per cell.
    """
    if p_max < 0:
        raise ValueError("p_max must be >= 0")
    if mode not in ("exact", "log"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" and p_max > exact_limit:
        raise ValueError(
            f"exact mode refuses p_max={p_max} > {exact_limit}; "
            "raise exact_limit explicitly or use log mode"
        )
    if mode == "exact":
        rows = _build_exact_rows(p_max)
    else:
        rows = _build_log_rows(p_max)
    return StirlingTable(p_max=p_max, mode=mode, rows=rows)


def _build_exact_rows(p_max: int) -> list:
    rows = [[1]]
    if p_max == 0:
        return rows
    rows.append([0])
    for p in range(2, p_max + 1):
        prev1 = rows[p - 1]
        prev2 = rows[p - 2]
        half = p // 2
        row = [0] * (half + 1)
        for q in range(1, half + 1):
            left = prev1[q] if q < len(prev1) else 0
            row[q] = q * left + (p - 1) * prev2[q - 1]
        rows.append(row)
    return rows


def _build_log_rows(p_max: int) -> list:
    rows = [np.array([0.0])]
    if p_max == 0:
        return rows
    rows.append(np.array([LOG_ZERO]))
    for p in range(2, p_max + 1):
        half = p // 2
        prev1 = rows[p - 1]
        prev2 = rows[p - 2]
        padded = np.full(half + 1, LOG_ZERO)
        padded[: prev1.size] = prev1
        q_idx = np.arange(1, half + 1)
        left = np.log(q_idx) + padded[1:]
        diag = math.log(p - 1) + prev2[q_idx - 1]
        row = np.empty(half + 1)
        row[0] = LOG_ZERO
        row[1:] = np.logaddexp(left, diag)
        rows.append(row)
    return rows


def stirling_log(table: StirlingTable, p: int, q: int) -> LogScalar:
    """Table entry as a LogScalar; exact zero wherever the definition forces it."""
    lv = table.log_value(p, q)
    if lv == LOG_ZERO:
        return LogScalar.zero()
    return LogScalar(1, lv)


def verify_log_table(log_table: StirlingTable, exact_table: StirlingTable,
                     p_limit: int | None = None) -> float:
    """Max |ln drift| of the log table against the exact table.

    The drift equals the relative deviation of the underlying values to first
    order; the log recurrence accumulates rounding multiplicatively, so this
    is the quantity to watch.
    """
    limit = min(log_table.p_max, exact_table.p_max)
    if p_limit is not None:
        limit = min(limit, p_limit)
    worst = 0.0
    for p in range(limit + 1):
        for q in range(p // 2 + 1):
            le = exact_table.log_value(p, q)
            ll = log_table.log_value(p, q)
            if le == LOG_ZERO or ll == LOG_ZERO:
                if le != ll:
                    raise AssertionError(
                        f"zero-pattern mismatch at p={p}, q={q}")
                continue
            worst = max(worst, abs(ll - le))
    return worst


# ---------------------------------------------------------------------------
# closed-form envelope and approximation
# ---------------------------------------------------------------------------


def ln_simple_form_grid(p: int, q) -> np.ndarray:
    """ln[(p!/q!) g_s(p,q) e^{-q h_s(p/q)}] vectorized over q; -inf where g_s = 0."""
    q_arr = np.asarray(q)
    out = np.full(q_arr.shape, LOG_ZERO)
    support = (q_arr >= 1) & (2 * q_arr <= p)
    if np.any(support):
        qs = np.where(support, q_arr, 1)
        g = g_s(np.full_like(qs, p), qs)
        rate = np.asarray(h_s(p / qs.astype(float)))
        val = ln_factorial(p) - ln_factorial(qs) + np.log(
            np.where(g > 0, g, 1.0)) - qs * rate
        out = np.where(support & (g > 0), val, out)
    return out


def simple_form_log(p: int, q: int) -> LogScalar:
    """Envelope value (p!/q!) g_s(p, q) e^{-q h_s(p/q)} in log space.

    Sandwiches S2(p, q) within constant factors, with equality at q = p/2.
    """
    if p < 1:
        raise ValueError("simple_form_log requires p >= 1")
    if q < 0:
        raise ValueError("simple_form_log requires q >= 0")
    lv = float(ln_simple_form_grid(p, np.asarray([q]))[0])
    if lv == LOG_ZERO:
        return LogScalar.zero()
    return LogScalar(1, lv)


def ln_hennecart_grid(p: int, q) -> np.ndarray:
    """ln F(p, q) vectorized over q in [1, p/2)."""
    q_arr = np.asarray(q)
    if np.any((q_arr < 1) | (2 * q_arr >= p)):
        raise ValueError("hennecart approximation needs 1 <= q < p/2")
    d = (p - 2 * q_arr).astype(float)
    g = g_s(np.full_like(q_arr, p), q_arr)
    rate = np.asarray(h_s(p / q_arr.astype(float)))
    return (
        ln_factorial(p)
        - ln_factorial(q_arr)
        - ln_factorial(p - 2 * q_arr)
        + 0.5 * np.log(2.0 * math.pi * d)
        + d * (np.log(d) - 1.0)
        + np.log(g)
        - q_arr * rate
    )


def hennecart_f_log(p: int, q: int) -> LogScalar:
    """Asymptotic approximation of S2(p, q) for 1 <= q < p/2, in log space.

    F(p,q) = p! sqrt(2 pi (p-2q)) / (q! (p-2q)!) * ((p-2q)/e)^{p-2q}
             * g_s(p,q) e^{-q h_s(p/q)};
    the ratio F/S2 tends to 1 as p grows.
    """
    return LogScalar(1, float(ln_hennecart_grid(p, np.asarray([q]))[0]))


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _partition_census(p: int) -> tuple:
    """Counts of partitions of a p-set with all blocks >= 2, by block count.

    Canonical enumeration: element i either joins an existing block or opens
    a new one; a prefix is abandoned as soon as the remaining elements cannot
    top every singleton block up to size two.  Leaves are re-checked rather
    than trusting the prune alone.
    """
    counts = [0] * (p // 2 + 1)
    if p == 0:
        counts[0] = 1
        return tuple(counts)
    sizes = []

    def place(i: int) -> None:
        if i == p:
            if all(s >= 2 for s in sizes):
                counts[len(sizes)] += 1
            return
        remaining_after = p - i - 1
        singles = sum(1 for s in sizes if s == 1)
        for b in range(len(sizes)):
            need = singles - (1 if sizes[b] == 1 else 0)
            if remaining_after < need:
                continue
            sizes[b] += 1
            place(i + 1)
            sizes[b] -= 1
        if len(sizes) < p // 2 and remaining_after >= singles + 1:
            sizes.append(1)
            place(i + 1)
            sizes.pop()

    place(0)
    return tuple(counts)


def brute_force_s2(p: int, q: int) -> int:
    """Exhaustive-count oracle for S2(p, q); refuses p > 14."""
    if p < 0 or q < 0:
        raise ValueError("p and q must be nonnegative")
    if p > BRUTE_FORCE_P_MAX:
        raise ValueError(f"brute force capped at p <= {BRUTE_FORCE_P_MAX}")
    census = _partition_census(p)
    if q >= len(census):
        return 0
    return census[q]


# ---------------------------------------------------------------------------
# measured envelope constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeConstants:
    """Empirical sandwich constants; the proofs guarantee existence but give
    no numbers, so we measure and report them."""

    c_s: float
    c_s_upper: float
    c_f: float
    c_f_upper: float
    c_b: float
    c_b_upper: float
    p_limit: int
    binom_limit: int

    def as_dict(self) -> dict:
        return {
            "stirling_envelope": {"lo": self.c_s, "hi": self.c_s_upper},
            "hennecart_ratio": {"lo": self.c_f, "hi": self.c_f_upper},
            "binomial_envelope": {"lo": self.c_b, "hi": self.c_b_upper},
            "p_limit": self.p_limit,
            "binom_limit": self.binom_limit,
        }


def measure_envelope_constants(exact_table: StirlingTable, p_limit: int = 400,
                               binom_limit: int = 60) -> EnvelopeConstants:
    """Scan S2/envelope, S2/F and binomial/envelope ratios and record extrema."""
    if exact_table.p_max < p_limit:
        raise ValueError("exact table too small for requested p_limit")
    c_s, c_s_hi = math.inf, 0.0
    c_f, c_f_hi = math.inf, 0.0
    for p in range(2, p_limit + 1):
        qs = np.arange(1, p // 2 + 1)
        ln_s2 = np.array([exact_table.log_value(p, int(q)) for q in qs])
        ln_env = ln_simple_form_grid(p, qs)
        ratios = np.exp(ln_s2 - ln_env)
        c_s = min(c_s, float(ratios.min()))
        c_s_hi = max(c_s_hi, float(ratios.max()))
        q_interior = qs[2 * qs < p]
        if q_interior.size:
            ln_f = ln_hennecart_grid(p, q_interior)
            fr = np.exp(ln_s2[: q_interior.size] - ln_f)
            c_f = min(c_f, float(fr.min()))
            c_f_hi = max(c_f_hi, float(fr.max()))
    c_b, c_b_hi = math.inf, 0.0
    for q in range(1, binom_limit + 1):
        for p in range(0, q + 1):
            env = g_b(p, q) * math.exp(-q * h_b(p / q))
            ratio = math.comb(q, p) / env
            c_b = min(c_b, ratio)
            c_b_hi = max(c_b_hi, ratio)
    return EnvelopeConstants(c_s, c_s_hi, c_f, c_f_hi, c_b, c_b_hi,
                             p_limit, binom_limit)
