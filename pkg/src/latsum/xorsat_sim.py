"""Monte Carlo side of the 3XOR-SAT threshold study.

Random instances are sparse binary systems Gamma z = b (mod 2): m rows over n
variables, each row a multiset of three column draws, so the integer row sums
are exactly 3 (entries 2 and 3 reduce mod 2 at solve time).  Peeling columns
of total degree <= 1 yields the 2-core without changing solvability; the
solver is plain Gaussian elimination over GF(2) on bit-packed rows.

Trials are independent: per-trial generators are derived from the base seed
by counter, so any execution order (including the threaded path) reproduces
the same reports.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .stirling import StirlingTable, build_table

DEFAULT_BIN_EDGES = (0.0, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, math.inf)


@dataclass(frozen=True)
class Xor3Instance:
    """Sparse 3XOR system: rows are sorted 3-multisets of column indices."""

    m: int
    n: int
    rows: tuple
    rhs: tuple

    def __post_init__(self):
        if len(self.rows) != self.m or len(self.rhs) != self.m:
            raise ValueError("rows/rhs length must equal m")
        for row in self.rows:
            if len(row) != 3 or any(c < 0 or c >= self.n for c in row):
                raise ValueError(f"invalid row {row}")
        if any(b not in (0, 1) for b in self.rhs):
            raise ValueError("rhs entries must be bits")

    def column_sums(self) -> np.ndarray:
        """Integer column sums of Gamma (degree with multiplicity)."""
        sums = np.zeros(self.n, dtype=np.int64)
        for row in self.rows:
            for c in row:
                sums[c] += 1
        return sums

    def is_2core(self) -> bool:
        return self.m > 0 and bool(np.all(self.column_sums() >= 2))


@dataclass(frozen=True)
class CoreResult:
    """Outcome of peeling; the core preserves solvability of the original."""

    core: Xor3Instance
    removed_vars: int
    removed_rows: int
    core_ratio: Optional[float]
    kept_rows: tuple
    kept_cols: tuple


@dataclass(frozen=True)
class SolveResult:
    solvable: bool
    rank: int
    witness: Optional[tuple]


@dataclass(frozen=True)
class TrialReport:
    c: float
    n: int
    m: int
    trial: int
    solvable: bool
    core_ratio: Optional[float]
    elimination_rank: int


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_instance(m: int, n: int, seed, distinct: bool = False) -> Xor3Instance:
    """Uniform random instance: three column draws per row (with replacement
    by default; ``distinct=True`` forces three different columns) and fair
    right-hand-side bits.  Deterministic in the seed."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = np.random.default_rng(seed)
    if distinct:
        if n < 3:
            raise ValueError("distinct rows need n >= 3")
        rows = tuple(tuple(sorted(rng.choice(n, size=3, replace=False).tolist()))
                     for _ in range(m))
    else:
        draws = rng.integers(0, n, size=(m, 3))
        rows = tuple(tuple(sorted(row.tolist())) for row in draws)
    rhs = tuple(int(b) for b in rng.integers(0, 2, size=m))
    return Xor3Instance(m=m, n=n, rows=rows, rhs=rhs)


# ---------------------------------------------------------------------------
# peeling
# ---------------------------------------------------------------------------


def peel_2core(instance: Xor3Instance, order_seed=None) -> CoreResult:
    """Iteratively delete columns of total degree 0, and degree-1 columns
    together with their incident row, until every surviving column has
    degree >= 2.

    The result is order independent (peeling is confluent); ``order_seed``
    shuffles the work queue to let tests exercise exactly that.
    """
    n, m = instance.n, instance.m
    col_sum = instance.column_sums()
    rows_of_col = [[] for _ in range(n)]
    for ri, row in enumerate(instance.rows):
        for c in row:
            rows_of_col[c].append(ri)
    row_alive = [True] * m
    col_alive = [True] * n
    pending = [c for c in range(n) if col_sum[c] <= 1]
    if order_seed is not None:
        np.random.default_rng(order_seed).shuffle(pending)
    queue = deque(pending)
    queued = [False] * n
    for c in pending:
        queued[c] = True
    while queue:
        c = queue.popleft()
        queued[c] = False
        if not col_alive[c] or col_sum[c] > 1:
            continue
        col_alive[c] = False
        if col_sum[c] == 1:
            victim = next(ri for ri in rows_of_col[c] if row_alive[ri])
            row_alive[victim] = False
            for cc in instance.rows[victim]:
                col_sum[cc] -= 1
                if col_alive[cc] and col_sum[cc] <= 1 and not queued[cc]:
                    queue.append(cc)
                    queued[cc] = True
        col_sum[c] = 0
    kept_rows = tuple(i for i in range(m) if row_alive[i])
    kept_cols = tuple(c for c in range(n) if col_alive[c])
    col_map = {c: k for k, c in enumerate(kept_cols)}
    core_rows = tuple(tuple(sorted(col_map[c] for c in instance.rows[ri]))
                      for ri in kept_rows)
    core_rhs = tuple(instance.rhs[ri] for ri in kept_rows)
    core = Xor3Instance(m=len(kept_rows), n=len(kept_cols),
                        rows=core_rows, rhs=core_rhs)
    ratio = core.m / core.n if core.n > 0 else None
    return CoreResult(core=core, removed_vars=n - core.n,
                      removed_rows=m - core.m, core_ratio=ratio,
                      kept_rows=kept_rows, kept_cols=kept_cols)


# ---------------------------------------------------------------------------
# GF(2) solving
# ---------------------------------------------------------------------------


def _row_mask(row) -> int:
    mask = 0
    for c in row:
        mask ^= 1 << c  # doubled entries cancel mod 2, tripled survive
    return mask


def gf2_solve(instance: Xor3Instance) -> SolveResult:
    """Gaussian elimination over GF(2) with bit-packed rows.

    Maintains fully reduced pivot rows (each contains exactly one pivot
    column), so a satisfying assignment with free variables at zero reads off
    directly.  Returns solvability, the rank of the coefficient matrix, and
    the witness when one exists.
    """
    pivots: dict = {}  # pivot column -> (mask, rhs bit)
    pivot_mask = 0
    solvable = True
    for row, b in zip(instance.rows, instance.rhs):
        cur = _row_mask(row)
        bit = b
        rem = cur & pivot_mask
        while rem:
            col = (rem & -rem).bit_length() - 1
            pm, pb = pivots[col]
            cur ^= pm
            bit ^= pb
            rem = cur & pivot_mask
        if cur:
            col = (cur & -cur).bit_length() - 1
            for pc, (pm, pb) in list(pivots.items()):
                if (pm >> col) & 1:
                    pivots[pc] = (pm ^ cur, pb ^ bit)
            pivots[col] = (cur, bit)
            pivot_mask |= 1 << col
        elif bit:
            solvable = False
    if not solvable:
        return SolveResult(solvable=False, rank=len(pivots), witness=None)
    witness = [0] * instance.n
    for col, (_, pb) in pivots.items():
        witness[col] = pb
    return SolveResult(solvable=True, rank=len(pivots), witness=tuple(witness))


def check_witness(instance: Xor3Instance, witness) -> bool:
    """Re-check an assignment against every original row."""
    for row, b in zip(instance.rows, instance.rhs):
        acc = 0
        for c in row:
            acc ^= witness[c]
        if acc != b:
            return False
    return True


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = 3.0) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _run_trial(args) -> TrialReport:
    c, n, m, trial, seed, distinct = args
    instance = sample_instance(m, n, seed, distinct=distinct)
    peeled = peel_2core(instance)
    if peeled.core.m == 0:
        return TrialReport(c=c, n=n, m=m, trial=trial, solvable=True,
                           core_ratio=peeled.core_ratio, elimination_rank=0)
    result = gf2_solve(peeled.core)
    return TrialReport(c=c, n=n, m=m, trial=trial, solvable=result.solvable,
                       core_ratio=peeled.core_ratio,
                       elimination_rank=result.rank)


def bin_reports(reports, edges=DEFAULT_BIN_EDGES) -> list:
    """Per-bin core statistics; empty cores count as ratio 0."""
    bins = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        members = [r for r in reports
                   if lo <= (r.core_ratio if r.core_ratio is not None else 0.0) < hi]
        count = len(members)
        frac = (sum(1 for r in members if r.solvable) / count) if count else None
        bins.append({"ratio_lo": lo, "ratio_hi": hi, "count": count,
                     "solvable_frac": frac})
    return bins


@dataclass(frozen=True)
class SolvabilityReport:
    c: float
    n: int
    m: int
    trials: int
    p_hat: float
    wilson_lo: float
    wilson_hi: float
    bins: list
    reports: list = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "c": self.c, "n": self.n, "m": self.m, "trials": self.trials,
            "p_hat": self.p_hat, "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "bins": [dict(b) for b in self.bins],
        }


def estimate_solvability(c: float, n: int, trials: int, base_seed: int,
                         distinct: bool = False, z: float = 3.0,
                         bin_edges=DEFAULT_BIN_EDGES,
                         max_workers: int = 1) -> SolvabilityReport:
    """Monte Carlo estimate of the solvability probability at m = round(c n).

    Per-trial seeds are spawned from the base seed by counter; aggregation
    sorts by trial index, so the report does not depend on worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m = round(c * n)
    seeds = np.random.SeedSequence(base_seed).spawn(trials)
    jobs = [(c, n, m, t, seeds[t], distinct) for t in range(trials)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            reports = list(pool.map(_run_trial, jobs))
    else:
        reports = [_run_trial(job) for job in jobs]
    reports.sort(key=lambda r: r.trial)
    solved = sum(1 for r in reports if r.solvable)
    lo, hi = wilson_interval(solved, trials, z)
    return SolvabilityReport(c=c, n=n, m=m, trials=trials,
                             p_hat=solved / trials, wilson_lo=lo, wilson_hi=hi,
                             bins=bin_reports(reports, bin_edges),
                             reports=reports)


# ---------------------------------------------------------------------------
# 2-core rejection sampling and the probability bounds
# ---------------------------------------------------------------------------


def rejection_sample_2core(m: int, n: int, seed, max_tries: int = 10**6) -> Xor3Instance:
    """Resample until the instance is itself a 2-core; uniform over 2-cores
    by construction.  Deterministic in (seed, max_tries)."""
    for k in range(max_tries):
        instance = sample_instance(m, n, np.random.SeedSequence((seed, k)))
        if instance.is_2core():
            return instance
    raise RuntimeError(f"no 2-core found in {max_tries} tries (m={m}, n={n})")


_BATCH_CHUNK = 4096


def sample_2core_batch(m: int, n: int, count: int, base_seed: int,
                       max_tries: int = 10**7) -> tuple:
    """A batch of independent 2-cores plus the total number of raw draws
    (the acceptance-rate denominator).

    Tries are generated in fixed-size chunks, one generator per chunk seeded
    by (base_seed, chunk index), so the batch is reproducible from base_seed
    alone; the column-degree filter runs vectorized across the chunk.
    """
    instances = []
    tries = 0
    chunk_idx = 0
    while len(instances) < count and tries < max_tries:
        rng = np.random.default_rng(np.random.SeedSequence((base_seed, chunk_idx)))
        chunk_idx += 1
        size = min(_BATCH_CHUNK, max_tries - tries)
        draws = rng.integers(0, n, size=(size, m, 3))
        rhs = rng.integers(0, 2, size=(size, m))
        counts = np.zeros((size, n), dtype=np.int16)
        np.add.at(counts, (np.arange(size)[:, None], draws.reshape(size, 3 * m)), 1)
        consumed = size
        for k in np.flatnonzero(counts.min(axis=1) >= 2):
            instances.append(Xor3Instance(
                m=m, n=n,
                rows=tuple(tuple(sorted(row.tolist())) for row in draws[k]),
                rhs=tuple(int(x) for x in rhs[k])))
            if len(instances) == count:
                consumed = int(k) + 1
                break
        tries += consumed
    if len(instances) < count:
        raise RuntimeError("2-core rejection sampling budget exhausted")
    return instances, tries


def exact_normalized_sum(m: int, n: int,
                         table: Optional[StirlingTable] = None) -> Fraction:
    """(1/n) sum of the second-moment summand over the whole grid, as an
    exact rational; it is at least 1 whenever the second-moment argument
    applies.  Needs 3m/n in (2, 3)."""
    if not 2 * n < 3 * m < 3 * n:
        raise ValueError("exact sum needs 2 < 3m/n < 3")
    if table is None:
        table = build_table(3 * m, "exact")
    if table.mode != "exact" or table.p_max < 3 * m:
        raise ValueError("need an exact table covering p = 3m")
    total = 0
    for j in range(0, m + 1):
        p1 = 3 * m - 2 * j
        inner = 0
        for i in range(max(0, n - j), min(n, p1 // 2) + 1):
            inner += table.value(p1, i) * table.value(2 * j, n - i)
        if inner:
            total += 3**j * math.comb(m, j) * inner
    base = Fraction(total, table.value(3 * m, n))
    if m >= n:
        return base * 2 ** (m - n)
    return base / 2 ** (n - m)


@dataclass(frozen=True)
class BoundsReport:
    m: int
    n: int
    trials: int
    normalized_sum: float
    normalized_sum_ge_1: bool
    lower_bound: float
    upper_bound: float
    p_hat: float
    wilson_lo: float
    wilson_hi: float
    compatible: bool
    acceptance_rate: float

    def as_dict(self) -> dict:
        return {
            "m": self.m, "n": self.n, "trials": self.trials,
            "normalized_sum": self.normalized_sum,
            "normalized_sum_ge_1": self.normalized_sum_ge_1,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "p_hat": self.p_hat,
            "wilson_lo": self.wilson_lo, "wilson_hi": self.wilson_hi,
            "compatible": self.compatible,
            "acceptance_rate": self.acceptance_rate,
        }


def bounds_check(m: int, n: int, trials: int, seed: int,
                 stirling_table: Optional[StirlingTable] = None,
                 z: float = 3.0, max_tries: int = 10**7) -> BoundsReport:
    """Check the exact finite-size probability bounds against Monte Carlo.

    The lower bound is the inverse of the exact normalized grid sum; the
    upper bound is min(1, 2^{n-m}).  The Monte Carlo estimate runs over
    rejection-sampled 2-cores; the report states whether its Wilson interval
    is compatible with the bounds.
    """
    norm = exact_normalized_sum(m, n, stirling_table)
    lower = float(Fraction(1, 1) / norm)
    upper = 1.0 if n >= m else math.ldexp(1.0, n - m)
    instances, tries = sample_2core_batch(m, n, trials, seed, max_tries)
    solved = sum(1 for inst in instances if gf2_solve(inst).solvable)
    lo, hi = wilson_interval(solved, trials, z)
    return BoundsReport(
        m=m, n=n, trials=trials,
        normalized_sum=float(norm),
        normalized_sum_ge_1=bool(norm >= 1),
        lower_bound=lower,
        upper_bound=upper,
        p_hat=solved / trials,
        wilson_lo=lo, wilson_hi=hi,
        compatible=bool(hi >= lower and lo <= upper),
        acceptance_rate=trials / tries,
    )
