"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.  Tolerances are fixed here, not calibrated at runtime.
"""

import math
import time

import numpy as np
import pytest

from latsum.laplace import (
    Lattice,
    Region,
    SummandFamily,
    continuous_reference,
    gaussian_lattice_sum,
    normalized_discrete_sum,
)
from latsum.stirling import (
    brute_force_s2,
    build_table,
    hennecart_f_log,
    verify_log_table,
)
from latsum.xorsat_asymptotics import (
    _ln_l,
    alpha_y,
    alpha_y_curve,
    center_data,
    h_y_eval,
    h_y_gradient_fd,
    hessian_fd_check,
    positivity_certificate,
    sum_limit_experiment,
)
from latsum.xorsat_sim import (
    bounds_check,
    estimate_solvability,
    gf2_solve,
    sample_instance,
)


def report(number, label, ok, elapsed, budget, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {number:>2}: {label} "
          f"({elapsed:.2f}s / {budget:.0f}s) {detail}")
    assert ok, f"criterion {number} failed: {detail}"
    assert elapsed < budget, f"criterion {number} over budget: {elapsed:.1f}s"


def test_criterion_01_stirling_exactness():
    t0 = time.time()
    table = build_table(400, "exact")
    identity_ok = all(
        table.value(2 * q, q) == math.factorial(2 * q) // (math.factorial(q) * 2**q)
        for q in range(1, 201))
    brute_ok = all(
        brute_force_s2(p, q) == table.value(p, q)
        for p in range(0, 13) for q in range(0, p // 2 + 1))
    report(1, "exact table identities and brute-force oracle (p <= 12)",
           identity_ok and brute_ok, time.time() - t0, 5.0)


def test_criterion_02_log_space_fidelity():
    t0 = time.time()
    exact = build_table(500, "exact")
    log = build_table(500, "log")
    drift = verify_log_table(log, exact, p_limit=500)
    report(2, "log table vs exact table (p <= 500)", drift <= 1e-8,
           time.time() - t0, 10.0, f"max rel drift {drift:.3e}")


def test_criterion_03_hennecart_convergence():
    t0 = time.time()
    errs = []
    exact = build_table(300, "exact")
    log_1000 = build_table(1000, "log")
    for p, tab in ((100, exact), (300, exact), (1000, log_1000)):
        q = p // 3
        ratio = math.exp(hennecart_f_log(p, q).log_mag - tab.log_value(p, q))
        errs.append(abs(ratio - 1.0))
    ok = errs[0] > errs[1] > errs[2] and errs[2] < 0.02
    report(3, "approximation ratio decreasing over p in {100, 300, 1000}",
           ok, time.time() - t0, 30.0,
           f"errors {errs[0]:.2e} > {errs[1]:.2e} > {errs[2]:.2e}")


def test_criterion_04_gaussian_lattice_sum():
    t0 = time.time()
    lattice = Lattice(n=500, a_matrix=np.eye(2), v=np.zeros(2))
    region = Region.box([-1.0, -1.0], [1.0, 1.0])
    value = gaussian_lattice_sum(np.eye(2), np.zeros(2), lattice, region)
    err = abs(value - 2 * math.pi)
    report(4, "2-d Gaussian lattice sum vs 2 pi (n = 500)", err < 1e-5,
           time.time() - t0, 5.0, f"abs error {err:.2e}")


def test_criterion_05_laplace_demo():
    t0 = time.time()
    n = 10**4
    family = SummandFamily(
        eval_g=lambda X: np.cos(X[:, 0]),
        eval_h=lambda X: X[:, 0] ** 2,
        x0=[0.0], h_at_x0=0.0, hessian_at_x0=[[2.0]], a_limit=[[1.0]])
    region = Region.box([-1.0], [1.0])
    lattice = Lattice(n=n, a_matrix=[[1.0]], v=[0.0])
    discrete = normalized_discrete_sum(family, lattice, region)
    quad = continuous_reference(lambda X: np.cos(X[:, 0]),
                                lambda X: X[:, 0] ** 2, region, n)
    err_target = abs(discrete - math.sqrt(math.pi))
    rel_quad = abs(quad - discrete) / abs(quad)
    ok = err_target < 1e-3 and rel_quad < 1e-3
    report(5, "1-d demo vs sqrt(pi) and quadrature reference", ok,
           time.time() - t0, 5.0,
           f"|sum - sqrt(pi)| = {err_target:.2e}, rel quad dev {rel_quad:.2e}")


def test_criterion_06_main_theorem_desk_scale():
    t0 = time.time()
    rows = sum_limit_experiment(0.8, [400, 800, 1600])
    errs = [row.err_vs_1 for row in rows]
    corner_ok = all(row.corner_term == math.ldexp(1.0, row.m - row.n)
                    for row in rows)
    ok = (all(a >= b for a, b in zip(errs, errs[1:]))
          and errs[-1] <= 0.1 and corner_ok)
    report(6, "normalized grid sum -> 1 (c = 0.8, n up to 1600)", ok,
           time.time() - t0, 180.0,
           "errors " + " >= ".join(f"{e:.2e}" for e in errs))


def test_criterion_07_center_identity():
    t0 = time.time()
    devs = [abs(center_data(y).omega_ratio() - 1.0) for y in (2.1, 2.5, 2.9)]
    report(7, "2 pi g / (det A sqrt(det H)) = 1", max(devs) <= 1e-12,
           time.time() - t0, 1.0, f"max deviation {max(devs):.2e}")


def test_criterion_08_rate_function_minimum():
    t0 = time.time()
    center_ok = all(abs(h_y_eval(y, 0.5, 0.5)) <= 1e-12 for y in (2.1, 2.4, 2.7, 2.9))
    grad_ok = all(np.linalg.norm(h_y_gradient_fd(y)) < 1e-6
                  for y in (2.1, 2.4, 2.7, 2.9))
    certs = {y: positivity_certificate(y, 0.05, 400) for y in (2.1, 2.4, 2.7, 2.9)}
    cert_ok = all(v > 0 for v in certs.values())
    report(8, "rate function: zero at center, positive elsewhere",
           center_ok and grad_ok and cert_ok, time.time() - t0, 30.0,
           "certificates " + ", ".join(f"{y}: {v:.4f}" for y, v in certs.items()))


def test_criterion_09_minimizer_curve():
    t0 = time.time()
    ok = True
    worst_resid = 0.0
    for y in (2.1, 2.5, 2.9):
        r = np.linspace(1.0 / 3.0, 0.99, 100)
        resid = np.abs(np.exp(_ln_l(y, r, alpha_y_curve(y, r))) - 1.0).max()
        worst_resid = max(worst_resid, float(resid))
        ok &= resid <= 1e-11
        ok &= abs(alpha_y(y, 0.5) - 0.5) <= 1e-12
        ok &= alpha_y(y, 0.4) > 0.4 and alpha_y(y, 0.7) < 0.7
        limit_dev = abs(h_y_eval(y, 0.999, alpha_y(y, 0.999))
                        - math.log(2) * (1 - y / 3))
        ok &= limit_dev < 0.01
    report(9, "minimizer curve root residual and location", bool(ok),
           time.time() - t0, 10.0, f"max |L - 1| = {worst_resid:.2e}")


def test_criterion_10_hessian_check():
    t0 = time.time()
    devs = {y: hessian_fd_check(y, step=1e-4) for y in (2.1, 2.5, 2.9)}
    report(10, "finite-difference Hessian vs closed form",
           max(devs.values()) < 1e-4, time.time() - t0, 1.0,
           "deviations " + ", ".join(f"{y}: {v:.2e}" for y, v in devs.items()))


def test_criterion_11_gf2_solver():
    from test_xorsat_sim import brute_solvable

    t0 = time.time()
    rng = np.random.default_rng(1137)
    ok = True
    for _ in range(500):
        n = int(rng.integers(1, 21))
        m = int(rng.integers(1, 25))
        inst = sample_instance(m, n, int(rng.integers(0, 2**31)))
        if gf2_solve(inst).solvable != brute_solvable(inst):
            ok = False
            break
    report(11, "solver vs exhaustive search (500 instances, n <= 20)", ok,
           time.time() - t0, 60.0)


def test_criterion_12_threshold_behavior():
    t0 = time.time()
    pooled = []
    for c in (0.7, 0.8, 0.85, 0.9, 1.0, 1.1, 1.2, 1.3):
        rep = estimate_solvability(c, 300, 200, base_seed=20260810)
        pooled.extend(rep.reports)
    low = [r for r in pooled if (r.core_ratio or 0.0) <= 0.9]
    high = [r for r in pooled if r.core_ratio is not None and r.core_ratio >= 1.1]
    low_frac = sum(r.solvable for r in low) / len(low)
    high_frac = sum(r.solvable for r in high) / len(high)
    ok = low_frac >= 0.95 and high_frac <= 0.05
    report(12, "solvability by core ratio (n = 300, 200 trials per density)",
           ok, time.time() - t0, 120.0,
           f"ratio <= 0.9: {low_frac:.3f} of {len(low)}; "
           f"ratio >= 1.1: {high_frac:.3f} of {len(high)}")


def test_criterion_13_probability_bounds():
    t0 = time.time()
    rep = bounds_check(18, 20, trials=500, seed=42)
    ok = rep.compatible and rep.normalized_sum_ge_1
    report(13, "Monte Carlo vs exact probability bounds (m=18, n=20)", ok,
           time.time() - t0, 300.0,
           f"p_hat {rep.p_hat:.3f} in [{rep.wilson_lo:.3f}, {rep.wilson_hi:.3f}] "
           f"vs bounds [{rep.lower_bound:.3f}, {rep.upper_bound:.1f}]")
