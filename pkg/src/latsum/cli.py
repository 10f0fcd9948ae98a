"""Batch command-line front end.

One subcommand per experiment, machine-readable CSV/JSON artifacts, no
interactive mode.  Exit status is 0 iff the requested computation completed;
pass/fail judgments against the reference thresholds are printed on stdout
and embedded in the artifacts, never signaled through the exit code, so
pipelines can collect failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .stirling import (
    TABLE_FORMAT_VERSION,
    build_table,
    measure_envelope_constants,
    verify_log_table,
)

OUTDIR_ENV = "LATSUM_OUTDIR"

SUBCOMMANDS = ("stirling", "laplace-demo", "gaussian-sum", "sum-limit",
               "hy-min", "alpha-curve", "simulate", "bounds-check")


class CliError(Exception):
    """Invalid configuration; message names the offending flag."""


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "csv"
    seed: int = 0
    threads: int = 0  # 0 means all available cores


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line diagnostics instead of usage dump
        raise CliError(message)


def _int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise CliError(f"--n expects a comma-separated integer list: {exc}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="latsum", add_help=True)
    parser.add_argument("--version", action="store_true",
                        help="print toolkit and table-format versions")
    sub = parser.add_subparsers(dest="subcommand")

    def common(p, fmt_default):
        p.add_argument("--output", "-o", default=None,
                       help=f"artifact path (default: ${OUTDIR_ENV} or cwd)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=0,
                       help="worker cap; 0 = available cores")

    p = sub.add_parser("stirling", help="table build, snapshot and diagnostics")
    p.add_argument("--p-max", type=int, default=400)
    p.add_argument("--mode", choices=("exact", "log"), default="log")
    p.add_argument("--diagnostics", default=None,
                   help="JSON path for measured envelope constants and drift")
    common(p, "csv")

    p = sub.add_parser("laplace-demo", help="1-d discrete Laplace convergence study")
    p.add_argument("--n", type=_int_list, default=[1000, 4000, 10000])
    common(p, "csv")

    p = sub.add_parser("gaussian-sum", help="pure Gaussian lattice-sum check")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--dim", type=int, choices=(1, 2), default=2)
    common(p, "csv")

    p = sub.add_parser("sum-limit", help="normalized 3XOR grid sums vs 1")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--diagnostics", default=None,
                   help="JSON path for measured envelope constants")
    common(p, "csv")

    p = sub.add_parser("hy-min", help="rate-function minimum and positivity")
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--grid", type=int, default=400)
    common(p, "json")

    p = sub.add_parser("alpha-curve", help="minimizer curve dump")
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--r-max", type=float, default=0.99)
    common(p, "csv")

    p = sub.add_parser("simulate", help="Monte Carlo solvability estimate")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--per-trial-csv", default=None)
    common(p, "json")

    p = sub.add_parser("bounds-check", help="probability bounds vs Monte Carlo")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--max-tries", type=int, default=10**7,
                   help="rejection-sampling budget")
    common(p, "json")

    return parser


def parse_config(argv) -> RunConfig:
    """Validate argv into a RunConfig; raises CliError naming the bad flag."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.version:
        return RunConfig(subcommand="version")
    if ns.subcommand is None:
        raise CliError("a subcommand is required "
                       f"(one of: {', '.join(SUBCOMMANDS)})")
    params = {k: v for k, v in vars(ns).items()
              if k not in ("subcommand", "output", "format", "seed",
                           "threads", "version")}
    cfg = RunConfig(subcommand=ns.subcommand, params=params,
                    output_path=ns.output, format=ns.format,
                    seed=ns.seed, threads=ns.threads)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    p = cfg.params
    if cfg.subcommand == "stirling":
        if p["p_max"] < 0:
            raise CliError("--p-max must be nonnegative")
    elif cfg.subcommand == "sum-limit":
        if not 2.0 / 3.0 < p["c"] < 1.0:
            raise CliError(
                f"--c {p['c']} outside the asymptotic regime (2/3, 1)")
        if not p["n"] or any(n < 10 for n in p["n"]):
            raise CliError("--n needs sizes of at least 10")
    elif cfg.subcommand in ("hy-min", "alpha-curve"):
        if not 2.0 < p["y"] < 3.0:
            raise CliError(f"--y {p['y']} outside (2, 3)")
    elif cfg.subcommand == "gaussian-sum":
        if p["n"] < 1:
            raise CliError("--n must be positive")
    elif cfg.subcommand == "simulate":
        if p["trials"] < 1:
            raise CliError("--trials must be >= 1")
        if p["n"] < 1 or p["c"] <= 0:
            raise CliError("--n and --c must be positive")
    elif cfg.subcommand == "bounds-check":
        if p["trials"] < 1:
            raise CliError("--trials must be >= 1")
        if not 2 * p["n"] < 3 * p["m"] < 3 * p["n"]:
            raise CliError("--m/--n must satisfy 2 < 3m/n < 3")
    if cfg.threads < 0:
        raise CliError("--threads must be >= 0")


def _out_path(cfg: RunConfig, default_name: str) -> str:
    if cfg.output_path:
        return cfg.output_path
    outdir = os.environ.get(OUTDIR_ENV, ".")
    return os.path.join(outdir, default_name)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _workers(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------


def _run_stirling(cfg: RunConfig) -> None:
    p = cfg.params
    table = build_table(p["p_max"], p["mode"])
    path = _out_path(cfg, "stirling_table.csv")
    table.dump_csv(path)
    line = f"stirling p_max={p['p_max']} mode={p['mode']} snapshot={path}"
    if p["diagnostics"]:
        limit = min(p["p_max"], 400)
        exact = table if table.mode == "exact" else build_table(limit, "exact")
        consts = measure_envelope_constants(exact, p_limit=min(limit, 400),
                                            binom_limit=60)
        payload = consts.as_dict()
        if table.mode == "log":
            drift = verify_log_table(table, exact, p_limit=limit)
            payload["log_table_drift"] = drift
            payload["drift_pass"] = bool(drift <= 1e-8)
            line += f" drift={drift:.3e} [{'PASS' if drift <= 1e-8 else 'FAIL'}]"
        _write_json(p["diagnostics"], payload)
    print(line)


def _run_laplace_demo(cfg: RunConfig) -> None:
    from .laplace import Region, SummandFamily, convergence_study, write_convergence_csv

    family = SummandFamily(
        eval_g=lambda X: np.cos(X[:, 0]),
        eval_h=lambda X: X[:, 0] ** 2,
        x0=[0.0], h_at_x0=0.0, hessian_at_x0=[[2.0]], a_limit=[[1.0]])
    region = Region.box([-1.0], [1.0])
    rows = convergence_study(family, region, cfg.params["n"])
    path = _out_path(cfg, "laplace_demo.csv")
    write_convergence_csv(rows, path)
    last = rows[-1]
    ok = abs(last.normalized_sum - math.sqrt(math.pi)) < 1e-3
    print(f"laplace-demo n={last.n} normalized_sum={last.normalized_sum:.9f} "
          f"target={math.sqrt(math.pi):.9f} [{'PASS' if ok else 'FAIL'}] -> {path}")


def _run_gaussian_sum(cfg: RunConfig) -> None:
    from .laplace import Lattice, Region, gaussian_lattice_sum

    d = cfg.params["dim"]
    n = cfg.params["n"]
    lattice = Lattice(n=n, a_matrix=np.eye(d), v=np.zeros(d))
    region = Region.box([-1.0] * d, [1.0] * d)
    value = gaussian_lattice_sum(np.eye(d), np.zeros(d), lattice, region)
    target = (2.0 * math.pi) ** (0.5 * d)
    ok = abs(value - target) < 1e-5
    path = _out_path(cfg, "gaussian_sum.csv")
    with open(path, "w") as fh:
        fh.write("d,n,value,target,abs_error\n")
        fh.write(f"{d},{n},{value!r},{target!r},{abs(value - target)!r}\n")
    print(f"gaussian-sum d={d} n={n} value={value:.9f} target={target:.9f} "
          f"[{'PASS' if ok else 'FAIL'}] -> {path}")


def _run_sum_limit(cfg: RunConfig) -> None:
    from .xorsat_asymptotics import (
        envelope_margin, local_asymptotics_error, sum_limit_experiment,
        write_sum_limit_csv)

    rows = sum_limit_experiment(cfg.params["c"], cfg.params["n"])
    path = _out_path(cfg, "sum_limit.csv")
    write_sum_limit_csv(rows, path)
    if cfg.params["diagnostics"]:
        # measured envelope constants at the smallest requested size
        n0 = min(cfg.params["n"])
        m0 = round(cfg.params["c"] * n0)
        table = build_table(3 * m0, "log")
        _write_json(cfg.params["diagnostics"], {
            "c": cfg.params["c"], "n": n0, "m": m0,
            "envelope_ln_constant": envelope_margin(table, m0, n0),
            "local_asymptotics_max_error": local_asymptotics_error(table, m0, n0),
        })
    last = rows[-1]
    ok = last.err_vs_1 <= 0.1
    print(f"sum-limit c={cfg.params['c']} n={last.n} "
          f"normalized_sum={last.normalized_sum:.6f} err={last.err_vs_1:.6f} "
          f"[{'PASS' if ok else 'FAIL'}] -> {path}")


def _run_hy_min(cfg: RunConfig) -> None:
    from .xorsat_asymptotics import (
        h_y_eval, h_y_gradient_fd, positivity_certificate)

    y = cfg.params["y"]
    h_center = h_y_eval(y, 0.5, 0.5)
    grad = float(np.linalg.norm(h_y_gradient_fd(y)))
    cert = positivity_certificate(y, cfg.params["radius"], cfg.params["grid"])
    ok = abs(h_center) <= 1e-12 and grad < 1e-6 and cert > 0
    payload = {
        "y": y, "minimum_location": [0.5, 0.5], "h_center": h_center,
        "fd_gradient_norm": grad,
        "positivity_certificate": cert,
        "excluded_radius": cfg.params["radius"],
        "grid_per_axis": cfg.params["grid"],
        "pass": bool(ok),
    }
    path = _out_path(cfg, "hy_min.json")
    _write_json(path, payload)
    print(f"hy-min y={y} minimum at (0.5, 0.5) value={h_center:.3e} "
          f"grad={grad:.3e} certificate={cert:.6f} "
          f"[{'PASS' if ok else 'FAIL'}] -> {path}")


def _run_alpha_curve(cfg: RunConfig) -> None:
    from .xorsat_asymptotics import _ln_l, alpha_y_curve, write_alpha_curve_csv

    y = cfg.params["y"]
    r = np.linspace(1.0 / 3.0, cfg.params["r_max"], cfg.params["points"])
    path = _out_path(cfg, "alpha_curve.csv")
    write_alpha_curve_csv(y, r, path)
    resid = float(np.max(np.abs(np.exp(_ln_l(y, r, alpha_y_curve(y, r))) - 1.0)))
    ok = resid <= 1e-11
    print(f"alpha-curve y={y} points={cfg.params['points']} "
          f"max|L-1|={resid:.3e} [{'PASS' if ok else 'FAIL'}] -> {path}")


def _run_simulate(cfg: RunConfig) -> None:
    from .xorsat_sim import estimate_solvability

    p = cfg.params
    report = estimate_solvability(p["c"], p["n"], p["trials"], cfg.seed,
                                  max_workers=_workers(cfg))
    path = _out_path(cfg, "simulate.json")
    _write_json(path, report.as_dict())
    if p["per_trial_csv"]:
        with open(p["per_trial_csv"], "w") as fh:
            fh.write("trial,solvable,core_ratio,elimination_rank\n")
            for r in report.reports:
                ratio = "" if r.core_ratio is None else repr(r.core_ratio)
                fh.write(f"{r.trial},{int(r.solvable)},{ratio},"
                         f"{r.elimination_rank}\n")
    print(f"simulate c={p['c']} n={p['n']} trials={p['trials']} "
          f"p_hat={report.p_hat:.4f} "
          f"wilson=[{report.wilson_lo:.4f}, {report.wilson_hi:.4f}] -> {path}")


def _run_bounds_check(cfg: RunConfig) -> None:
    from .xorsat_sim import bounds_check

    p = cfg.params
    report = bounds_check(p["m"], p["n"], p["trials"], cfg.seed,
                          max_tries=p["max_tries"])
    path = _out_path(cfg, "bounds_check.json")
    _write_json(path, report.as_dict())
    print(f"bounds-check m={p['m']} n={p['n']} trials={p['trials']} "
          f"p_hat={report.p_hat:.4f} bounds=[{report.lower_bound:.4f}, "
          f"{report.upper_bound:.4f}] "
          f"[{'PASS' if report.compatible else 'FAIL'}] -> {path}")


_RUNNERS = {
    "stirling": _run_stirling,
    "laplace-demo": _run_laplace_demo,
    "gaussian-sum": _run_gaussian_sum,
    "sum-limit": _run_sum_limit,
    "hy-min": _run_hy_min,
    "alpha-curve": _run_alpha_curve,
    "simulate": _run_simulate,
    "bounds-check": _run_bounds_check,
}


def run(config: RunConfig) -> int:
    """Dispatch a validated config; returns the process exit status."""
    if config.subcommand == "version":
        print(f"latsum {__version__} (stirling-table-format {TABLE_FORMAT_VERSION})")
        return 0
    _RUNNERS[config.subcommand](config)
    return 0


def main(argv=None) -> int:
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except CliError as exc:
        print(f"latsum: error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except Exception as exc:  # surface module errors verbatim, nonzero exit
        print(f"latsum: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
