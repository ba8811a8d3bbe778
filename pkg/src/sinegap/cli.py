"""Batch experiment harness.

Subcommands wrap the library estimators and write deterministic CSV/JSON
outputs plus a (non-deterministic) run manifest with wall time and
budgets. Configuration precedence is flags > config file > defaults; the
config file grammar is ``key = value`` per line with ``#`` comments.

Exit codes: 0 success, 1 validation gates failed, 2 configuration or
domain error, 3 numerical error or invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_CONFIG, SimConfig
from .errors import (ConfigurationError, DomainError, InvariantViolationError,
                     NumericalError)
from .logtan import (P1Table, build_p1_table, default_p1_grid,
                     default_p1_horizon)
from .oracles import (bulk_rescale, empirical_gap_prob, known_kappa,
                      sample_tridiagonal_beta, sine_kernel_gap)
from .params import ModelParams
from .phase import estimate_gap_direct, sine_beta_counts
from .reports import (ensure_dir, write_estimates_csv, write_json,
                      write_manifest, write_oracle_csv, write_points_csv)
from .tilt import estimate_kappa, estimate_p_lambda_IS, g_equivalence_rms
from .validate import run_validation

_PLOT_HEADER = "x,y,yerr\n"


def _parse_config_file(path: str) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"bad config line (need key = value): {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _coerce(value, like):
    if like is bool:
        return str(value).lower() in ("1", "true", "yes", "on")
    return like(value)


class _Resolver:
    """flags > config file > defaults, tracking the resolved run config."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file_values = {}
        if self.args.get("config"):
            self.file_values = _parse_config_file(self.args["config"])
        self.resolved = {}

    def get(self, key: str, default, kind=None):
        kind = kind or (type(default) if default is not None else str)
        flag = self.args.get(key)
        if flag is not None:
            value = flag
        elif key in self.file_values:
            value = _coerce(self.file_values[key], kind)
        else:
            value = default
        self.resolved[key] = value
        return value

    def require(self, key: str, kind):
        value = self.get(key, None, kind)
        if value is None:
            raise ConfigurationError(f"missing required parameter: {key}")
        return kind(value)

    def run_config(self) -> dict:
        # numerical parameters only; paths are environmental
        return {k: v for k, v in self.resolved.items()
                if k not in ("out", "config", "table")}


def _sim_config(res: _Resolver) -> SimConfig:
    cfg = DEFAULT_CONFIG
    dt = res.get("dt", cfg.dt)
    threads = res.get("threads", cfg.threads)
    x_max = res.get("x_max", cfg.x_max)
    drift_tol = res.get("drift_tolerance", cfg.drift_tolerance)
    warm = res.get("warm_mass", cfg.warm_mass)
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1, got {threads}")
    return cfg.with_(dt=dt, threads=threads, x_max=x_max,
                     drift_tolerance=drift_tol, warm_mass=warm)


def _out_dir(res: _Resolver) -> Path:
    out = res.get("out", os.environ.get("SINEGAP_OUT", "sinegap_out"))
    return Path(ensure_dir(out))


def _finish(out: Path, name: str, t0: float, res: _Resolver, cfg: SimConfig,
            files: list) -> None:
    write_manifest(out / f"{name}_manifest.json", {
        "command": name,
        "version": __version__,
        "wall_time_seconds": time.time() - t0,
        "threads": cfg.threads,
        "dt": cfg.dt,
        "budgets": {
            "drift_tolerance": cfg.drift_tolerance,
            "p1_tail_tolerance": cfg.p1_tail_tolerance,
            "warm_mass": cfg.warm_mass,
            "x_max": cfg.x_max,
        },
        "outputs": files,
    })


def _estimate_payload(est, res: _Resolver) -> dict:
    return {
        "estimate": {
            "value": est.value, "stderr": est.stderr,
            "n_samples": est.n_samples, "method": est.method,
            "seed": est.seed, "beta": est.beta, "lambda": est.lam,
            "k": est.k, "dt": est.dt,
        },
        "run_config": res.run_config(),
    }


def _emit_plot(out: Path, name: str, triples) -> str:
    path = out / f"{name}_plot_data.csv"
    with open(path, "w") as fh:
        fh.write(_PLOT_HEADER)
        for x, y, yerr in triples:
            fh.write(f"{x!r},{y!r},{yerr!r}\n")
    return str(path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gap_direct(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    beta = res.require("beta", float)
    lam = res.require("lam", float)
    k = res.get("k", 0)
    n = res.get("n", 100_000)
    seed = res.get("seed", 1)
    cfg = _sim_config(res)
    out = _out_dir(res)
    est = estimate_gap_direct(ModelParams(beta, lam), k, n, seed, cfg)
    files = []
    csv_path = out / "gap_direct_estimates.csv"
    write_estimates_csv(csv_path, [est])
    files.append(str(csv_path))
    json_path = out / "gap_direct.json"
    write_json(json_path, _estimate_payload(est, res))
    files.append(str(json_path))
    if res.get("emit_plot_data", False):
        files.append(_emit_plot(out, "gap_direct",
                                [(lam, est.value, est.stderr)]))
    _finish(out, "gap_direct", t0, res, cfg, files)
    print(f"E_beta({k}; {lam:g}) = {est.value:.6g} +- {est.stderr:.3g} "
          f"(direct, n={n})")
    return 0


def cmd_gap_is(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    beta = res.require("beta", float)
    lam = res.require("lam", float)
    n = res.get("n", 100_000)
    seed = res.get("seed", 1)
    table_path = res.require("table", str)
    cfg = _sim_config(res)
    out = _out_dir(res)
    if not Path(table_path).exists():
        raise ConfigurationError(f"p1 table not found: {table_path}")
    table = P1Table.load(table_path)
    params = ModelParams(beta, lam)
    est = estimate_p_lambda_IS(params, table, n, seed, cfg)
    preflight = g_equivalence_rms(params, 100, seed + 1, cfg)
    files = []
    csv_path = out / "gap_is_estimates.csv"
    write_estimates_csv(csv_path, [est])
    files.append(str(csv_path))
    payload = _estimate_payload(est, res)
    payload["g_equivalence_rms"] = preflight
    payload["table"] = {"path": str(table_path), "beta": table.beta,
                        "n_per_point": table.n_per_point, "seed": table.seed}
    json_path = out / "gap_is.json"
    write_json(json_path, payload)
    files.append(str(json_path))
    if res.get("emit_plot_data", False):
        files.append(_emit_plot(out, "gap_is", [(lam, est.value, est.stderr)]))
    _finish(out, "gap_is", t0, res, cfg, files)
    print(f"p_lambda({lam:g}) = {est.value:.6g} +- {est.stderr:.3g} "
          f"(importance, n={n}, G-rms {preflight:.4f})")
    return 0


def cmd_p1_table(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    beta = res.require("beta", float)
    n_per = res.get("n_per_point", 8000)
    seed = res.get("seed", 1)
    cfg = _sim_config(res)
    out = _out_dir(res)
    horizon = res.get("horizon", default_p1_horizon(beta, cfg))
    grid_min = res.get("grid_min", -8.0)
    grid_max = res.get("grid_max", 6.0)
    grid_step = res.get("grid_step", 0.5)
    grid = np.arange(grid_min, grid_max + grid_step / 2, grid_step)
    table = build_p1_table(grid, beta, n_per, horizon, seed, cfg)
    path = out / f"p1_table_beta{beta:g}.json"
    table.save(path)
    files = [str(path)]
    if res.get("emit_plot_data", False):
        files.append(_emit_plot(out, "p1_table",
                                zip(table.x_grid, table.p1_values, table.stderrs)))
    _finish(out, "p1_table", t0, res, cfg, files)
    print(f"p1 table for beta={beta:g}: {len(grid)} points x {n_per} paths "
          f"-> {path}")
    return 0


def cmd_kappa(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    beta = res.require("beta", float)
    lambdas = res.require("lambdas", str)
    lams = [float(v) for v in str(lambdas).split(",")]
    n = res.get("n", 100_000)
    seed = res.get("seed", 1)
    cfg = _sim_config(res)
    out = _out_dir(res)
    table_path = res.get("table", None, str)
    if table_path:
        table = P1Table.load(table_path)
    else:
        table = build_p1_table(default_p1_grid(), beta, res.get("n_per_point", 8000),
                               default_p1_horizon(beta, cfg), seed + 1_000_003, cfg)
    try:
        target = known_kappa(beta)
    except DomainError:
        target = None
    report = estimate_kappa(beta, lams, n, seed, cfg, p1table=table, target=target)
    payload = report.to_json_dict()
    payload["run_config"] = res.run_config()
    json_path = out / "kappa_report.json"
    write_json(json_path, payload)
    files = [str(json_path)]
    csv_path = out / "kappa_per_lambda.csv"
    with open(csv_path, "w") as fh:
        fh.write("# schema_version=1\n")
        fh.write("beta,lambda,m_value,stderr,n_samples,seed,dt\n")
        for lam, m, se, ns in zip(report.lambda_list, report.m_values,
                                  report.stderrs, report.n_samples):
            fh.write(f"{beta!r},{lam!r},{m!r},{se!r},{ns},{seed},{cfg.dt!r}\n")
    files.append(str(csv_path))
    if res.get("emit_plot_data", False):
        files.append(_emit_plot(out, "kappa",
                                zip(report.lambda_list, report.m_values,
                                    report.stderrs)))
    _finish(out, "kappa", t0, res, cfg, files)
    target_txt = f", target {target:.5f}" if target else ""
    print(f"kappa_hat(beta={beta:g}) = {report.kappa_hat:.5f} "
          f"+- {report.kappa_stderr:.5f}{target_txt} "
          f"(G-rms {report.G_equivalence_rms:.4f})")
    return 0


def cmd_sample_points(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    beta = res.require("beta", float)
    lam_max = res.require("lambda_max", float)
    resolution = res.get("resolution", 64)
    n_samples = res.get("n_samples", 1)
    seed = res.get("seed", 1)
    cfg = _sim_config(res)
    out = _out_dir(res)
    counts = sine_beta_counts(lam_max, beta, resolution, seed, n_samples, cfg)
    edges = lam_max * np.arange(resolution + 1) / resolution
    mids = 0.5 * (edges[:-1] + edges[1:])
    configs = []
    for row in counts:
        inc = np.diff(np.concatenate([[0], row]))
        configs.append(np.repeat(mids, np.maximum(inc, 0)))
    csv_path = out / "sample_points.csv"
    write_points_csv(csv_path, configs)
    files = [str(csv_path)]
    json_path = out / "sample_points.json"
    write_json(json_path, {
        "run_config": res.run_config(),
        "mean_count": float(np.mean([len(c) for c in configs])),
        "resolution_cell": lam_max / resolution,
    })
    files.append(str(json_path))
    _finish(out, "sample_points", t0, res, cfg, files)
    print(f"{n_samples} configuration(s) on [0, {lam_max:g}], "
          f"mean count {np.mean([len(c) for c in configs]):.3f} -> {csv_path}")
    return 0


def cmd_oracle(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    cfg = _sim_config(res)
    out = _out_dir(res)
    sub = args.oracle_kind
    lam = res.require("lam", float)
    k = res.get("k", 0)
    seed = res.get("seed", 1)
    if sub == "fredholm":
        order = res.get("order", 60)
        value = sine_kernel_gap(lam, k, order)
        row = {"oracle": "fredholm", "beta": 2.0, "lambda": lam, "k": k,
               "n_or_order": order, "value": value, "stderr_or_tol": 1e-8,
               "seed": seed}
        est_txt = f"E_2(0; {lam:g}) = {value:.10g} (fredholm, order {order})"
    else:
        beta = res.require("beta", float)
        n = res.get("n", 400)
        samples = res.get("samples", 2000)
        rescaled = [
            bulk_rescale(sample_tridiagonal_beta(n, beta, seed, i), 0.0)
            for i in range(samples)
        ]
        est = empirical_gap_prob(rescaled, lam, k, seed=seed)
        row = {"oracle": "matrix", "beta": beta, "lambda": lam, "k": k,
               "n_or_order": n, "value": est.value, "stderr_or_tol": est.stderr,
               "seed": seed}
        est_txt = (f"E_{beta:g}({k}; {lam:g}) = {est.value:.5f} "
                   f"+- {est.stderr:.5f} (matrix, n={n}, {samples} samples)")
    csv_path = out / f"oracle_{sub}.csv"
    write_oracle_csv(csv_path, [row])
    json_path = out / f"oracle_{sub}.json"
    write_json(json_path, {"result": row, "run_config": res.run_config()})
    _finish(out, f"oracle_{sub}", t0, res, cfg,
            [str(csv_path), str(json_path)])
    print(est_txt)
    return 0


def cmd_validate(args) -> int:
    t0 = time.time()
    res = _Resolver(args)
    profile = res.get("profile", "full")
    seed = res.get("seed", 20260808)
    cfg = _sim_config(res)
    out = _out_dir(res)
    report = run_validation(out, profile=profile, seed=seed, cfg=cfg)
    _finish(out, "validate", t0, res, cfg,
            [str(out / "validation_report.json")])
    if report["all_passed"]:
        print(f"all {len(report['criteria'])} criteria passed "
              f"({time.time() - t0:.0f}s)")
        return 0
    failed = [c["name"] for c in report["criteria"] if not c["passed"]]
    print(f"FAILED criteria: {', '.join(failed)}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (default: $SINEGAP_OUT or ./sinegap_out)")
    p.add_argument("--config", help="key = value config file (flags win)")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--drift-tolerance", dest="drift_tolerance", type=float)
    p.add_argument("--warm-mass", dest="warm_mass", type=float)
    p.add_argument("--emit-plot-data", dest="emit_plot_data",
                   action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinegap",
        description="Monte Carlo engine for Sine_beta gap probabilities",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gap-direct", help="direct phase-function estimate")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_gap_direct)

    p = sub.add_parser("gap-is", help="importance-sampled estimate")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--table", help="path to a p1 table JSON")
    _add_common(p)
    p.set_defaults(func=cmd_gap_is)

    p = sub.add_parser("p1-table", help="build the survival-probability table")
    p.add_argument("--beta", type=float)
    p.add_argument("--n-per-point", dest="n_per_point", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--grid-min", dest="grid_min", type=float)
    p.add_argument("--grid-max", dest="grid_max", type=float)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_p1_table)

    p = sub.add_parser("kappa", help="extract the asymptotic constant")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambdas", help="comma-separated increasing list")
    p.add_argument("--n", type=int)
    p.add_argument("--table", help="path to a p1 table JSON (built if absent)")
    p.add_argument("--n-per-point", dest="n_per_point", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("sample-points", help="sample point configurations")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda-max", dest="lambda_max", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_sample_points)

    p = sub.add_parser("oracle", help="ground-truth oracles")
    orc = p.add_subparsers(dest="oracle_kind", required=True)
    for kind in ("matrix", "fredholm"):
        q = orc.add_parser(kind)
        q.add_argument("--beta", type=float)
        q.add_argument("--lambda", dest="lam", type=float)
        q.add_argument("--k", type=int)
        q.add_argument("--n", type=int)
        q.add_argument("--samples", type=int)
        q.add_argument("--order", type=int)
        _add_common(q)
        q.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="run the acceptance-criteria suite")
    p.add_argument("--profile", choices=("full", "quick"))
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, InvariantViolationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
