"""End-to-end validation pipeline implementing the acceptance gates.

Each criterion runs at its stated tolerance, prints one pass/fail line,
and contributes a details block to the report. Sample sizes come from the
selected profile; tolerances are fixed here and never profile-dependent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .config import DEFAULT_CONFIG, SimConfig
from .logtan import (P1Table, build_p1_table, coupled_X_pairs, default_p1_grid,
                     default_p1_horizon, lemma22_bound)
from .oracles import (btw_slope_check, bulk_rescale, empirical_gap_prob,
                      known_kappa, sample_tridiagonal_beta, sine_kernel_gap)
from .params import ModelParams
from .phase import (GapEstimate, estimate_gap_direct, hat_weights,
                    phase_terminals)
from .reports import ensure_dir, write_estimates_csv, write_json
from .tilt import (c1_drift_default, coupled_triples, estimate_kappa,
                   estimate_p_lambda_IS, g_equivalence_rms, z_density_grid,
                   z_samples)

TWO_PI = 2.0 * math.pi

PROFILES = {
    "full": dict(direct_n=100_000, is_n=100_000, table_n=8000,
                 matrix_n=400, matrix_samples=2000, kappa_n_max=100_000,
                 kappa_n_small=30_000, martingale_n=10_000,
                 coupling_pairs=1000, z_paths=2048, z_records=50,
                 btw_n=100_000, g_paths=100),
    "quick": dict(direct_n=20_000, is_n=20_000, table_n=2000,
                  matrix_n=200, matrix_samples=500, kappa_n_max=20_000,
                  kappa_n_small=8_000, martingale_n=4000,
                  coupling_pairs=200, z_paths=512, z_records=40,
                  btw_n=30_000, g_paths=100),
}

KAPPA_LAMBDAS = [8.0, 16.0, 32.0, 64.0]


@dataclass
class CriterionResult:
    name: str
    passed: bool
    runtime_seconds: float
    details: dict


@dataclass
class _Ctx:
    cfg: SimConfig
    out_dir: Path
    seed: int
    sizes: dict
    tables: dict = field(default_factory=dict)
    kappa_reports: dict = field(default_factory=dict)


def _combined(*errs: float) -> float:
    return math.sqrt(sum(e * e for e in errs))


def _agree(a: GapEstimate, b: GapEstimate, n_sigma: float = 3.0,
           allowance: float = 0.0) -> dict:
    tol = n_sigma * _combined(a.stderr, b.stderr) + allowance
    return {
        "first": a.value, "second": b.value,
        "difference": a.value - b.value, "tolerance": tol,
        "ok": abs(a.value - b.value) <= tol,
    }


def get_table(ctx: _Ctx, beta: float) -> P1Table:
    """Build (or load from the run directory) the survival table for beta."""
    if beta in ctx.tables:
        return ctx.tables[beta]
    path = ctx.out_dir / f"p1_table_beta{beta:g}.json"
    if path.exists():
        table = P1Table.load(path)
        if (abs(table.beta - beta) < 1e-12
                and table.n_per_point == ctx.sizes["table_n"]
                and table.seed == ctx.seed + 11):
            ctx.tables[beta] = table
            return table
    table = build_p1_table(default_p1_grid(), beta, ctx.sizes["table_n"],
                           default_p1_horizon(beta, ctx.cfg), ctx.seed + 11,
                           ctx.cfg)
    table.save(path)
    ctx.tables[beta] = table
    return table


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def criterion_oracle_triangle(ctx: _Ctx) -> CriterionResult:
    """Direct carousel, tridiagonal matrix, and Fredholm mutually agree."""
    t0 = time.time()
    beta, lam = 2.0, 2.0
    direct = estimate_gap_direct(ModelParams(beta, lam), 0,
                                 ctx.sizes["direct_n"], ctx.seed + 21, ctx.cfg)
    n_mat = ctx.sizes["matrix_n"]
    rescaled = [
        bulk_rescale(sample_tridiagonal_beta(n_mat, beta, ctx.seed + 22, i), 0.0)
        for i in range(ctx.sizes["matrix_samples"])
    ]
    matrix = empirical_gap_prob(rescaled, lam, 0, seed=ctx.seed + 22)
    fred = GapEstimate(value=sine_kernel_gap(lam), stderr=0.0, n_samples=0,
                       method="oracle-fredholm", seed=0, beta=beta, lam=lam, k=0)
    allowance = 0.01  # finite-n bias allowance for the matrix leg at n=400
    checks = {
        "direct_vs_fredholm": _agree(direct, fred),
        "direct_vs_matrix": _agree(direct, matrix, allowance=allowance),
        "matrix_vs_fredholm": _agree(matrix, fred, allowance=allowance),
    }
    passed = all(c["ok"] for c in checks.values())
    return CriterionResult("oracle-triangle", passed, time.time() - t0, checks)


def criterion_is_consistency(ctx: _Ctx) -> CriterionResult:
    """Importance-sampled p_lam matches direct MC for beta in {1,2,4}."""
    t0 = time.time()
    checks = {}
    for beta in (1.0, 2.0, 4.0):
        table = get_table(ctx, beta)
        for lam in (2.0, 4.0, 6.0):
            params = ModelParams(beta, lam)
            direct = estimate_gap_direct(params, 0, ctx.sizes["direct_n"],
                                         ctx.seed + 31, ctx.cfg)
            is_est = estimate_p_lambda_IS(params, table, ctx.sizes["is_n"],
                                          ctx.seed + 32, ctx.cfg)
            checks[f"beta{beta:g}_lam{lam:g}"] = _agree(is_est, direct)
    passed = all(c["ok"] for c in checks.values())
    return CriterionResult("is-consistency", passed, time.time() - t0, checks)


def criterion_kappa_recovery(ctx: _Ctx) -> CriterionResult:
    """kappa_hat at lam=64 within 10% of the closed-form targets."""
    t0 = time.time()
    checks = {}
    n_list = [ctx.sizes["kappa_n_small"]] * 3 + [ctx.sizes["kappa_n_max"]]
    for beta in (1.0, 2.0, 4.0):
        table = get_table(ctx, beta)
        target = known_kappa(beta)
        report = estimate_kappa(beta, KAPPA_LAMBDAS, n_list, ctx.seed + 41,
                                ctx.cfg, p1table=table, target=target)
        ctx.kappa_reports[beta] = report
        rel_err = abs(report.kappa_hat - target) / target
        m = report.m_values
        doubling = abs(m[-1] - m[-2]) / abs(m[-1])
        checks[f"beta{beta:g}"] = {
            "kappa_hat": report.kappa_hat,
            "target": target,
            "relative_error": rel_err,
            "m_values": m,
            "stderrs": report.stderrs,
            "last_doubling_variation": doubling,
            "monotone_flag": report.monotone_flag,
            "ok": rel_err < 0.10 and doubling < 0.10,
        }
        write_json(ctx.out_dir / f"kappa_beta{beta:g}.json",
                   report.to_json_dict())
    passed = all(c["ok"] for c in checks.values())
    return CriterionResult("kappa-recovery", passed, time.time() - t0, checks)


def criterion_leading_order(ctx: _Ctx) -> CriterionResult:
    """Fit of log p_hat recovers the quadratic coefficient -beta/64."""
    t0 = time.time()
    beta = 2.0
    report = ctx.kappa_reports.get(beta)
    if report is None:
        table = get_table(ctx, beta)
        n_list = [ctx.sizes["kappa_n_small"]] * 3 + [ctx.sizes["kappa_n_max"]]
        report = estimate_kappa(beta, KAPPA_LAMBDAS, n_list, ctx.seed + 41,
                                ctx.cfg, p1table=table,
                                target=known_kappa(beta))
        ctx.kappa_reports[beta] = report
    lams = np.array(report.lambda_list)
    log_p = np.array(report.log_prefactors) + np.log(report.m_values)
    design = np.column_stack([lams**2, lams, np.log(lams), np.ones_like(lams)])
    coef, *_ = np.linalg.lstsq(design, log_p, rcond=None)
    a_target = -beta / 64.0
    c_target = ModelParams(beta, 2.0).gamma_beta
    a_rel = abs(coef[0] - a_target) / abs(a_target)
    c_rel = abs(coef[2] - c_target) / abs(c_target)
    details = {
        "a_fit": float(coef[0]), "a_target": a_target, "a_relative_error": a_rel,
        "b_fit": float(coef[1]),
        "c_fit": float(coef[2]), "c_target": c_target, "c_relative_error": c_rel,
        "c_within_50pct": c_rel < 0.5,
        "log_p_values": log_p.tolist(),
    }
    # the log coefficient is weakly identified at these lambdas: reported,
    # gated only on the quadratic coefficient
    passed = a_rel < 0.05
    return CriterionResult("leading-order-law", passed, time.time() - t0, details)


def criterion_g_equivalence(ctx: _Ctx) -> CriterionResult:
    """Closed-form and direct G agree, improving as dt shrinks."""
    t0 = time.time()
    params = ModelParams(2.0, 6.0)
    n = ctx.sizes["g_paths"]
    rms_base = g_equivalence_rms(params, n, ctx.seed + 51, ctx.cfg, dt=1e-3)
    rms_half = g_equivalence_rms(params, n, ctx.seed + 51, ctx.cfg, dt=5e-4)
    ratio = rms_base / rms_half if rms_half > 0 else math.inf
    details = {
        "rms_dt_1e-3": rms_base, "rms_dt_5e-4": rms_half,
        "ratio": ratio, "threshold": 0.05, "min_ratio": 1.3,
        "beta": params.beta, "lam": params.lam, "n_paths": n,
    }
    passed = rms_base < 0.05 and ratio >= 1.3
    return CriterionResult("g-master-equivalence", passed, time.time() - t0, details)


def criterion_lemma_tail_bound(ctx: _Ctx) -> CriterionResult:
    """Every table entry beyond x = 4 sits under the explicit tail bound."""
    t0 = time.time()
    checks = {}
    for beta in (1.0, 2.0, 4.0):
        table = get_table(ctx, beta)
        mask = table.x_grid > 4.0
        bound = lemma22_bound(table.x_grid[mask], beta) + 3.0 * table.stderrs[mask]
        vals = table.p1_values[mask]
        ok = bool(np.all(vals <= bound))
        checks[f"beta{beta:g}"] = {
            "x": table.x_grid[mask].tolist(),
            "values": vals.tolist(),
            "bounds": bound.tolist(),
            "ok": ok,
        }
    passed = all(c["ok"] for c in checks.values())
    return CriterionResult("lemma-tail-bound", passed, time.time() - t0, checks)


def criterion_martingale_absorption(ctx: _Ctx) -> CriterionResult:
    """Zero-drift phase is a martingale absorbing at 2 pi w.p. a/(2 pi)."""
    t0 = time.time()
    n = ctx.sizes["martingale_n"]
    params = ModelParams(2.0, 0.0)
    checks = {}
    for idx, a in enumerate((math.pi / 2, math.pi, 1.5 * math.pi)):
        # mean preservation at t = 1
        alphas = phase_terminals(params, 1.0, n, ctx.seed + 61 + idx,
                                 ctx.cfg, alpha0=a)
        mean = float(alphas.mean())
        se = float(alphas.std(ddof=1) / math.sqrt(n))
        mean_ok = abs(mean - a) <= 3.0 * se
        # absorption probabilities over a long horizon
        long_alphas = phase_terminals(params, 40.0, n, ctx.seed + 71 + idx,
                                      ctx.cfg, alpha0=a)
        absorbed_high = long_alphas > math.pi
        p_hat = float(absorbed_high.mean())
        p_se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / n)
        p_target = a / TWO_PI
        # residual mid-range mass bounds the classification error
        mid = float(np.mean(np.abs(np.minimum(long_alphas, TWO_PI - long_alphas)) > 0.1))
        absorb_ok = abs(p_hat - p_target) <= 3.0 * p_se + mid
        checks[f"a={a:.4f}"] = {
            "mean": mean, "mean_target": a, "mean_stderr": se, "mean_ok": mean_ok,
            "p_absorb_high": p_hat, "p_target": p_target, "p_stderr": p_se,
            "midrange_mass": mid, "absorb_ok": absorb_ok,
            "ok": mean_ok and absorb_ok,
        }
    passed = all(c["ok"] for c in checks.values())
    return CriterionResult("martingale-absorption", passed, time.time() - t0, checks)


def criterion_monotone_couplings(ctx: _Ctx) -> CriterionResult:
    """Shared-noise orderings hold pathwise with zero violations."""
    t0 = time.time()
    n = ctx.sizes["coupling_pairs"]
    x_pairs = coupled_X_pairs(-2.0, -1.0, ModelParams(2.0, 1.0), 10.0, n,
                              ctx.seed + 81, ctx.cfg)
    triples = coupled_triples(2.0, 8.0, 16.0, n, ctx.seed + 82, ctx.cfg)
    with np.errstate(invalid="ignore"):
        yy_gap = np.nanmax(triples.y_small - triples.y_big)
        zy_gap = float(np.max(triples.y_big - triples.z))
    details = {
        "x_ordering": x_pairs,
        "y_nesting_worst_gap": float(yy_gap),
        "z_domination_worst_gap": zy_gap,
        "n_triples": n,
    }
    passed = (x_pairs["violations"] == 0 and yy_gap <= 0.0 and zy_gap <= 0.0)
    return CriterionResult("monotone-couplings", passed, time.time() - t0, details)


def criterion_z_stationarity(ctx: _Ctx) -> CriterionResult:
    """Chi-square test of the reflected diffusion against its density."""
    t0 = time.time()
    beta = 2.0
    c1 = c1_drift_default(beta)
    samples = z_samples(beta, c1, ctx.sizes["z_paths"], ctx.sizes["z_records"],
                        3.0, ctx.seed + 91, ctx.cfg).ravel()
    zs, _, cdf = z_density_grid(beta, c1)
    n_bins = 20
    edges = np.interp(np.linspace(0.0, 1.0, n_bins + 1), cdf, zs)
    edges[0], edges[-1] = -np.inf, np.inf
    counts, _ = np.histogram(samples, bins=edges)
    expected = len(samples) / n_bins
    stat = float(np.sum((counts - expected) ** 2 / expected))
    threshold = float(chi2_dist.ppf(1.0 - 1e-3, n_bins - 1))
    details = {
        "chi2": stat, "threshold": threshold, "bins": n_bins,
        "n_samples": int(len(samples)), "c1_drift": c1,
        "counts": counts.tolist(),
    }
    passed = stat < threshold
    return CriterionResult("z-stationarity", passed, time.time() - t0, details)


def criterion_btw_slope(ctx: _Ctx) -> CriterionResult:
    """k-gap log-ratio slope beta/4 recovered within 15% at beta = 2."""
    t0 = time.time()
    beta = 2.0
    lams = [4.0, 6.0, 8.0, 10.0]
    n = ctx.sizes["btw_n"]
    e0, e1 = [], []
    for i, lam in enumerate(lams):
        params = ModelParams(beta, lam)
        horizon = params.phase_horizon(ctx.cfg.drift_tolerance)
        alphas = phase_terminals(params, horizon, n, ctx.seed + 101 + i, ctx.cfg)
        for k, dest in ((0, e0), (1, e1)):
            w = hat_weights(alphas, k)
            dest.append(GapEstimate(
                value=float(w.mean()),
                stderr=float(w.std(ddof=1) / math.sqrt(n)),
                n_samples=n, method="direct", seed=ctx.seed + 101 + i,
                beta=beta, lam=lam, k=k, dt=ctx.cfg.phase_dt(lam)))
    fit = btw_slope_check(lams, e0, e1)
    target = beta / 4.0
    rel = abs(fit.lambda_coefficient - target) / target
    details = {
        "lambda_coefficient": fit.lambda_coefficient,
        "target": target, "relative_error": rel,
        "log_coefficient": fit.log_coefficient,
        "log_coefficient_target": 0.5 * (1.0 - beta),
        "condition_number": fit.condition_number,
        "estimates_k0": [e.value for e in e0],
        "estimates_k1": [e.value for e in e1],
    }
    passed = rel < 0.15
    return CriterionResult("btw-slope", passed, time.time() - t0, details)


def criterion_reproducibility(ctx: _Ctx) -> CriterionResult:
    """Identical configs give byte-identical numerical outputs across threads."""
    t0 = time.time()
    outputs = []
    for threads in (1, 4):
        # small blocks so the worker pool is actually exercised
        cfg = ctx.cfg.with_(threads=threads, block_size=512)
        run_dir = ensure_dir(ctx.out_dir / f"repro_threads{threads}")
        est = estimate_gap_direct(ModelParams(2.0, 2.0), 0, 4000,
                                  ctx.seed + 111, cfg)
        write_estimates_csv(Path(run_dir) / "estimates.csv", [est])
        table = build_p1_table(default_p1_grid(), 2.0, 200,
                               default_p1_horizon(2.0, cfg), ctx.seed + 112, cfg)
        table.save(Path(run_dir) / "p1_table.json")
        is_est = estimate_p_lambda_IS(ModelParams(2.0, 4.0), table, 2000,
                                      ctx.seed + 113, cfg)
        write_estimates_csv(Path(run_dir) / "is_estimate.csv", [is_est])
        blobs = b"".join(
            (Path(run_dir) / name).read_bytes()
            for name in ("estimates.csv", "p1_table.json", "is_estimate.csv")
        )
        outputs.append(blobs)
    identical = outputs[0] == outputs[1]
    details = {"byte_identical": identical, "threads_compared": [1, 4],
               "n_bytes": len(outputs[0])}
    return CriterionResult("reproducibility", identical, time.time() - t0, details)


CRITERIA = [
    criterion_oracle_triangle,
    criterion_is_consistency,
    criterion_kappa_recovery,
    criterion_leading_order,
    criterion_g_equivalence,
    criterion_lemma_tail_bound,
    criterion_martingale_absorption,
    criterion_monotone_couplings,
    criterion_z_stationarity,
    criterion_btw_slope,
    criterion_reproducibility,
]


def run_validation(out_dir, profile: str = "full", seed: int = 20260808,
                   cfg: SimConfig = DEFAULT_CONFIG, echo=print) -> dict:
    """Run every acceptance criterion and write the validation report.

    Returns the report dict; ``report['all_passed']`` drives the CLI exit
    code. Wall times are reported per criterion but never gated.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    out = Path(ensure_dir(out_dir))
    ctx = _Ctx(cfg=cfg, out_dir=out, seed=seed, sizes=dict(PROFILES[profile]))
    results = []
    for criterion in CRITERIA:
        res = criterion(ctx)
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        echo(f"[{status}] {res.name}  ({res.runtime_seconds:.1f}s)")
    report = {
        "profile": profile,
        "seed": seed,
        "config": cfg.to_dict(),
        "all_passed": all(r.passed for r in results),
        "criteria": [
            {"name": r.name, "passed": r.passed,
             "runtime_seconds": r.runtime_seconds, "details": r.details}
            for r in results
        ],
    }
    write_json(out / "validation_report.json", report)
    return report
