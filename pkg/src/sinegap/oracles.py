"""Independent ground-truth generators.

Finite-n tridiagonal beta-ensemble sampling with bulk rescaling, the
sine-kernel Fredholm determinant (exact gap probability at beta = 2),
high-precision closed-form constants, and the k-gap slope fit. These
never share code paths with the carousel simulators they validate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigvalsh_tridiagonal

from .errors import ConfigurationError, DomainError, NumericalError
from .phase import GapEstimate

TWO_PI = 2.0 * math.pi
_MAX_TRIDIAG_N = 200_000


@dataclass(frozen=True)
class SpectrumSample:
    """Sorted eigenvalues of one tridiagonal beta-ensemble draw."""

    n: int
    beta: float
    eigenvalues: np.ndarray
    seed: int


def tridiagonal_entries(n: int, beta: float, seed: int,
                        stream_id: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the tridiagonal beta-ensemble matrix.

    The matrix is ``(1/sqrt(beta))`` times a tridiagonal with N(0, 2)
    diagonal and chi_{beta (n-k)} off-diagonal entries, the normalisation
    whose eigenvalue density carries the ``exp(-beta lam^2 / 4)`` weight.
    The 2x2 brute-force density test pins this convention.
    """
    if n < 2:
        raise ConfigurationError(f"n must be >= 2, got {n}")
    if beta <= 0:
        raise ConfigurationError(f"beta must be positive, got {beta}")
    if n > _MAX_TRIDIAG_N:
        raise ConfigurationError(
            f"n = {n} exceeds the memory budget ({_MAX_TRIDIAG_N})"
        )
    key = np.array([seed, stream_id], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    diag = rng.normal(0.0, math.sqrt(2.0), n)
    dofs = beta * np.arange(n - 1, 0, -1)
    off = np.sqrt(rng.chisquare(dofs))
    s = 1.0 / math.sqrt(beta)
    return diag * s, off * s


def sample_tridiagonal_beta(n: int, beta: float, seed: int,
                            stream_id: int = 0) -> SpectrumSample:
    """Draw one spectrum of the finite-n beta-ensemble.

    Eigenvalues come from the tridiagonal-specific LAPACK solver
    (Sturm-sequence bisection); :func:`sturm_count` provides the
    self-validating eigenvalue-count cross-check.
    """
    diag, off = tridiagonal_entries(n, beta, seed, stream_id)
    eigs = eigvalsh_tridiagonal(diag, off, lapack_driver="stebz")
    return SpectrumSample(n=n, beta=beta, eigenvalues=np.sort(eigs), seed=seed)


def sturm_count(diag: np.ndarray, off: np.ndarray, x: float) -> int:
    """Number of eigenvalues strictly below ``x`` by Sturm sign changes.

    Standard shifted LDL^T recurrence with underflow safeguarding; exact
    counts make the bisection solver self-checking.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    count = 0
    d = 1.0
    tiny = 1e-300
    for i in range(len(diag)):
        b2 = off[i - 1] ** 2 if i > 0 else 0.0
        d = (diag[i] - x) - b2 / d
        if d == 0.0:
            d = tiny
        if d < 0.0:
            count += 1
    return count


def semicircle_cdf(x):
    """CDF of the semicircle law on [-2, 2]."""
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * math.pi) + np.arcsin(x / 2.0) / math.pi


def bulk_rescale(sample: SpectrumSample, mu: float) -> np.ndarray:
    """Rescale eigenvalues to point-process density ``1/(2 pi)`` around ``mu``.

    Returns ``sqrt(4 n - mu^2) * (eigenvalues - mu)``. ``mu`` must lie in
    the bulk window ``|mu| < 2 sqrt(n) (1 - n^{-1/3})``.
    """
    n = sample.n
    window = 2.0 * math.sqrt(n) * (1.0 - n ** (-1.0 / 3.0))
    if abs(mu) >= window:
        raise DomainError(
            f"mu = {mu:g} outside the bulk window |mu| < {window:g} at n = {n}"
        )
    return math.sqrt(4.0 * n - mu * mu) * (sample.eigenvalues - mu)


def empirical_gap_prob(rescaled_sets: Sequence[np.ndarray], lam: float,
                       k: int, seed: int = 0) -> GapEstimate:
    """Fraction of samples with exactly ``k`` points in ``[0, lam]``."""
    if len(rescaled_sets) < 100:
        raise ConfigurationError("need at least 100 samples")
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k}")
    hits = np.array([
        int(np.count_nonzero((pts >= 0.0) & (pts <= lam)) == k)
        for pts in rescaled_sets
    ])
    m = len(rescaled_sets)
    p = float(hits.mean())
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / m)
    return GapEstimate(value=p, stderr=stderr, n_samples=m,
                       method="oracle-matrix", seed=seed, lam=lam, k=k)


# ---------------------------------------------------------------------------
# sine-kernel Fredholm determinant (beta = 2)
# ---------------------------------------------------------------------------

def _sine_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x[:, None] - y[None, :]
    out = np.empty_like(d)
    small = np.abs(d) < 1e-12
    out[small] = 1.0 / TWO_PI
    ds = np.where(small, 1.0, d)
    out[~small] = (np.sin(ds / 2.0) / (math.pi * ds))[~small]
    return out


def _nystrom_det(lam: float, order: int) -> float:
    z, w = leggauss(order)
    x = 0.5 * lam * (z + 1.0)
    wq = 0.5 * lam * w
    sq = np.sqrt(wq)
    m = np.eye(order) - sq[:, None] * _sine_kernel(x, x) * sq[None, :]
    sign, logdet = np.linalg.slogdet(m)
    return float(sign * np.exp(logdet))


def sine_kernel_gap(lam: float, k: int = 0, quad_order: int = 60) -> float:
    """Exact ``E_2(0; lam)`` as the Fredholm determinant of the sine kernel.

    Nystrom discretisation with Gauss-Legendre nodes on ``[0, lam]``; the
    kernel ``sin((x-y)/2) / (pi (x-y))`` has unit density per ``2 pi``
    spacing (diagonal value ``1/(2 pi)``). The value is accepted only if
    doubling the quadrature order moves it by less than 1e-8 relative.
    """
    if lam < 0:
        raise DomainError(f"lam must be nonnegative, got {lam}")
    if k != 0:
        raise DomainError("only the k = 0 determinant is implemented")
    if quad_order < 20:
        raise ConfigurationError(f"quad_order must be >= 20, got {quad_order}")
    if lam == 0.0:
        return 1.0
    base = _nystrom_det(lam, quad_order)
    refined = _nystrom_det(lam, 2 * quad_order)
    if abs(refined - base) > 1e-8 * max(abs(refined), 1e-300):
        raise NumericalError(
            f"Nystrom determinant did not converge at order {quad_order}: "
            f"{base!r} vs {refined!r}"
        )
    return refined


# ---------------------------------------------------------------------------
# closed-form constants
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def zeta_prime_minus1() -> float:
    """``zeta'(-1)`` to full double precision by an independent series.

    Computes ``zeta'(2)`` directly as ``-sum log(n)/n^2`` with an
    Euler-Maclaurin tail, then maps through the Glaisher-Kinkelin
    relations ``log A = (gamma + log 2 pi)/12 - zeta'(2)/(2 pi^2)`` and
    ``zeta'(-1) = 1/12 - log A``.
    """
    N = 200_000
    n = np.arange(2, N, dtype=np.float64)
    partial = float(np.sum(np.log(n) / (n * n)))
    f_N = math.log(N) / N**2
    fp_N = (1.0 - 2.0 * math.log(N)) / N**3
    tail = (math.log(N) + 1.0) / N + f_N / 2.0 - fp_N / 12.0
    zeta_p2 = -(partial + tail)
    log_A = (np.euler_gamma + math.log(TWO_PI)) / 12.0 - zeta_p2 / (2.0 * math.pi**2)
    return 1.0 / 12.0 - log_A


def known_kappa(beta: float) -> float:
    """Closed-form asymptotic constants for beta in {1, 2, 4}.

    ``kappa_1 = 2^{13/24} e^{(3/2) zeta'(-1)}``,
    ``kappa_2 = 2^{7/12} e^{3 zeta'(-1)}``,
    ``kappa_4 = 2^{-13/12} e^{(3/2) zeta'(-1)}``.
    """
    zp = zeta_prime_minus1()
    if beta == 1:
        return 2.0 ** (13.0 / 24.0) * math.exp(1.5 * zp)
    if beta == 2:
        return 2.0 ** (7.0 / 12.0) * math.exp(3.0 * zp)
    if beta == 4:
        return 2.0 ** (-13.0 / 12.0) * math.exp(1.5 * zp)
    raise DomainError("kappa is only known in closed form for beta in 1, 2, 4")


# ---------------------------------------------------------------------------
# k-gap slope fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BtwFit:
    """Fit of ``log E(1; lam) - log E(0; lam)`` against ``(lam, log lam, 1)``."""

    lambda_coefficient: float
    log_coefficient: float
    intercept: float
    condition_number: float


def btw_slope_check(lambdas: Sequence[float], e0: Sequence[GapEstimate],
                    e1: Sequence[GapEstimate],
                    max_rel_stderr: float = 0.2) -> BtwFit:
    """Fit the k-gap log-ratio and return the lambda and log-lambda slopes.

    The constant term is absorbed into the intercept and not checked.
    Declines (raises) if any estimate is too noisy or the design matrix
    is ill-conditioned.
    """
    lams = np.asarray(list(lambdas), dtype=float)
    if len(e0) != lams.size or len(e1) != lams.size or lams.size < 3:
        raise ConfigurationError("need matching estimates for >= 3 lambdas")
    for est in list(e0) + list(e1):
        if est.value <= 0:
            raise ConfigurationError("estimates must be positive to take logs")
        if est.stderr / est.value > max_rel_stderr:
            raise ConfigurationError(
                f"estimate at lam={est.lam} has relative stderr "
                f"{est.stderr / est.value:.2f} > {max_rel_stderr}"
            )
    y = np.array([math.log(b.value) - math.log(a.value) for a, b in zip(e0, e1)])
    design = np.column_stack([lams, np.log(lams), np.ones_like(lams)])
    cond = float(np.linalg.cond(design))
    if cond > 1e8:
        raise NumericalError(f"design matrix ill-conditioned: cond = {cond:.3g}")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return BtwFit(lambda_coefficient=float(coef[0]), log_coefficient=float(coef[1]),
                  intercept=float(coef[2]), condition_number=cond)
