"""Phase-function representation of the Sine_beta process.

The winding angle ``alpha`` solves ``d alpha = lam f dt + 2 sin(alpha/2) dW``
from ``alpha(0) = 0`` and converges to a multiple of ``2 pi``; that multiple
over ``2 pi`` is the number of process points in ``[0, lam]``. Estimators
integrate until the drift tail is below tolerance and then apply the exact
absorption probabilities of the drift-free continuation instead of
simulating it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, SimConfig
from .errors import ConfigurationError, DomainError, InvariantViolationError
from .params import ModelParams, speed_f
from .sde import (Alive, BlockNoise, NoiseStream, SdePath, integrate,
                  make_grid, path_blocks, run_blocks)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GapEstimate:
    """Monte Carlo estimate of a gap probability ``E_beta(k; lam)``."""

    value: float
    stderr: float
    n_samples: int
    method: str
    seed: int
    beta: Optional[float] = None
    lam: Optional[float] = None
    k: Optional[int] = None
    dt: Optional[float] = None


@dataclass(frozen=True)
class PhasePath:
    """One phase trajectory plus the analytic bound on the drift it ignored."""

    path: SdePath
    lam: float
    residual_drift_bound: float


def hat_weights(a, k: int):
    """Absorption probability at ``2 pi k`` for the drift-free continuation.

    A bounded martingale started at ``a`` absorbs at the neighbouring
    multiples of ``2 pi`` with linear probabilities, giving the hat
    function ``max(0, 1 - |a / (2 pi) - k|)``. The weights over all k
    partition unity.
    """
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k}")
    a = np.asarray(a, dtype=float)
    return np.maximum(0.0, 1.0 - np.abs(a / TWO_PI - k))


def terminal_weight_k(phase: PhasePath, k: int,
                      tolerance: float = DEFAULT_CONFIG.drift_tolerance) -> float:
    """Exact-count weight of one simulated phase path."""
    if phase.residual_drift_bound > tolerance:
        raise ConfigurationError(
            f"residual drift {phase.residual_drift_bound:g} exceeds tolerance "
            f"{tolerance:g}; extend the horizon"
        )
    if not isinstance(phase.path.terminal, Alive):
        raise ConfigurationError("phase path must end alive")
    return float(hat_weights(phase.path.terminal.value, k))


def _require_horizon(params: ModelParams, horizon: float, tolerance: float) -> float:
    residual = params.residual_drift(horizon)
    if residual > tolerance * (1.0 + 1e-9):
        needed = params.phase_horizon(tolerance)
        raise ConfigurationError(
            f"horizon {horizon:g} leaves residual drift {residual:g} > "
            f"{tolerance:g}; need horizon >= {needed:g}"
        )
    return residual


def simulate_phase(params: ModelParams, horizon: float, stream: NoiseStream,
                   cfg: SimConfig = DEFAULT_CONFIG) -> PhasePath:
    """Single Euler-Maruyama phase path on ``[0, horizon]``.

    The drift at 0 is ``lam f > 0`` and the diffusion vanishes there, so no
    clamping at 0 is required; winding is tracked unwrapped.
    """
    if horizon <= 0.0:
        raise ConfigurationError("horizon must be positive")
    residual = _require_horizon(params, horizon, cfg.drift_tolerance)
    if params.lam == 0.0:
        grid = make_grid(0.0, horizon, cfg.dt)
        values = np.zeros(grid.n_steps + 1)
        return PhasePath(SdePath(grid, values, Alive(0.0)), params.lam, residual)
    grid = make_grid(0.0, horizon, cfg.phase_dt(params.lam))
    lam, beta = params.lam, params.beta
    path = integrate(
        drift=lambda t, a: lam * speed_f(t, beta),
        diffusion=lambda t, a: 2.0 * math.sin(a / 2.0),
        x0=0.0,
        grid=grid,
        stream=stream,
    )
    return PhasePath(path, lam, residual)


def phase_terminals(params: ModelParams, horizon: float, n_paths: int, seed: int,
                    cfg: SimConfig = DEFAULT_CONFIG, stream_offset: int = 0,
                    dt: Optional[float] = None, alpha0: float = 0.0) -> np.ndarray:
    """Terminal angles of ``n_paths`` independent phase paths.

    Path ``i`` is driven by the stream ``(seed, stream_offset + i)``; the
    result is a pure function of those ids and the grid. ``alpha0`` starts
    the paths away from 0 (used by the zero-drift martingale checks).
    """
    _require_horizon(params, horizon, cfg.drift_tolerance)
    if horizon <= 0.0 or (params.lam == 0.0 and alpha0 == 0.0):
        return np.full(n_paths, alpha0)
    grid = make_grid(0.0, horizon, dt if dt is not None else cfg.phase_dt(params.lam))
    pts, widths = grid.points(), grid.step_sizes()
    drift_per_step = params.lam * speed_f(pts[:-1], params.beta) * widths
    sqrt_widths = np.sqrt(widths)
    out = np.empty(n_paths)

    def worker(lo: int, hi: int) -> None:
        noise = BlockNoise(seed, stream_offset + lo, hi - lo)
        alpha = np.full(hi - lo, float(alpha0))
        scratch = np.empty(hi - lo)
        done = 0
        while done < grid.n_steps:
            clen = min(cfg.chunk_steps, grid.n_steps - done)
            tile = noise.next_chunk(clen)
            # fold the diffusion prefactor 2 sqrt(step) into the tile
            tile *= 2.0 * sqrt_widths[done:done + clen]
            for j in range(clen):
                np.multiply(alpha, 0.5, out=scratch)
                np.sin(scratch, out=scratch)
                scratch *= tile[:, j]
                scratch += drift_per_step[done + j]
                alpha += scratch
            done += clen
        out[lo:hi] = alpha

    run_blocks(n_paths, cfg.block_size, cfg.threads, worker)
    return out


def estimate_gap_direct(params: ModelParams, k: int, n_samples: int, seed: int,
                        cfg: SimConfig = DEFAULT_CONFIG) -> GapEstimate:
    """Direct Monte Carlo estimate of ``E_beta(k; lam)``.

    Mean of the terminal hat weights over independent phase paths; the
    residual bias of the analytic tail is at most
    ``drift_tolerance / (2 pi)`` per path.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k}")
    horizon = params.phase_horizon(cfg.drift_tolerance)
    if horizon == 0.0:
        value = 1.0 if k == 0 else 0.0
        return GapEstimate(value, 0.0, n_samples, "direct", seed,
                           beta=params.beta, lam=params.lam, k=k, dt=cfg.dt)
    alphas = phase_terminals(params, horizon, n_samples, seed, cfg)
    w = hat_weights(alphas, k)
    stderr = float(w.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return GapEstimate(float(w.mean()), stderr, n_samples, "direct", seed,
                       beta=params.beta, lam=params.lam, k=k,
                       dt=cfg.phase_dt(params.lam))


# ---------------------------------------------------------------------------
# coupled family driven by two-dimensional noise
# ---------------------------------------------------------------------------

def _family_step(alpha: np.ndarray, lam_f_dt: np.ndarray, db1, db2) -> np.ndarray:
    # Re((e^{-i alpha} - 1) dZ) with dZ = dB1 + i dB2
    return alpha + lam_f_dt + (np.cos(alpha) - 1.0) * db1 + np.sin(alpha) * db2


def family_terminals(lambda_grid: np.ndarray, beta: float, horizon: float,
                     n_samples: int, seed: int,
                     cfg: SimConfig = DEFAULT_CONFIG,
                     stream_offset: int = 0) -> np.ndarray:
    """Terminal angles of the coupled family, shape ``(n_samples, n_lams)``.

    Each sample is one two-dimensional stream shared by every lambda on
    the grid, so the angles of a sample are pathwise coupled.
    """
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.size == 0 or np.any(np.diff(lams) <= 0) and lams.size > 1:
        raise ConfigurationError("lambda_grid must be nonempty and increasing")
    lam_max = float(lams[-1])
    residual = lam_max * math.exp(-beta * horizon / 4.0)
    if residual > cfg.drift_tolerance * (1.0 + 1e-9) and lam_max > 0:
        raise ConfigurationError(
            f"horizon {horizon:g} leaves residual drift {residual:g}"
        )
    if lam_max == 0.0 or horizon <= 0.0:
        return np.zeros((n_samples, lams.size))
    grid = make_grid(0.0, horizon, cfg.phase_dt(lam_max))
    widths = grid.step_sizes()
    f_vals = speed_f(grid.points()[:-1], beta)
    sqrt_widths = np.sqrt(widths)
    out = np.empty((n_samples, lams.size))

    def worker(lo: int, hi: int) -> None:
        noise = BlockNoise(seed, stream_offset + lo, hi - lo, dimension=2)
        alpha = np.zeros((hi - lo, lams.size))
        done = 0
        while done < grid.n_steps:
            clen = min(cfg.chunk_steps, grid.n_steps - done)
            tile = noise.next_chunk(clen)
            for j in range(clen):
                i = done + j
                lam_f_dt = lams * (f_vals[i] * widths[i])
                db1 = (tile[:, j, 0] * sqrt_widths[i])[:, None]
                db2 = (tile[:, j, 1] * sqrt_widths[i])[:, None]
                alpha = _family_step(alpha, lam_f_dt[None, :], db1, db2)
            done += clen
        out[lo:hi] = alpha

    run_blocks(n_samples, max(cfg.block_size // max(lams.size, 1), 1024),
               cfg.threads, worker)
    return out


def simulate_phase_family(lambda_grid: Sequence[float], beta: float, horizon: float,
                          stream: NoiseStream,
                          cfg: SimConfig = DEFAULT_CONFIG) -> list[PhasePath]:
    """One coupled sample of phase paths, all driven by ``stream`` (dim 2)."""
    if stream.dimension != 2:
        raise ConfigurationError("family simulation needs a dimension-2 stream")
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.size == 0 or (lams.size > 1 and np.any(np.diff(lams) <= 0)):
        raise ConfigurationError("lambda_grid must be nonempty and increasing")
    lam_max = float(lams[-1])
    if lam_max == 0.0:
        grid = make_grid(0.0, max(horizon, cfg.dt), cfg.dt)
        zero = SdePath(grid, np.zeros(grid.n_steps + 1), Alive(0.0))
        return [PhasePath(zero, 0.0, 0.0) for _ in lams]
    residual = lam_max * math.exp(-beta * horizon / 4.0)
    if residual > cfg.drift_tolerance * (1.0 + 1e-9):
        raise ConfigurationError(
            f"horizon {horizon:g} leaves residual drift {residual:g}"
        )
    grid = make_grid(0.0, horizon, cfg.phase_dt(lam_max))
    widths = grid.step_sizes()
    f_vals = speed_f(grid.points()[:-1], beta)
    dW = stream.generator().standard_normal((grid.n_steps, 2)) * np.sqrt(widths)[:, None]
    alpha = np.zeros(lams.size)
    values = np.empty((grid.n_steps + 1, lams.size))
    values[0] = alpha
    for i in range(grid.n_steps):
        alpha = _family_step(alpha, lams * f_vals[i] * widths[i],
                             dW[i, 0], dW[i, 1])
        values[i + 1] = alpha
    paths = []
    for j, lam in enumerate(lams):
        res = lam * math.exp(-beta * horizon / 4.0)
        paths.append(PhasePath(SdePath(grid, values[:, j].copy(),
                                       Alive(float(alpha[j]))), float(lam), res))
    return paths


def sample_sine_beta(lambda_max: float, beta: float, resolution: int, seed: int,
                     cfg: SimConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Sample a point configuration of Sine_beta restricted to ``[0, lambda_max]``.

    Runs the coupled family on a uniform lambda grid and converts count
    increments per cell into points at cell midpoints, so locations are
    resolved only to ``lambda_max / resolution``.
    """
    counts = sine_beta_counts(lambda_max, beta, resolution, seed, 1, cfg)[0]
    return _counts_to_points(lambda_max, resolution, counts)


def sine_beta_counts(lambda_max: float, beta: float, resolution: int, seed: int,
                     n_samples: int, cfg: SimConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Rounded winding counts on the uniform grid, shape ``(n_samples, resolution)``."""
    if resolution < 2:
        raise ConfigurationError(f"resolution must be >= 2, got {resolution}")
    if lambda_max <= 0:
        raise ConfigurationError("lambda_max must be positive")
    lams = lambda_max * np.arange(1, resolution + 1) / resolution
    horizon = ModelParams(beta, lambda_max).phase_horizon(cfg.drift_tolerance)
    alphas = family_terminals(lams, beta, horizon, n_samples, seed, cfg)
    return np.rint(alphas / TWO_PI).astype(int)


def _counts_to_points(lambda_max: float, resolution: int,
                      counts: np.ndarray) -> np.ndarray:
    edges = lambda_max * np.arange(resolution + 1) / resolution
    mids = 0.5 * (edges[:-1] + edges[1:])
    increments = np.diff(np.concatenate([[0], counts]))
    if (increments < 0).any():
        raise InvariantViolationError("winding counts decreased along the grid")
    return np.repeat(mids, increments)
