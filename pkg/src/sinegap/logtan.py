"""The log-tan diffusion and the survival-probability table p_1.

``X = log tan(alpha / 4)`` turns the phase SDE into a unit-diffusion
process ``dX = (lam/2) f cosh X dt + (1/2) tanh X dt + dB`` entering from
-infinity. Blow-up of X (classified at ``x_max``) corresponds to the phase
crossing ``2 pi``, i.e. a point of the process; the probability of never
blowing up at ``lam = 1`` is the function ``p_1`` consumed by the
importance sampler.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, SimConfig
from .errors import ConfigurationError, NumericalError
from .params import ModelParams, speed_f
from .sde import (Alive, BlockNoise, BlownUp, NoiseStream, SdePath, make_grid,
                  run_blocks, substep_euler_block)

TWO_PI = 2.0 * math.pi
_OVERFLOW_X = 700.0


def lemma22_bound(x, beta: float):
    """Tail bound ``sqrt(30/beta) * exp(-(beta/60) e^x)`` on ``p_1(x)``.

    Valid with this explicit constant for ``x > 4``; evaluates safely for
    any ``x`` (underflows to 0 for large arguments).
    """
    x = np.asarray(x, dtype=float)
    return math.sqrt(30.0 / beta) * np.exp(-(beta / 60.0) * np.exp(np.minimum(x, _OVERFLOW_X)))


def logtan_drift(t, x, params: ModelParams):
    """Drift ``(lam/2) f(t) cosh x + (1/2) tanh x`` of the X diffusion.

    Arguments beyond the overflow guard (``x > 700``) return ``inf``,
    which downstream classifies as blow-up.
    """
    x = np.asarray(x, dtype=float)
    safe = np.minimum(np.abs(x), _OVERFLOW_X)
    drift = (params.lam / 2.0) * speed_f(t, params.beta) * np.cosh(safe) \
        + 0.5 * np.tanh(x)
    return np.where(np.abs(x) > _OVERFLOW_X, np.inf, drift)


def default_delta(params: ModelParams, cfg: SimConfig = DEFAULT_CONFIG) -> float:
    """Warm-start time spending drift mass ``warm_mass``: ``lam F(delta) = warm_mass``."""
    if params.lam <= cfg.warm_mass:
        raise ConfigurationError(
            f"lambda = {params.lam:g} too small for warm mass {cfg.warm_mass:g}"
        )
    return -(4.0 / params.beta) * math.log1p(-cfg.warm_mass / params.lam)


def warm_start(params: ModelParams, delta: float,
               cfg: SimConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """Deterministic entrance from -infinity.

    For small ``delta`` the diffusion is drift-dominated and the phase is
    ``alpha(delta) ~ lam F(delta)``, so ``X(delta) = log tan(lam F(delta) / 4)``.
    Returns ``(state, time)``. Requires ``lam F(delta) <= warm_mass``.
    """
    mass = params.lam * float(params.F(delta))
    if mass > cfg.warm_mass * (1 + 1e-9):
        raise ConfigurationError(
            f"lam * F(delta) = {mass:g} exceeds warm mass budget {cfg.warm_mass:g}"
        )
    if mass <= 0:
        raise ConfigurationError("warm start needs positive drift mass")
    return math.log(math.tan(mass / 4.0)), delta


def simulate_X(x0: float, params: ModelParams, horizon: float, stream: NoiseStream,
               cfg: SimConfig = DEFAULT_CONFIG) -> SdePath:
    """One path of the X diffusion with blow-up classification.

    ``x0 = -inf`` starts from the warm-start state instead. The path is
    advanced with drift sub-stepping (``|drift| * step <= substep_frac``)
    to avoid Euler overshoot through the cosh wall, and is classified
    ``BlownUp`` on reaching ``x_max``.
    """
    if horizon <= 0:
        raise ConfigurationError("horizon must be positive")
    if math.isinf(x0) and x0 < 0:
        x_start, t_start = warm_start(params, default_delta(params, cfg), cfg)
    else:
        x_start, t_start = float(x0), 0.0
    if t_start >= horizon:
        raise ConfigurationError("warm start time exceeds the horizon")
    grid = make_grid(t_start, horizon, cfg.dt)
    pts, widths = grid.points(), grid.step_sizes()
    dW = stream.generator().standard_normal(grid.n_steps) * np.sqrt(widths)

    def drift_vec(t, x):
        return logtan_drift(t, x, params)

    x = np.array([x_start])
    values = [x_start]
    for i in range(grid.n_steps):
        if not np.isfinite(x[0]):
            raise NumericalError(f"non-finite state at step {i}")
        hit = substep_euler_block(drift_vec, x, pts[i], widths[i],
                                  dW[i:i + 1], cfg.substep_frac,
                                  stop_level=cfg.x_max)
        if not math.isnan(hit[0]):
            return SdePath(grid, np.array(values), BlownUp(float(hit[0])))
        values.append(float(x[0]))
    return SdePath(grid, np.array(values), Alive(float(x[0])))


def survival_weights(x0_per_stream: np.ndarray, beta: float, horizon: float,
                     seed: int, cfg: SimConfig = DEFAULT_CONFIG,
                     antithetic: bool = True, stream_offset: int = 0,
                     t_start: float = 0.0, lam: float = 1.0,
                     return_blown: bool = False):
    """Survival weights of the X diffusion from given starts (default lam = 1).

    One stream per entry of ``x0_per_stream``; with ``antithetic`` each
    stream drives a pair of paths with opposite noise and the result has
    shape ``(n_streams, 2)``, otherwise ``(n_streams,)``. A blown-up path
    contributes 0; an alive path contributes the absorption weight
    ``1 - alpha(horizon) / (2 pi)`` with ``alpha = 4 arctan(e^X)``.
    With ``return_blown`` the blow-up indicators are returned as well.
    """
    x0_per_stream = np.asarray(x0_per_stream, dtype=float)
    n_streams = x0_per_stream.shape[0]
    grid = make_grid(t_start, horizon, cfg.dt)
    pts, widths = grid.points(), grid.step_sizes()
    sqrt_widths = np.sqrt(widths)
    f_half = 0.5 * lam * speed_f(pts[:-1], beta)
    n_branch = 2 if antithetic else 1
    out = np.zeros((n_streams, n_branch))
    blown_out = np.zeros((n_streams, n_branch), dtype=bool)
    frac, x_max = cfg.substep_frac, cfg.x_max
    quarter_beta = 0.25 * beta
    half_lam = 0.5 * lam

    def drift_vec(t, x):
        # lean drift for the sub-stepper; state stays in
        # [warm start, x_max + 2] so no overflow guard is needed
        return (half_lam * quarter_beta * np.exp(-quarter_beta * t) * np.cosh(x)
                + 0.5 * np.tanh(x))

    def worker(lo: int, hi: int) -> None:
        nb = hi - lo
        noise = BlockNoise(seed, stream_offset + lo, nb)
        states = [x0_per_stream[lo:hi].copy() for _ in range(n_branch)]
        alive = [np.ones(nb, dtype=bool) for _ in range(n_branch)]
        drift = np.empty(nb)
        scratch = np.empty(nb)
        stiff = np.empty(nb, dtype=bool)
        moved = np.empty(nb, dtype=bool)
        done = 0
        while done < grid.n_steps:
            if not any(a.any() for a in alive):
                break
            clen = min(cfg.chunk_steps, grid.n_steps - done)
            tile = noise.next_chunk(clen)
            tile *= sqrt_widths[done:done + clen]
            for j in range(clen):
                i = done + j
                wi = widths[i]
                dw = tile[:, j]
                for b in range(n_branch):
                    live = alive[b]
                    if not live.any():
                        continue
                    x = states[b]
                    np.cosh(x, out=drift)
                    drift *= f_half[i]
                    np.tanh(x, out=scratch)
                    scratch *= 0.5
                    drift += scratch
                    np.abs(drift, out=scratch)
                    np.greater(scratch, frac / wi, out=stiff)
                    stiff &= live
                    if stiff.any():
                        idx = np.flatnonzero(stiff)
                        xs = x[idx].copy()
                        signed_sub = dw[idx] if b == 0 else -dw[idx]
                        substep_euler_block(drift_vec, xs, pts[i], wi,
                                            signed_sub, frac,
                                            stop_level=x_max)
                        x[idx] = xs
                    drift *= wi
                    if b == 0:
                        drift += dw
                    else:
                        drift -= dw
                    np.invert(stiff, out=moved)
                    moved &= live
                    drift += x
                    np.copyto(x, drift, where=moved)
                    np.less(x, x_max, out=moved)
                    live &= moved
            done += clen
        for b in range(n_branch):
            a = 4.0 * np.arctan(np.exp(states[b]))
            w = np.clip(1.0 - a / TWO_PI, 0.0, 1.0)
            out[lo:hi, b] = np.where(alive[b], w, 0.0)
            blown_out[lo:hi, b] = ~alive[b]

    run_blocks(n_streams, cfg.block_size, cfg.threads, worker)
    weights = out if antithetic else out[:, 0]
    if return_blown:
        return weights, (blown_out if antithetic else blown_out[:, 0])
    return weights


def coupled_X_pairs(x0_low: float, x0_high: float, params: ModelParams,
                    horizon: float, n_pairs: int, seed: int,
                    cfg: SimConfig = DEFAULT_CONFIG) -> dict:
    """Shared-noise X pairs started from two ordered initial conditions.

    Returns the number of ordering violations (low path strictly above the
    high path while both are below the blow-up level) together with the
    worst margin, exercising the monotone coupling of the one-dimensional
    dynamics.
    """
    if x0_low >= x0_high:
        raise ConfigurationError("x0_low must be below x0_high")
    grid = make_grid(0.0, horizon, cfg.dt)
    pts, widths = grid.points(), grid.step_sizes()
    sqrt_widths = np.sqrt(widths)
    lam_quarter = 0.5 * params.lam * 0.25 * params.beta
    quarter_beta = 0.25 * params.beta

    def drift_vec(t, x):
        return (lam_quarter * np.exp(-quarter_beta * t) * np.cosh(x)
                + 0.5 * np.tanh(x))

    violations = 0
    worst = -np.inf
    lo_states = np.full(n_pairs, float(x0_low))
    hi_states = np.full(n_pairs, float(x0_high))
    both_alive = np.ones(n_pairs, dtype=bool)
    noise = BlockNoise(seed, 0, n_pairs)
    done = 0
    while done < grid.n_steps and both_alive.any():
        clen = min(cfg.chunk_steps, grid.n_steps - done)
        tile = noise.next_chunk(clen)
        tile *= sqrt_widths[done:done + clen]
        for j in range(clen):
            i = done + j
            dw = tile[:, j]
            for states in (lo_states, hi_states):
                substep_euler_block(drift_vec, states, pts[i], widths[i],
                                    dw, cfg.substep_frac, active=both_alive,
                                    stop_level=cfg.x_max)
            both_alive &= (lo_states < cfg.x_max) & (hi_states < cfg.x_max)
            gap = np.where(both_alive, lo_states - hi_states, -np.inf)
            step_worst = float(gap.max()) if n_pairs else -np.inf
            worst = max(worst, step_worst)
            violations += int(np.count_nonzero(gap > 0.0))
        done += clen
    return {"violations": violations, "worst_margin": worst,
            "pairs": n_pairs, "steps": grid.n_steps}


def alpha_survival_weights(alpha0_per_stream: np.ndarray, beta: float,
                           horizon: float, seed: int,
                           cfg: SimConfig = DEFAULT_CONFIG,
                           antithetic: bool = True, stream_offset: int = 0,
                           t_start: float = 0.0, lam: float = 1.0) -> np.ndarray:
    """Survival weights computed in the phase coordinate.

    Identical in law to the X-coordinate route (blow-up of X is the phase
    reaching ``2 pi``), but the phase SDE has bounded coefficients, so the
    Euler weak-error constant is far smaller; against the exact
    determinant at beta = 2 this route is unbiased at the default step
    where the X route shows a few-tenths-percent deficit. Absorption at
    ``2 pi`` is sticky: the true process is monotone at multiples of
    ``2 pi``, so a discrete crossing kills the path for good.
    """
    alpha0 = np.asarray(alpha0_per_stream, dtype=float)
    n_streams = alpha0.shape[0]
    grid = make_grid(t_start, horizon, cfg.dt)
    pts, widths = grid.points(), grid.step_sizes()
    sqrt_widths = np.sqrt(widths)
    drift_per_step = lam * speed_f(pts[:-1], beta) * widths
    n_branch = 2 if antithetic else 1
    out = np.zeros((n_streams, n_branch))

    def worker(lo: int, hi: int) -> None:
        nb = hi - lo
        noise = BlockNoise(seed, stream_offset + lo, nb)
        states = [alpha0[lo:hi].copy() for _ in range(n_branch)]
        alive = [np.ones(nb, dtype=bool) for _ in range(n_branch)]
        scratch = np.empty(nb)
        moved = np.empty(nb, dtype=bool)
        done = 0
        while done < grid.n_steps:
            if not any(a.any() for a in alive):
                break
            clen = min(cfg.chunk_steps, grid.n_steps - done)
            tile = noise.next_chunk(clen)
            tile *= 2.0 * sqrt_widths[done:done + clen]
            for j in range(clen):
                i = done + j
                dw = tile[:, j]
                for b in range(n_branch):
                    live = alive[b]
                    if not live.any():
                        continue
                    a = states[b]
                    np.multiply(a, 0.5, out=scratch)
                    np.sin(scratch, out=scratch)
                    if b == 0:
                        scratch *= dw
                    else:
                        scratch *= -dw
                    scratch += drift_per_step[i]
                    scratch += a
                    np.copyto(a, scratch, where=live)
                    np.less(a, TWO_PI, out=moved)
                    live &= moved
            done += clen
        for b in range(n_branch):
            w = np.clip(1.0 - states[b] / TWO_PI, 0.0, 1.0)
            out[lo:hi, b] = np.where(alive[b], w, 0.0)

    run_blocks(n_streams, cfg.block_size, cfg.threads, worker)
    return out if antithetic else out[:, 0]


def _check_p1_horizon(beta: float, horizon: float, cfg: SimConfig) -> None:
    tail = math.exp(-beta * horizon / 4.0)
    if tail > cfg.p1_tail_tolerance:
        needed = (4.0 / beta) * math.log(1.0 / cfg.p1_tail_tolerance)
        raise ConfigurationError(
            f"horizon {horizon:g} leaves drift tail {tail:g} > "
            f"{cfg.p1_tail_tolerance:g}; need >= {needed:g}"
        )


def default_p1_horizon(beta: float, cfg: SimConfig = DEFAULT_CONFIG) -> float:
    return (4.0 / beta) * math.log(1.0 / cfg.p1_tail_tolerance)


def estimate_p1(x: float, beta: float, n_samples: int, horizon: float, seed: int,
                cfg: SimConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """Monte Carlo estimate of ``p_1(x)`` with standard error.

    ``x = -inf`` uses the warm start, realising ``p_1(-inf) = p_lam`` at
    ``lam = 1``. With antithetic pairing enabled, ``n_samples`` must be
    even and the standard error is computed over pair means.
    """
    _check_p1_horizon(beta, horizon, cfg)
    t_start = 0.0
    if math.isinf(x) and x < 0:
        # the warm start is exact in the phase coordinate: alpha(delta)
        # carries the accumulated drift mass
        params = ModelParams(beta, 1.0)
        delta = default_delta(params, cfg)
        alpha0 = float(params.F(delta))
        t_start = delta
    else:
        alpha0 = 4.0 * math.atan(math.exp(x))
    antithetic = cfg.antithetic_p1
    if antithetic:
        if n_samples % 2:
            raise ConfigurationError("antithetic estimation needs even n_samples")
        n_streams = n_samples // 2
    else:
        n_streams = n_samples
    w = alpha_survival_weights(np.full(n_streams, alpha0), beta, horizon, seed,
                               cfg, antithetic=antithetic, t_start=t_start)
    if antithetic:
        pair_means = w.mean(axis=1)
        value = float(pair_means.mean())
        stderr = float(pair_means.std(ddof=1) / math.sqrt(n_streams)) if n_streams > 1 else 0.0
    else:
        value = float(w.mean())
        stderr = float(w.std(ddof=1) / math.sqrt(n_streams)) if n_streams > 1 else 0.0
    return value, stderr


# ---------------------------------------------------------------------------
# the p_1 table
# ---------------------------------------------------------------------------

def pava_nonincreasing(y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted isotonic regression onto nonincreasing sequences (PAVA)."""
    values, wsum, counts = [], [], []
    for yi, wi in zip(-np.asarray(y, float), np.asarray(weights, float)):
        cv, cw, cn = float(yi), float(wi), 1
        while values and values[-1] > cv:
            pv, pw, pn = values.pop(), wsum.pop(), counts.pop()
            cv = (pv * pw + cv * cw) / (pw + cw)
            cw += pw
            cn += pn
        values.append(cv)
        wsum.append(cw)
        counts.append(cn)
    return -np.repeat(values, counts)


@dataclass
class P1Table:
    """Tabulated ``p_1`` with monotone interpolation and tail extrapolation.

    Queries inside the grid interpolate the isotonic-regressed values with
    a monotone cubic (PCHIP); plain chords systematically undershoot the
    concave stretch of the curve by O(step^2), a bias large enough to
    show up in the importance sampler, while the monotone cubic stays
    within the neighbouring values. Below the grid the left-end value is
    used (the function is flat there to Monte Carlo accuracy); above the
    grid the explicit tail bound capped by the last grid value is used.
    """

    beta: float
    x_grid: np.ndarray
    raw_values: np.ndarray
    p1_values: np.ndarray
    stderrs: np.ndarray
    n_per_point: int
    horizon: float
    dt: float
    seed: int
    interpolation: str = "monotone-pchip"
    schema_version: int = 1

    def _interpolant(self):
        if getattr(self, "_interp_cache", None) is None:
            if self.interpolation == "monotone-linear":
                self._interp_cache = lambda x: np.interp(x, self.x_grid,
                                                         self.p1_values)
            elif self.interpolation == "monotone-pchip":
                from scipy.interpolate import PchipInterpolator
                self._interp_cache = PchipInterpolator(self.x_grid,
                                                       self.p1_values)
            else:
                raise ConfigurationError(
                    f"unknown interpolation rule {self.interpolation!r}"
                )
        return self._interp_cache

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = self._interpolant()(np.clip(x, self.x_grid[0], self.x_grid[-1]))
        above = np.minimum(lemma22_bound(x, self.beta), self.p1_values[-1])
        out = np.where(x < self.x_grid[0], self.p1_values[0],
                       np.where(x > self.x_grid[-1], above, inside))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "beta": self.beta,
            "horizon": self.horizon,
            "dt": self.dt,
            "x_grid": self.x_grid.tolist(),
            "raw_values": self.raw_values.tolist(),
            "regressed_values": self.p1_values.tolist(),
            "stderrs": self.stderrs.tolist(),
            "n_per_point": self.n_per_point,
            "seed": self.seed,
            "interpolation": self.interpolation,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "P1Table":
        if d.get("schema_version") != 1:
            raise ConfigurationError(
                f"unsupported p1 table schema {d.get('schema_version')!r}"
            )
        return cls(
            beta=float(d["beta"]),
            x_grid=np.asarray(d["x_grid"], dtype=float),
            raw_values=np.asarray(d["raw_values"], dtype=float),
            p1_values=np.asarray(d["regressed_values"], dtype=float),
            stderrs=np.asarray(d["stderrs"], dtype=float),
            n_per_point=int(d["n_per_point"]),
            horizon=float(d["horizon"]),
            dt=float(d["dt"]),
            seed=int(d["seed"]),
            interpolation=str(d["interpolation"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=1)

    @classmethod
    def load(cls, path) -> "P1Table":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def default_p1_grid() -> np.ndarray:
    """Default table grid: -8 to 6 in steps of 0.5."""
    return np.arange(-8.0, 6.0 + 0.25, 0.5)


def build_p1_table(x_grid: np.ndarray, beta: float, n_per_point: int,
                   horizon: float, seed: int,
                   cfg: SimConfig = DEFAULT_CONFIG) -> P1Table:
    """Estimate ``p_1`` on a grid and regress it onto nonincreasing values.

    Streams are keyed by the flattened (grid point, pair) index, so the
    table is reproducible and parallelises over both axes.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.size < 2 or np.any(np.diff(x_grid) <= 0):
        raise ConfigurationError("x_grid must be increasing")
    if x_grid[0] > -8.0 or x_grid[-1] < 6.0:
        raise ConfigurationError("x_grid must cover at least [-8, 6]")
    _check_p1_horizon(beta, horizon, cfg)
    antithetic = cfg.antithetic_p1
    if antithetic and n_per_point % 2:
        raise ConfigurationError("antithetic estimation needs even n_per_point")
    per = n_per_point // 2 if antithetic else n_per_point
    starts = 4.0 * np.arctan(np.exp(np.repeat(x_grid, per)))
    w = alpha_survival_weights(starts, beta, horizon, seed, cfg,
                               antithetic=antithetic)
    raw = np.empty(x_grid.size)
    errs = np.empty(x_grid.size)
    for i in range(x_grid.size):
        wi = w[i * per:(i + 1) * per]
        samples = wi.mean(axis=1) if antithetic else wi
        raw[i] = samples.mean()
        errs[i] = samples.std(ddof=1) / math.sqrt(per) if per > 1 else 0.0
    weights = 1.0 / np.maximum(errs, 1e-12) ** 2
    regressed = pava_nonincreasing(raw, weights)
    regressed = np.clip(regressed, 0.0, 1.0)
    return P1Table(beta=beta, x_grid=x_grid, raw_values=raw, p1_values=regressed,
                   stderrs=errs, n_per_point=n_per_point, horizon=horizon,
                   dt=cfg.dt, seed=seed)
