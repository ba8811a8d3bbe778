"""Deterministic building blocks for SDE path simulation.

Time grids, counter-based Brownian increment streams, a fixed-step
Euler-Maruyama integrator with state-dependent stopping, and the
block/chunk machinery the vectorised estimators are built on.

Every operation here is a pure function of ``(seed, stream_id, grid,
parameters)``: repeated invocation is bit-identical, and distinct
stream ids give independent noise regardless of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, NumericalError

_GRID_EPS = 1e-9


# ---------------------------------------------------------------------------
# time grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[t_start, t_end]`` with one possibly shortened final step.

    Interior steps all equal ``dt``; if ``(t_end - t_start) / dt`` is not
    integral the last step is shortened rather than stretching ``dt``, so
    grid point ``i < n_steps`` is exactly ``t_start + i * dt``.
    """

    t_start: float
    t_end: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > self.t_start):
            raise ConfigurationError(
                f"t_end must exceed t_start, got [{self.t_start}, {self.t_end}]"
            )

    def points(self) -> np.ndarray:
        """All ``n_steps + 1`` grid points, last one exactly ``t_end``."""
        pts = self.t_start + self.dt * np.arange(self.n_steps + 1)
        pts[-1] = self.t_end
        return pts

    def step_sizes(self) -> np.ndarray:
        """Per-step widths; all ``dt`` except possibly the last."""
        pts = self.points()
        return np.diff(pts)


def make_grid(t_start: float, t_end: float, dt: float) -> TimeGrid:
    """Build a :class:`TimeGrid`, shortening only the final step."""
    if not (dt > 0):
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if not (t_end > t_start):
        raise ConfigurationError(f"empty grid [{t_start}, {t_end}]")
    span = t_end - t_start
    n_full = int(math.floor(span / dt + _GRID_EPS))
    remainder = span - n_full * dt
    n_steps = n_full + (1 if remainder > _GRID_EPS * max(1.0, span) else 0)
    n_steps = max(n_steps, 1)
    return TimeGrid(t_start=t_start, t_end=t_end, dt=dt, n_steps=n_steps)


# ---------------------------------------------------------------------------
# noise streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseStream:
    """Counter-based noise stream keyed by ``(seed, stream_id)``.

    The pair is used directly as a Philox key, so streams with distinct
    ids are independent and reproducible independently of scheduling.
    ``dimension`` is 1 for scalar noise, 2 for the complex noise driving
    the coupled phase family.
    """

    seed: int
    stream_id: int = 0
    dimension: int = 1

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigurationError(f"dimension must be 1 or 2, got {self.dimension}")
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ConfigurationError(f"{name} must fit in 64 bits, got {v}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(stream: NoiseStream, grid: TimeGrid) -> np.ndarray:
    """Brownian increments over the grid steps for one stream.

    Returns shape ``(n_steps,)`` for dimension 1 and ``(n_steps, 2)`` for
    dimension 2; each component of step ``i`` has variance ``step_sizes[i]``.
    Deterministic function of ``(stream, grid)``.
    """
    steps = grid.step_sizes()
    gen = stream.generator()
    if stream.dimension == 1:
        z = gen.standard_normal(grid.n_steps)
        return z * np.sqrt(steps)
    z = gen.standard_normal((grid.n_steps, 2))
    return z * np.sqrt(steps)[:, None]


# ---------------------------------------------------------------------------
# paths and terminals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alive:
    value: float


@dataclass(frozen=True)
class BlownUp:
    time: float


@dataclass(frozen=True)
class Absorbed:
    level: float
    time: float


Terminal = Union[Alive, BlownUp, Absorbed]


@dataclass(frozen=True)
class SdePath:
    """Discretised trajectory with terminal classification.

    ``values`` holds one state per retained grid point; a path that blew
    up or was absorbed is truncated at the step where the event fired.
    """

    grid: TimeGrid
    values: np.ndarray
    terminal: Terminal

    def times(self) -> np.ndarray:
        return self.grid.points()[: len(self.values)]


# ---------------------------------------------------------------------------
# Euler-Maruyama
# ---------------------------------------------------------------------------

def euler_step(state: float, drift_value: float, diffusion_value: float,
               dW: float, dt: float) -> float:
    """One explicit step ``state + drift * dt + diffusion * dW``."""
    if not (dt > 0):
        raise ConfigurationError(f"dt must be positive, got {dt}")
    for name, v in (("state", state), ("drift_value", drift_value),
                    ("diffusion_value", diffusion_value), ("dW", dW)):
        if not math.isfinite(v):
            raise NumericalError(f"non-finite {name} in euler_step: {v}")
    return state + drift_value * dt + diffusion_value * dW


def integrate(drift: Callable[[float, float], float],
              diffusion: Callable[[float, float], float],
              x0: float,
              grid: TimeGrid,
              stream: NoiseStream,
              stop_rule: Optional[Callable[[float, float], Optional[Terminal]]] = None,
              increments: Optional[np.ndarray] = None) -> SdePath:
    """Fixed-step Euler-Maruyama path with optional stopping.

    ``stop_rule(t, x)`` is consulted after each step; returning a
    :class:`Terminal` ends the path with that tag (values after the event
    are not retained). ``increments`` overrides the stream-drawn noise,
    which is how tests couple paths across resolutions.

    Raises :class:`NumericalError` if the state leaves the finite range
    without the stop rule firing.
    """
    dW = brownian_increments(stream, grid) if increments is None else increments
    if len(dW) != grid.n_steps:
        raise ConfigurationError(
            f"increments length {len(dW)} does not match grid n_steps {grid.n_steps}"
        )
    pts = grid.points()
    steps = grid.step_sizes()
    values = [float(x0)]
    x = float(x0)
    for i in range(grid.n_steps):
        t = pts[i]
        x = x + drift(t, x) * steps[i] + diffusion(t, x) * float(dW[i])
        t_next = pts[i + 1]
        if stop_rule is not None:
            terminal = stop_rule(t_next, x)
            if terminal is not None:
                return SdePath(grid=grid, values=np.array(values), terminal=terminal)
        if not math.isfinite(x):
            raise NumericalError(f"non-finite state at step {i} (t={t_next:g})")
        values.append(x)
    return SdePath(grid=grid, values=np.array(values), terminal=Alive(x))


# ---------------------------------------------------------------------------
# block engine internals
# ---------------------------------------------------------------------------

def path_blocks(n_paths: int, block_size: int) -> Iterator[tuple[int, int]]:
    """Fixed partition of ``range(n_paths)`` into blocks.

    The partition depends only on ``block_size`` (a configuration
    constant), never on worker count, keeping reductions deterministic.
    """
    lo = 0
    while lo < n_paths:
        hi = min(lo + block_size, n_paths)
        yield lo, hi
        lo = hi


class BlockNoise:
    """Chunked access to the per-path noise rows of one block.

    Row ``r`` of every chunk continues the stream ``(seed, id0 + r)``
    exactly where the previous chunk stopped, so a path's concatenated
    noise equals a single long draw from its own generator.
    """

    def __init__(self, seed: int, id0: int, n_rows: int, dimension: int = 1):
        self._gens = [
            NoiseStream(seed, id0 + r, dimension).generator() for r in range(n_rows)
        ]
        self.dimension = dimension
        self.n_rows = n_rows

    def next_chunk(self, n_cols: int) -> np.ndarray:
        """Standard-normal tile, shape ``(n_rows, n_cols[, dim])``, path-major.

        Step ``j`` of the chunk is the column ``tile[:, j]``.
        """
        if self.dimension == 1:
            tile = np.empty((self.n_rows, n_cols))
            for r, g in enumerate(self._gens):
                tile[r] = g.standard_normal(n_cols)
            return tile
        tile = np.empty((self.n_rows, n_cols, 2))
        for r, g in enumerate(self._gens):
            tile[r] = g.standard_normal((n_cols, 2))
        return tile


def run_blocks(n_paths: int, block_size: int, threads: int,
               worker: Callable[[int, int], None]) -> None:
    """Run ``worker(lo, hi)`` over the fixed block partition.

    Workers write to disjoint output slices; with ``threads > 1`` they run
    in a thread pool. Block boundaries and per-block arithmetic are
    unchanged by the thread count, so results are too.
    """
    blocks = list(path_blocks(n_paths, block_size))
    if threads <= 1 or len(blocks) <= 1:
        for lo, hi in blocks:
            worker(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, lo, hi) for lo, hi in blocks]
        for fut in futures:
            fut.result()


def substep_euler_block(drift_vec: Callable[[np.ndarray, np.ndarray], np.ndarray],
                        x: np.ndarray,
                        t0: float,
                        step: float,
                        noise: np.ndarray,
                        substep_frac: float,
                        active: Optional[np.ndarray] = None,
                        stop_level: Optional[float] = None) -> Optional[np.ndarray]:
    """Advance a state block by one base step with drift sub-stepping.

    Paths where ``|drift| * step`` exceeds ``substep_frac`` are advanced in
    refined sub-steps of size ``substep_frac / |drift|``; the base step's
    Brownian increment is spread linearly across sub-steps (its conditional
    mean path), so noise consumption per base step is one draw per path
    regardless of refinement. Near ``stop_level`` (inside the band where
    the cosh-wall drifts of this package make a crossing certain to
    double precision) the sub-step cap is relaxed so the crossing is not
    crawled through at full resolution. Mutates ``x`` in place.

    Returns the vector of event times for paths that crossed
    ``stop_level`` during this step (NaN where no event), or None when no
    stop level is given.
    """
    n = x.shape[0]
    hit_time = None
    if stop_level is not None:
        hit_time = np.full(n, np.nan)

    if active is None:
        remaining = np.full(n, step)
    else:
        remaining = np.where(active, step, 0.0)
    live = remaining > 0
    # fast path: one plain Euler step if no path needs refinement
    if live.any():
        d_all = drift_vec(t0, x)
        if not (np.abs(d_all[live]) * step > substep_frac).any():
            x_new = x + d_all * step + noise
            x[live] = x_new[live]
            if stop_level is not None:
                crossed = live & (x >= stop_level)
                hit_time[crossed] = t0 + step
            return hit_time
    inv_step = 1.0 / step
    iterations = 0
    while live.any():
        iterations += 1
        if iterations > 100_000:
            raise NumericalError(
                f"sub-stepping failed to terminate at t={t0:g}; drift is "
                "growing without a stop level"
            )
        t_now = t0 + (step - remaining)
        d = drift_vec(t_now, x)
        bad = live & ~np.isfinite(d)
        if bad.any():
            raise NumericalError(
                f"non-finite drift for {int(bad.sum())} paths at t={t0:g}"
            )
        cap = substep_frac / np.maximum(np.abs(d), 1e-300)
        if stop_level is not None:
            cap = np.where(x > stop_level - 13.0, 8.0 * cap, cap)
        h = np.where(live, np.minimum(remaining, cap), 0.0)
        x += d * h + noise * (h * inv_step)
        remaining = remaining - h
        if stop_level is not None:
            crossed = live & (x >= stop_level)
            if crossed.any():
                hit_time[crossed] = t0 + (step - remaining[crossed])
                remaining[crossed] = 0.0
        live = remaining > 0
    return hit_time
