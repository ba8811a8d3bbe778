import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinegap import (Alive, BlownUp, NoiseStream, brownian_increments,
                     euler_step, integrate, make_grid)
from sinegap.errors import ConfigurationError, NumericalError
from sinegap.sde import BlockNoise, substep_euler_block


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@given(st.floats(-5, 5), st.floats(1e-4, 2.0), st.integers(1, 500))
@settings(max_examples=200, deadline=None)
def test_grid_points_reconstruct_exactly(t0, dt, n):
    grid = make_grid(t0, t0 + n * dt, dt)
    pts = grid.points()
    assert pts[0] == t0
    for i in range(min(grid.n_steps, 20)):
        assert pts[i] == t0 + i * dt
    assert np.all(np.diff(pts) > 0)


def test_grid_shortened_final_step():
    grid = make_grid(0.0, 1.05, 0.1)
    assert grid.n_steps == 11
    widths = grid.step_sizes()
    assert np.allclose(widths[:-1], 0.1)
    assert widths[-1] == pytest.approx(0.05)
    assert grid.points()[-1] == 1.05


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        make_grid(0.0, 1.0, -0.1)
    with pytest.raises(ConfigurationError):
        make_grid(1.0, 1.0, 0.1)


# ---------------------------------------------------------------------------
# noise streams
# ---------------------------------------------------------------------------

def test_increments_deterministic():
    grid = make_grid(0.0, 0.4, 0.1)
    a = brownian_increments(NoiseStream(7, 0), grid)
    b = brownian_increments(NoiseStream(7, 0), grid)
    assert np.array_equal(a, b)
    assert len(a) == 4


def test_increment_variance_matches_dt():
    grid = make_grid(0.0, 10_000.0, 0.01)
    inc = brownian_increments(NoiseStream(3, 5), grid)
    assert len(inc) == 1_000_000
    # chi-square: sample variance of 1e6 normals is within 1% relative
    assert inc.var() == pytest.approx(0.01, rel=0.01)
    assert abs(inc.mean()) < 4 * 0.1 / 1000


def test_streams_independent():
    grid = make_grid(0.0, 100.0, 1e-3)
    a = brownian_increments(NoiseStream(7, 0), grid)
    b = brownian_increments(NoiseStream(7, 1), grid)
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 0.01


def test_two_dimensional_stream():
    grid = make_grid(0.0, 50.0, 1e-2)
    inc = brownian_increments(NoiseStream(11, 2, dimension=2), grid)
    assert inc.shape == (5000, 2)
    assert inc[:, 0].var() == pytest.approx(1e-2, rel=0.1)
    cross = np.corrcoef(inc[:, 0], inc[:, 1])[0, 1]
    assert abs(cross) < 0.05


def test_stream_validation():
    with pytest.raises(ConfigurationError):
        NoiseStream(1, 0, dimension=3)
    with pytest.raises(ConfigurationError):
        NoiseStream(-1, 0)


def test_block_noise_matches_per_stream_draws():
    noise = BlockNoise(seed=9, id0=4, n_rows=3)
    tile1 = noise.next_chunk(100)
    tile2 = noise.next_chunk(50)
    for r in range(3):
        gen = NoiseStream(9, 4 + r).generator()
        full = gen.standard_normal(150)
        assert np.array_equal(np.concatenate([tile1[r], tile2[r]]), full)


# ---------------------------------------------------------------------------
# euler stepping
# ---------------------------------------------------------------------------

def test_euler_step_examples():
    assert euler_step(0.0, 1.0, 0.0, 123.0, 0.5) == 0.5
    assert euler_step(2.0, 0.0, 1.0, 0.3, 0.1) == pytest.approx(2.3)
    assert euler_step(1.0, -1.0, 2.0, -0.2, 0.25) == pytest.approx(0.35)


def test_euler_step_errors():
    with pytest.raises(ConfigurationError):
        euler_step(0.0, 1.0, 1.0, 0.0, -0.1)
    with pytest.raises(NumericalError, match="drift"):
        euler_step(0.0, math.nan, 1.0, 0.0, 0.1)


def test_integrate_constant():
    grid = make_grid(0.0, 1.0, 0.1)
    path = integrate(lambda t, x: 0.0, lambda t, x: 0.0, 3.0, grid,
                     NoiseStream(1, 0))
    assert isinstance(path.terminal, Alive)
    assert path.terminal.value == 3.0
    assert np.all(path.values == 3.0)


def test_integrate_ou_stationary_variance():
    # OU dX = -X dt + dW has stationary variance 1/2 (closed form)
    grid = make_grid(0.0, 200.0, 0.01)
    tail = []
    for sid in range(20):
        path = integrate(lambda t, x: -x, lambda t, x: 1.0, 0.0, grid,
                         NoiseStream(77, sid))
        tail.append(path.values[5000:])
    var = np.concatenate(tail).var()
    assert var == pytest.approx(0.5, rel=0.05)


def test_integrate_stop_rule_ramp():
    grid = make_grid(0.0, 1.0, 0.01)
    path = integrate(lambda t, x: 100.0, lambda t, x: 0.0, 0.0, grid,
                     NoiseStream(1, 0),
                     stop_rule=lambda t, x: BlownUp(t) if x >= 10.0 else None)
    assert isinstance(path.terminal, BlownUp)
    assert path.terminal.time == pytest.approx(0.1, abs=0.011)


def test_integrate_increment_override_and_mismatch():
    grid = make_grid(0.0, 1.0, 0.25)
    inc = np.array([0.1, -0.2, 0.3, 0.05])
    path = integrate(lambda t, x: 0.0, lambda t, x: 1.0, 0.0, grid,
                     NoiseStream(0, 0), increments=inc)
    assert path.terminal.value == pytest.approx(inc.sum())
    with pytest.raises(ConfigurationError):
        integrate(lambda t, x: 0.0, lambda t, x: 1.0, 0.0, grid,
                  NoiseStream(0, 0), increments=inc[:2])


def test_strong_order_against_exact_ou():
    # Euler endpoints converge to the exactly sampled OU endpoint as dt
    # halves; the error is O(sqrt(dt)) or better (additive noise)
    horizon, base_dt = 4.0, 0.02
    errs = {}
    for level, dt in enumerate((base_dt, base_dt / 2)):
        grid = make_grid(0.0, horizon, dt)
        diffs = []
        for sid in range(60):
            fine = brownian_increments(NoiseStream(5, sid),
                                       make_grid(0.0, horizon, base_dt / 2))
            inc = fine if level == 1 else fine.reshape(-1, 2).sum(axis=1)
            path = integrate(lambda t, x: -x, lambda t, x: 1.0, 1.0, grid,
                             NoiseStream(5, sid), increments=inc)
            # exact transition: X' = X e^{-dt} + sqrt((1-e^{-2dt})/2) * xi
            x = 1.0
            for dw in inc:
                xi = dw / math.sqrt(dt)
                x = x * math.exp(-dt) + math.sqrt((1 - math.exp(-2 * dt)) / 2) * xi
            diffs.append(path.terminal.value - x)
        errs[level] = float(np.sqrt(np.mean(np.square(diffs))))
    assert errs[0] < 0.05
    assert errs[0] / errs[1] > 1.3


def test_substep_conserves_drift_and_noise_for_constant_drift():
    # constant drift: refinement must reproduce x + D dt + dW exactly
    x = np.array([0.0, 1.0])
    noise = np.array([0.3, -0.2])
    substep_euler_block(lambda t, y: np.full_like(y, 50.0), x, 0.0, 0.1,
                        noise, substep_frac=0.25)
    assert np.allclose(x, np.array([0.0, 1.0]) + 50.0 * 0.1 + noise, atol=1e-12)


def test_substep_hit_time():
    x = np.array([0.0])
    hit = substep_euler_block(lambda t, y: np.full_like(y, 100.0), x, 0.0, 0.2,
                              np.array([0.0]), substep_frac=0.25,
                              stop_level=10.0)
    assert hit is not None
    assert hit[0] == pytest.approx(0.1, abs=0.02)
