"""Winding angles and point counts of the phase representation.

The angle alpha_lam winds up under the decaying drift lam * f(t) and the
state-dependent noise 2 sin(alpha/2); once the drift tail is below
tolerance, alpha/(2 pi) is (up to the analytic absorption weights) the
number of process points in [0, lam]. This script simulates a few paths,
shows the winding, and checks the mean count against the density
1 / (2 pi).
"""

import numpy as np

from sinegap import ModelParams, NoiseStream, sample_sine_beta, simulate_phase
from sinegap.phase import TWO_PI, hat_weights, phase_terminals

params = ModelParams(beta=2.0, lam=4 * np.pi)
horizon = params.phase_horizon(1e-4)

print(f"beta = {params.beta}, lam = {params.lam:.3f} "
      f"(expected count lam / 2 pi = {params.lam / TWO_PI:.2f})")
print(f"horizon {horizon:.1f} leaves residual drift "
      f"{params.residual_drift(horizon):.1e} rad\n")

for sid in range(4):
    path = simulate_phase(params, horizon, NoiseStream(seed=1, stream_id=sid))
    a = path.path.terminal.value
    weights = [float(hat_weights(a, k)) for k in range(5)]
    k_map = int(np.argmax(weights))
    print(f"path {sid}: alpha(horizon) = {a:7.3f} rad "
          f"-> most likely count {k_map} "
          f"(absorption weights {np.round(weights, 3)})")

n = 20_000
alphas = phase_terminals(params, horizon, n, seed=7)
mean_count = alphas.mean() / TWO_PI
se = alphas.std(ddof=1) / np.sqrt(n) / TWO_PI
print(f"\nmean count over {n} paths: {mean_count:.4f} +- {se:.4f} "
      f"(target {params.lam / TWO_PI:.4f})")

pts = sample_sine_beta(params.lam, params.beta, resolution=64, seed=11)
print(f"\none sampled configuration on [0, {params.lam:.2f}] "
      f"(cell width {params.lam / 64:.3f}):")
print(np.round(pts, 2))
