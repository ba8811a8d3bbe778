"""The survival probability p_1 of the log-tan diffusion.

p_1(x) is the probability that the unit-interval diffusion started at x
never blows up. It feeds the importance sampler through a tabulation
over a grid of starting points, isotonic regression, and monotone
interpolation. The left end realises the entrance from -infinity (and
equals the lam = 1 gap probability); beyond x = 4 the explicit
double-exponential tail bound applies.
"""

import numpy as np

from sinegap import (build_p1_table, default_p1_grid, default_p1_horizon,
                     estimate_p1, lemma22_bound, sine_kernel_gap)

beta = 2.0
horizon = default_p1_horizon(beta)

table = build_p1_table(default_p1_grid(), beta, n_per_point=2000,
                       horizon=horizon, seed=5)
print(f"p1 table for beta = {beta}: {len(table.x_grid)} grid points, "
      f"{table.n_per_point} paths each, horizon {horizon:.1f}\n")
print("   x     p1(x)    stderr   tail bound (x > 4)")
for x, v, se in zip(table.x_grid, table.p1_values, table.stderrs):
    bound = f"{lemma22_bound(x, beta):10.2e}" if x > 4 else "          "
    print(f"{x:5.1f}  {v:8.4f}  {se:8.4f} {bound}")

v_inf, se_inf = estimate_p1(float("-inf"), beta, 20_000, horizon, seed=6)
fred = sine_kernel_gap(1.0)
print(f"\nentrance value p1(-inf) = {v_inf:.5f} +- {se_inf:.5f}")
print(f"Fredholm E_2(0; 1)      = {fred:.5f}  "
      f"({abs(v_inf - fred) / se_inf:.1f} sigma apart)")

queries = np.array([-9.0, -3.25, 0.1, 5.7, 8.0])
print(f"\ninterpolated queries at {queries}: {np.round(table(queries), 5)}")
