"""Monte Carlo engine for large-gap asymptotics of the Sine_beta process.

The package estimates the probability of an empty (or k-point) interval
in the bulk point-process limit of beta-ensembles three independent ways:
directly from the phase-function winding, through a Girsanov-tilted
diffusion whose importance weights stay O(1) at large interval lengths,
and via finite-matrix and determinantal oracles. The tilted route also
extracts the constant factor of the gap asymptotics.
"""

from .config import DEFAULT_CONFIG, SimConfig
from .errors import (ConfigurationError, DomainError, InvariantViolationError,
                     NumericalError, SineGapError)
from .logtan import (P1Table, build_p1_table, default_delta, default_p1_grid,
                     default_p1_horizon, estimate_p1, lemma22_bound,
                     logtan_drift, simulate_X, warm_start)
from .oracles import (BtwFit, SpectrumSample, btw_slope_check, bulk_rescale,
                      empirical_gap_prob, known_kappa, sample_tridiagonal_beta,
                      semicircle_cdf, sine_kernel_gap, sturm_count,
                      zeta_prime_minus1)
from .params import ModelParams, drift_mass, speed_f
from .phase import (GapEstimate, PhasePath, estimate_gap_direct, hat_weights,
                    sample_sine_beta, simulate_phase, simulate_phase_family,
                    sine_beta_counts, terminal_weight_k)
from .sde import (Alive, Absorbed, BlownUp, NoiseStream, SdePath, TimeGrid,
                  brownian_increments, euler_step, integrate, make_grid)
from .tilt import (CoupledPaths, GirsanovDecomposition, KappaReport, TiltDrift,
                   G_closed_form, G_direct, c1_drift_default, coupled_triples,
                   estimate_kappa, estimate_p_lambda_IS, eta, eta_over_sinh,
                   eta_sinh_integral, g_equivalence_rms, log_prefactor, omega,
                   phi, psi_terminal_value, simulate_Y, simulate_Z_stationary,
                   u_tilde, z_log_density, z_samples, z_stationary_ppf)

__version__ = "0.1.0"
