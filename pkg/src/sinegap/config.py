"""Simulation configuration with the package-wide default tolerances."""

from __future__ import annotations

from dataclasses import dataclass, replace, asdict


@dataclass(frozen=True)
class SimConfig:
    """Knobs shared by the path simulators and estimators.

    Attributes
    ----------
    dt : float
        Base Euler step. Phase simulations additionally cap the step at
        ``0.1 / lam`` so the initial drift ``lam * beta / 4`` is resolved.
    drift_tolerance : float
        Residual drift mass ``lam * exp(-beta * t / 4)`` (radians) allowed
        at the end of a phase horizon before the analytic terminal weight
        takes over.
    p1_tail_tolerance : float
        Same tail criterion for the ``lam = 1`` diffusion used by the
        survival-probability table: horizons must satisfy
        ``exp(-beta * horizon / 4) <= p1_tail_tolerance``.
    warm_mass : float
        Drift mass ``lam * F(delta)`` spent inside the deterministic warm
        start that realises the entrance from -infinity.
    x_max : float
        Level at which the log-tan diffusion is classified as blown up.
    substep_frac : float
        Upper bound on ``|drift| * step``; steps violating it are refined.
    block_size, chunk_steps : int
        Path-block width and time-chunk length of the vectorised engine.
        They affect memory and speed only, never results.
    threads : int
        Worker threads for block-parallel simulation. Results are
        independent of this value by construction.
    antithetic_p1 : bool
        Pair each survival-table path with its sign-flipped noise twin.
        Standard errors are then computed over pair means.
    z_burn_in : float
        Time discarded before the reflected diffusion is treated as
        stationary.
    """

    dt: float = 1e-3
    drift_tolerance: float = 1e-4
    p1_tail_tolerance: float = 1e-4
    warm_mass: float = 0.01
    x_max: float = 25.0
    substep_frac: float = 0.25
    block_size: int = 8192
    chunk_steps: int = 2048
    threads: int = 1
    antithetic_p1: bool = True
    z_burn_in: float = 12.0

    def phase_dt(self, lam: float) -> float:
        """Step size for phase simulations at point-process scale ``lam``."""
        if lam > 0:
            return min(self.dt, 0.1 / lam)
        return self.dt

    def with_(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CONFIG = SimConfig()
