"""Finite-difference harmonic map heat flow (projection + renormalization).

The deterministic target of the zero-temperature, fine-lattice limit:

    sigma_i <- renormalize( sigma_i + P(sigma_i) Lap_N sigma_i * dt )

This is literally the Langevin Euler step with the noise off and beta
infinite — pde_step delegates to the same kernel, so the two agree exactly.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import sde as sde_mod
from .exceptions import ConfigError
from .lattice import ModelParams, dirichlet_energy, validate_config
from .trajectory import TrajectoryRecord

__all__ = ["pde_step", "run_pde"]


def _stability_guard(params: ModelParams, dt: float) -> None:
    _, hard = sde_mod.stability_limits(params.N)
    if dt > hard:
        raise ConfigError(
            f"dt={dt} violates the explicit-diffusion bound 1/(2 N^2)={hard}"
        )
    if dt <= 0:
        raise ConfigError("dt must be positive")


def _deterministic(params: ModelParams) -> ModelParams:
    """The same lattice at zero temperature (no radial term, no noise)."""
    if math.isinf(params.beta):
        return params
    return dataclasses.replace(params, beta=math.inf, gamma=None)


def pde_step(
    config: np.ndarray, params: ModelParams, dt: float | None = None
) -> np.ndarray:
    """One explicit heat-flow step at step size ``dt`` (default params.dt)."""
    dt = params.dt if dt is None else float(dt)
    _stability_guard(params, dt)
    config = np.asarray(config, dtype=float)
    return sde_mod._euler_batch(config, _deterministic(params), dt, None)


def run_pde(
    initial: np.ndarray,
    params: ModelParams,
    T: float,
    dt: float | None = None,
    record_every: int = 1,
) -> TrajectoryRecord:
    """Integrate the flow on [0, T]; records the Dirichlet energy trace at
    every step and snapshots every ``record_every`` steps."""
    dt = params.dt if dt is None else float(dt)
    _stability_guard(params, dt)
    initial = validate_config(initial, params)
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, dt):
        raise ConfigError(f"T={T} is not a multiple of dt={dt}")

    det = _deterministic(params)
    config = initial
    times = np.arange(n_steps + 1) * dt
    energies = np.empty(n_steps + 1)
    energies[0] = dirichlet_energy(initial, params)
    snap_steps = [0]
    snapshots = [initial.copy()]
    for step in range(n_steps):
        config = sde_mod._euler_batch(config, det, dt, None)
        energies[step + 1] = dirichlet_energy(config, params)
        if (step + 1) % record_every == 0 or step + 1 == n_steps:
            if snap_steps[-1] != step + 1:
                snap_steps.append(step + 1)
                snapshots.append(config.copy())

    return TrajectoryRecord(
        kind="pde",
        params=params,
        times=times,
        energies=energies,
        accept_rate=None,
        snapshot_times=np.array(snap_steps) * dt,
        snapshots=np.stack(snapshots),
    )
