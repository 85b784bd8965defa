"""Euler integration of the constrained Langevin system on the lattice.

Each spin obeys (Ito form)

    d sigma_i = [P(sigma_i) Lap_N sigma_i - (N/beta) sigma_i] dt
                + P(sigma_i) sqrt(N/beta) dW_i

with P the tangent projection at sigma_i and Lap_N the discrete Laplacian,
followed by renormalization to the sphere after every step.  The increments
dW come from the same BrownianLattice that feeds the M-H proposals, which is
the whole point: both dynamics ride one Brownian path.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from . import noise as noise_mod
from .exceptions import ConfigError, NumericalError
from .geometry import _project_raw
from .lattice import ModelParams, discrete_laplacian, hamiltonian, validate_config
from .trajectory import TrajectoryRecord

__all__ = ["SDEState", "drift", "euler_step", "heun_step", "run_sde"]

#: pre-renormalization norms below this abort the run (step size too large)
_NORM_FLOOR = 0.5

_WINDOW = 4096


@dataclasses.dataclass
class SDEState:
    config: np.ndarray
    t: float = 0.0
    dt: float | None = None  # defaults to params.dt at the first step
    renormalize: bool = True


def stability_limits(N: int) -> tuple[float, float]:
    """(warn_above, hard_error_above) time-step bounds for the explicit
    scheme on the N^2-scaled Laplacian."""
    return 1.0 / (4.0 * N * N), 1.0 / (2.0 * N * N)


def check_stability(params: ModelParams, dt: float | None = None) -> None:
    dt = params.dt if dt is None else dt
    soft, hard = stability_limits(params.N)
    if dt > hard:
        raise ConfigError(
            f"dt={dt} exceeds the stability bound 1/(2 N^2)={hard} for N={params.N}"
        )
    if dt > soft:
        warnings.warn(
            f"dt={dt} above 1/(4 N^2)={soft}: explicit step is marginally stable",
            RuntimeWarning,
            stacklevel=2,
        )


def drift(config: np.ndarray, params: ModelParams, i: int | None = None) -> np.ndarray:
    """mu_i = tangent-projected Laplacian minus the radial Ito correction."""
    config = np.asarray(config, dtype=float)
    lap = discrete_laplacian(config, params)
    mu = _project_raw(config, lap) - (params.N / params.beta) * config
    if i is None:
        return mu
    if not -params.M <= i < params.M:
        raise ValueError(f"site {i} out of range for {params.M} sites")
    return mu[..., i, :]


def _euler_batch(
    configs: np.ndarray,
    params: ModelParams,
    dt: float,
    dw: np.ndarray | None,
    renormalize: bool = True,
) -> np.ndarray:
    """One explicit step on (..., M, m+1).  ``dw=None`` (or infinite beta)
    drops the noise term entirely; infinite beta also drops the radial term,
    which makes the beta=inf call *identical* to the heat-flow step."""
    lap = discrete_laplacian(configs, params)
    step = _project_raw(configs, lap)
    if math.isfinite(params.beta):
        radial = params.N / params.beta
        new = configs + (step - radial * configs) * dt
        if dw is not None:
            new = new + _project_raw(configs, math.sqrt(radial) * dw)
    else:
        new = configs + step * dt
    if not renormalize:
        return new
    norms = np.sqrt(np.sum(new * new, axis=-1, keepdims=True))
    if np.any(norms < _NORM_FLOOR):
        raise NumericalError(
            f"spin norm fell below {_NORM_FLOOR} before renormalization; "
            "the time step is too large for this lattice"
        )
    return new / norms


def euler_step(
    state: SDEState, params: ModelParams, dw: np.ndarray | None
) -> SDEState:
    """sigma + drift*dt + projected noise, then renormalize (if enabled)."""
    dt = params.dt if state.dt is None else state.dt
    if dw is not None:
        dw = np.asarray(dw, dtype=float)
        if dw.shape != state.config.shape:
            raise ConfigError(
                f"increment shape {dw.shape} != config shape {state.config.shape}"
            )
    new = _euler_batch(state.config, params, dt, dw, renormalize=state.renormalize)
    return dataclasses.replace(state, config=new, t=state.t + dt, dt=dt)


def heun_step(state: SDEState, params: ModelParams, dw: np.ndarray | None) -> SDEState:
    """Stratonovich midpoint step of the *same* path, without the radial
    Ito term: used to check that the renormalized Ito-Euler scheme and the
    Stratonovich form of the dynamics agree to O(dt)."""
    dt = params.dt if state.dt is None else state.dt
    scale = math.sqrt(params.N / params.beta) if math.isfinite(params.beta) else 0.0

    def rhs(cfg):
        f = _project_raw(cfg, discrete_laplacian(cfg, params))
        g = _project_raw(cfg, scale * dw) if dw is not None and scale else 0.0
        return f, g

    f0, g0 = rhs(state.config)
    predictor = state.config + f0 * dt + g0
    f1, g1 = rhs(predictor)
    new = state.config + 0.5 * (f0 + f1) * dt + 0.5 * (g0 + g1)
    if state.renormalize:
        norms = np.sqrt(np.sum(new * new, axis=-1, keepdims=True))
        if np.any(norms < _NORM_FLOOR):
            raise NumericalError("spin norm collapsed in Heun step")
        new = new / norms
    return dataclasses.replace(state, config=new, t=state.t + dt, dt=dt)


def run_sde(
    initial: np.ndarray,
    params: ModelParams,
    path: noise_mod.BrownianLattice,
    T: float,
    record_every: int = 1,
    renormalize: bool = True,
) -> TrajectoryRecord:
    """Integrate on [0, T] at resolution params.dt, driven by ``path``.

    The path may be finer than params.dt; it is coarsened (exact increment
    sums) to match.  Snapshots every ``record_every`` steps plus the final
    state; H is recorded at every step.
    """
    initial = validate_config(initial, params)
    check_stability(params)
    if path.n_sites != params.M or path.m != params.m:
        raise ConfigError("path lattice does not match params")
    factor = int(round(params.dt / path.dt))
    if factor < 1 or abs(factor * path.dt - params.dt) > 1e-12 * params.dt:
        raise ConfigError(f"path step {path.dt} incompatible with dt {params.dt}")
    if factor > 1:
        path = path.coarsen(factor)
    n_steps = int(round(T / params.dt))
    if abs(n_steps * params.dt - T) > 1e-9 * max(T, params.dt):
        raise ConfigError(f"T={T} is not a multiple of dt={params.dt}")
    if path.n_steps < n_steps:
        raise ConfigError(f"path too short: {path.n_steps} steps < {n_steps}")

    config = initial
    times = np.arange(n_steps + 1) * params.dt
    energies = np.empty(n_steps + 1)
    energies[0] = hamiltonian(initial, params)
    snap_steps = [0]
    snapshots = [initial.copy()]

    for start in range(0, n_steps, _WINDOW):
        stop = min(start + _WINDOW, n_steps)
        dw_block = path.window(start, stop)
        for k in range(stop - start):
            step = start + k
            config = _euler_batch(
                config, params, params.dt, dw_block[k], renormalize=renormalize
            )
            energies[step + 1] = hamiltonian(config, params)
            if (step + 1) % record_every == 0 or step + 1 == n_steps:
                if snap_steps[-1] != step + 1:
                    snap_steps.append(step + 1)
                    snapshots.append(config.copy())

    return TrajectoryRecord(
        kind="sde",
        params=params,
        times=times,
        energies=energies,
        accept_rate=None,
        snapshot_times=np.array(snap_steps) * params.dt,
        snapshots=np.stack(snapshots),
        seed=path.seed,
    )
