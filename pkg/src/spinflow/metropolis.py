"""Metropolis-Hastings chain: joint full-lattice proposal, global accept.

Every site is kicked simultaneously by projected Gaussian noise and the whole
configuration is accepted or rejected with one Bernoulli draw of probability
min(1, exp(-beta dH)).  Proposal noise comes from a BrownianLattice so the
chain and the Langevin integrator can ride the same Brownian path; the
acceptance uniforms live on a separate stream of the same seed, indexed by
step, so rejected steps still consume their noise and the coupling stays
aligned step-for-step.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import noise as noise_mod
from .exceptions import ConfigError, NumericalError
from .geometry import _project_raw, exp_map, normalized_step
from .lattice import ModelParams, delta_hamiltonian, hamiltonian, validate_config
from .trajectory import TrajectoryRecord

__all__ = ["MHState", "propose", "mh_step", "run_mh"]

PROPOSAL_KINDS = ("normalized", "exponential")

#: full H recomputation cadence (accepted steps) to cap additive fp drift
ENERGY_RECOMPUTE_INTERVAL = 10_000

#: steps per noise/uniform block fetched at once inside run_mh
_WINDOW = 4096


@dataclasses.dataclass
class MHState:
    """Chain state.  The RNG "cursor" is simply ``step``: proposal noise for
    step n is ``path.mh_noise(n)`` and the acceptance uniform is entry n of
    the accept stream, so state never holds generator internals."""

    config: np.ndarray
    path: noise_mod.BrownianLattice
    step: int = 0
    accept_count: int = 0
    proposal_kind: str = "normalized"
    energy: float | None = None
    energy_comp: float = 0.0  # Kahan compensation for the running energy
    accepted_since_recompute: int = 0

    def __post_init__(self):
        if self.proposal_kind not in PROPOSAL_KINDS:
            raise ConfigError(
                f"proposal_kind must be one of {PROPOSAL_KINDS}, got {self.proposal_kind!r}"
            )
        if not 0 <= self.accept_count <= max(self.step, 0):
            raise ConfigError("accept_count must lie in [0, step]")


def _propose_batch(
    configs: np.ndarray, params: ModelParams, w: np.ndarray, proposal_kind: str
) -> np.ndarray:
    """Proposals for a (B, M, m+1) block of chains given standard normals w."""
    kick = params.eps * _project_raw(configs, w)
    if proposal_kind == "normalized":
        return normalized_step(configs, kick)
    if proposal_kind == "exponential":
        return exp_map(configs, kick)
    raise ConfigError(f"unknown proposal kind {proposal_kind!r}")


def _step_batch(
    configs: np.ndarray,
    params: ModelParams,
    w: np.ndarray,
    u: np.ndarray,
    proposal_kind: str,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One M-H step on a (B, M, m+1) block; returns (configs', accepted, dH).

    This is the single step kernel: the scalar API and the batched scenario
    engines both call it, which is what makes them bitwise identical.
    """
    proposal = _propose_batch(configs, params, w, proposal_kind)
    dh = np.atleast_1d(delta_hamiltonian(configs, proposal, params))
    if not np.all(np.isfinite(dh)):
        raise NumericalError("non-finite energy difference in M-H step")
    if math.isfinite(params.beta):
        accepted = u < np.exp(-params.beta * np.maximum(dh, 0.0))
    else:
        accepted = dh <= 0.0  # zero-temperature chain: greedy descent
    new = np.where(accepted[..., None, None], proposal, configs)
    return new, accepted, dh


def propose(state: MHState, eps: float) -> np.ndarray:
    """The proposal configuration at the state's current step and noise.

    All sites move simultaneously: site i is kicked by eps times the tangent
    projection of its standard-normal vector w_i = path.mh_noise(step, i).
    """
    w = state.path.mh_noise(state.step)
    kick = eps * _project_raw(state.config, w)
    if state.proposal_kind == "normalized":
        return normalized_step(state.config, kick)
    return exp_map(state.config, kick)


def mh_step(state: MHState, params: ModelParams) -> tuple[MHState, bool, float]:
    """Advance one step: propose all sites, accept or reject jointly."""
    w = state.path.mh_noise(state.step)[None]
    u = noise_mod.accept_uniforms(state.path.seed, state.step, state.step + 1)
    new_cfg, accepted, dh = _step_batch(
        state.config[None], params, w, u, state.proposal_kind
    )
    accepted = bool(accepted[0])
    dh_val = float(dh[0])

    energy = state.energy
    comp = state.energy_comp
    since = state.accepted_since_recompute
    count = state.accept_count
    if accepted:
        count += 1
        if energy is not None:
            # Kahan update of the running energy
            y = dh_val - comp
            t = energy + y
            comp = (t - energy) - y
            energy = t
            since += 1
            if since >= ENERGY_RECOMPUTE_INTERVAL:
                energy = hamiltonian(new_cfg[0], params)
                comp = 0.0
                since = 0
    new_state = dataclasses.replace(
        state,
        config=new_cfg[0],
        step=state.step + 1,
        accept_count=count,
        energy=energy,
        energy_comp=comp,
        accepted_since_recompute=since,
    )
    return new_state, accepted, dh_val


def _resolve_path(
    params: ModelParams,
    n_steps: int,
    seed: int | None,
    path: noise_mod.BrownianLattice | None,
) -> noise_mod.BrownianLattice:
    if (seed is None) == (path is None):
        raise ConfigError("provide exactly one of seed or path")
    if path is None:
        return noise_mod.generate(seed, params.M, params.m, params.dt, n_steps)
    if path.n_sites != params.M or path.m != params.m:
        raise ConfigError(
            f"path lattice ({path.n_sites} sites, m={path.m}) does not match "
            f"params ({params.M} sites, m={params.m})"
        )
    factor = int(round(params.dt / path.dt))
    if factor < 1 or abs(factor * path.dt - params.dt) > 1e-12 * params.dt:
        raise ConfigError(
            f"path step {path.dt} is not a divisor of params.dt {params.dt}"
        )
    out = path if factor == 1 else path.coarsen(factor)
    if out.n_steps < n_steps:
        raise ConfigError(
            f"path holds {out.n_steps} steps at dt={out.dt}, need {n_steps}"
        )
    return out


def run_mh(
    initial: np.ndarray,
    params: ModelParams,
    n_steps: int,
    record_every: int = 1,
    *,
    seed: int | None = None,
    path: noise_mod.BrownianLattice | None = None,
    proposal_kind: str = "normalized",
) -> TrajectoryRecord:
    """Run the chain for n_steps, recording H and the running accept rate at
    every step and configuration snapshots every ``record_every`` steps (the
    final configuration is always included).

    The driving noise comes from ``seed`` (a fresh path) or an explicit
    ``path``; a finer path is coarsened to params.dt automatically, so the
    sampler and an SDE run can share one path object.
    """
    if record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if proposal_kind not in PROPOSAL_KINDS:
        raise ConfigError(f"unknown proposal kind {proposal_kind!r}")
    initial = validate_config(initial, params)
    path = _resolve_path(params, n_steps, seed, path)

    config = initial[None]  # batch of one chain
    energy = hamiltonian(initial, params)
    comp = 0.0
    since_recompute = 0
    accept_count = 0

    times = np.arange(n_steps + 1) * params.dt
    energies = np.empty(n_steps + 1)
    energies[0] = energy
    rate = np.empty(n_steps + 1)
    rate[0] = 0.0  # no proposals yet

    snap_steps = [0]
    snapshots = [initial.copy()]

    for start in range(0, n_steps, _WINDOW):
        stop = min(start + _WINDOW, n_steps)
        w_block = path.raw_block(start, stop) * (1.0 / math.sqrt(path.factor))
        u_block = noise_mod.accept_uniforms(path.seed, start, stop)
        for k in range(stop - start):
            step = start + k
            config, accepted, dh = _step_batch(
                config, params, w_block[k][None], u_block[k : k + 1], proposal_kind
            )
            if accepted[0]:
                accept_count += 1
                y = float(dh[0]) - comp
                t = energy + y
                comp = (t - energy) - y
                energy = t
                since_recompute += 1
                if since_recompute >= ENERGY_RECOMPUTE_INTERVAL:
                    energy = hamiltonian(config[0], params)
                    comp = 0.0
                    since_recompute = 0
            energies[step + 1] = energy
            rate[step + 1] = accept_count / (step + 1)
            if (step + 1) % record_every == 0 or step + 1 == n_steps:
                snap_steps.append(step + 1)
                snapshots.append(config[0].copy())

    # dedupe a final step that was also on the stride
    keep = [0] + [k for k in range(1, len(snap_steps)) if snap_steps[k] != snap_steps[k - 1]]
    return TrajectoryRecord(
        kind="mh",
        params=params,
        times=times,
        energies=energies,
        accept_rate=rate,
        snapshot_times=np.array([snap_steps[k] for k in keep]) * params.dt,
        snapshots=np.stack([snapshots[k] for k in keep]),
        seed=path.seed,
    )
