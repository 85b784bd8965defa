"""Periodic 1-D spin lattice: parameters, Hamiltonian, discrete operators.

A configuration is an array of shape (..., M, m+1) of unit spins; the lattice
spacing is delta_x = 1/N and the physical length is M/N.  All operators accept
leading batch axes and treat the second-to-last axis as the site axis with
periodic wrap-around.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .exceptions import ConfigError

__all__ = [
    "ModelParams",
    "create",
    "hamiltonian",
    "discrete_laplacian",
    "forward_gradient",
    "backward_gradient",
    "hamiltonian_gradient",
    "delta_hamiltonian",
    "dirichlet_energy",
    "make_initial_condition",
    "validate_config",
]

_MODELS = {"xy": 1, "heisenberg": 2}

#: default profile amplitudes per initial-condition kind
IC_AMPLITUDES = {"near_equilibrium": 0.1, "out_of_equilibrium": math.pi / 2.0}


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Immutable physical/numerical parameters of one run.

    The proposal size is always the derived quantity eps = sqrt(N*dt/beta),
    so the scaling beta*eps^2 = N*dt holds by construction.  beta may be
    ``math.inf`` (noise off; the SDE then degenerates to the heat flow).
    """

    model: str
    N: int
    dt: float
    beta: float
    L: float = 2.0
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.model not in _MODELS:
            raise ConfigError(f"unknown model {self.model!r}; use 'xy' or 'heisenberg'")
        if self.N < 2:
            raise ConfigError(f"N must be >= 2, got {self.N}")
        if not self.L > 0:
            raise ConfigError(f"lattice length L must be positive, got {self.L}")
        if self.M < 3:
            raise ConfigError(f"site count M = round(L*N) = {self.M} is below 3")
        if not self.dt > 0:
            raise ConfigError(f"time step dt must be positive, got {self.dt}")
        if not self.beta > 0:  # also rejects nan
            raise ConfigError(f"inverse temperature beta must be positive, got {self.beta}")
        if self.gamma is not None and math.isfinite(self.beta):
            expect = float(self.N) ** self.gamma
            if abs(self.beta - expect) > 1e-9 * expect:
                raise ConfigError(
                    f"beta={self.beta!r} inconsistent with gamma={self.gamma!r} "
                    f"(N^gamma = {expect!r})"
                )

    # -- derived quantities -------------------------------------------------

    @property
    def m(self) -> int:
        """Sphere dimension: 1 for XY, 2 for Heisenberg."""
        return _MODELS[self.model]

    @property
    def n_components(self) -> int:
        return self.m + 1

    @property
    def M(self) -> int:
        """Site count, round(L*N)."""
        return int(round(self.L * self.N))

    @property
    def J(self) -> float:
        """Coupling J = N^(2-d) with d = 1."""
        return float(self.N)

    @property
    def delta_x(self) -> float:
        return 1.0 / self.N

    @property
    def eps(self) -> float:
        """Proposal size sqrt(N*dt/beta); 0 when beta is infinite."""
        return math.sqrt(self.N * self.dt / self.beta)

    @classmethod
    def create(
        cls,
        model: str,
        N: int,
        *,
        L: float = 2.0,
        dt: float | None = None,
        beta: float | None = None,
        gamma: float | None = None,
        eps: float | None = None,
    ) -> "ModelParams":
        """Build params from any consistent combination of knobs.

        Exactly one of ``beta`` / ``gamma`` sets the temperature; exactly one
        of ``dt`` / ``eps`` sets the step (eps implies dt = beta*eps^2/N).
        """
        if (beta is None) == (gamma is None):
            raise ConfigError("specify exactly one of beta or gamma")
        if beta is None:
            beta = float(N) ** float(gamma)
        if (dt is None) == (eps is None):
            raise ConfigError("specify exactly one of dt or eps")
        if dt is None:
            if not math.isfinite(beta):
                raise ConfigError("cannot derive dt from eps at beta = inf")
            dt = beta * float(eps) ** 2 / N
        return cls(model=model, N=N, dt=float(dt), beta=float(beta), L=float(L), gamma=gamma)

    def with_dt(self, dt: float) -> "ModelParams":
        return dataclasses.replace(self, dt=float(dt))


#: module-level spelling of the factory
create = ModelParams.create


def validate_config(config: np.ndarray, params: ModelParams, tol: float = 1e-12) -> np.ndarray:
    """Check shape and unit norms; returns the array as float64."""
    config = np.asarray(config, dtype=float)
    if config.shape[-2:] != (params.M, params.n_components):
        raise ValueError(
            f"configuration shape {config.shape} does not match lattice "
            f"({params.M} sites x {params.n_components} components)"
        )
    norms = np.sqrt(np.sum(config * config, axis=-1))
    if not np.all(np.abs(norms - 1.0) <= tol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"spins are off the unit sphere (max |norm-1| = {worst:.3e})")
    return config


def _site_roll(config: np.ndarray, shift: int) -> np.ndarray:
    # roll(+1) puts sigma_{i-1} at slot i, roll(-1) puts sigma_{i+1} there
    return np.roll(config, shift, axis=-2)


def _maybe_site(field: np.ndarray, i: int | None) -> np.ndarray:
    if i is None:
        return field
    M = field.shape[-2]
    if not -M <= i < M:
        raise ValueError(f"site index {i} out of range for {M} sites")
    return field[..., i, :]


def _fsum_sites(site_terms: np.ndarray, scale: float) -> float | np.ndarray:
    """scale * (site sum), compensated per lattice; batch shapes preserved."""
    flat = np.atleast_2d(site_terms.reshape(-1, site_terms.shape[-1]))
    out = np.array([math.fsum(row) for row in flat]) * scale
    if site_terms.ndim == 1:
        return float(out[0])
    return out.reshape(site_terms.shape[:-1])


def hamiltonian(config: np.ndarray, params: ModelParams) -> float | np.ndarray:
    """Energy J * sum over periodic neighbor pairs of |sigma_i - sigma_{i+1}|^2.

    Each unordered pair is counted once (M pairs on the periodic chain).
    Batched input (..., M, m+1) returns energies of shape (...).  The site
    sum is compensated (fsum), so relabeling sites cannot change the result:
    the pair terms form the same multiset and fsum rounds their true sum.
    """
    config = np.asarray(config, dtype=float)
    diff = _site_roll(config, -1) - config
    pair_terms = np.sum(diff * diff, axis=-1)
    return _fsum_sites(pair_terms, params.J)


def dirichlet_energy(config: np.ndarray, params: ModelParams) -> float | np.ndarray:
    """Discrete Dirichlet energy sum_i |grad+ sigma_i|^2 * delta_x.

    Algebraically equal to :func:`hamiltonian` for d=1, J=N:
    J|sigma_{i+1}-sigma_i|^2 = |N(sigma_{i+1}-sigma_i)|^2 / N.
    """
    config = np.asarray(config, dtype=float)
    grad = params.N * (_site_roll(config, -1) - config)
    return _fsum_sites(np.sum(grad * grad, axis=-1), params.delta_x)


def discrete_laplacian(
    config: np.ndarray, params: ModelParams, i: int | None = None
) -> np.ndarray:
    """N^2 (sigma_{i+1} + sigma_{i-1} - 2 sigma_i), periodic indices."""
    config = np.asarray(config, dtype=float)
    lap = params.N**2 * (_site_roll(config, -1) + _site_roll(config, 1) - 2.0 * config)
    return _maybe_site(lap, i)


def forward_gradient(config: np.ndarray, params: ModelParams, i: int | None = None) -> np.ndarray:
    """N (sigma_{i+1} - sigma_i)."""
    config = np.asarray(config, dtype=float)
    return _maybe_site(params.N * (_site_roll(config, -1) - config), i)


def backward_gradient(config: np.ndarray, params: ModelParams, i: int | None = None) -> np.ndarray:
    """N (sigma_i - sigma_{i-1})."""
    config = np.asarray(config, dtype=float)
    return _maybe_site(params.N * (config - _site_roll(config, 1)), i)


def hamiltonian_gradient(
    config: np.ndarray, params: ModelParams, i: int | None = None
) -> np.ndarray:
    """dH/dsigma_i = 2J (2 sigma_i - sigma_{i+1} - sigma_{i-1})."""
    config = np.asarray(config, dtype=float)
    grad = 2.0 * params.J * (
        2.0 * config - _site_roll(config, -1) - _site_roll(config, 1)
    )
    return _maybe_site(grad, i)


def delta_hamiltonian(
    config: np.ndarray, proposal: np.ndarray, params: ModelParams
) -> float | np.ndarray:
    """H(proposal) - H(config) by the exact quadratic expansion.

    With delta_j = proposal_j - config_j:

        dH = sum_j dH/dsigma_j . delta_j
           + 2J sum_j |delta_j|^2
           -  J sum_j delta_j . (delta_{j+1} + delta_{j-1})

    This is exact for the quadratic Hamiltonian (no truncation) and costs
    O(M) instead of recomputing both energies.
    """
    config = np.asarray(config, dtype=float)
    proposal = np.asarray(proposal, dtype=float)
    if config.shape != proposal.shape:
        raise ValueError(
            f"configuration shapes differ: {config.shape} vs {proposal.shape}"
        )
    delta = proposal - config
    grad = hamiltonian_gradient(config, params)
    lin = np.sum(grad * delta, axis=(-2, -1))
    quad = 2.0 * params.J * np.sum(delta * delta, axis=(-2, -1))
    cross = params.J * np.sum(
        delta * (_site_roll(delta, -1) + _site_roll(delta, 1)), axis=(-2, -1)
    )
    out = lin + quad - cross
    return float(out) if out.ndim == 0 else out


def make_initial_condition(
    kind: str, params: ModelParams, amplitude: float | None = None
) -> np.ndarray:
    """Smooth periodic starting configurations.

    'aligned' is every spin at e_1.  The other kinds are sine profiles in
    angle coordinates with one full period across the lattice:

        XY:          theta_i = A sin(2 pi x_i / L)
        Heisenberg:  polar_i = pi/2 + A sin(2 pi x_i / L),
                     azimuth_i = A cos(2 pi x_i / L)

    with default amplitude A = 0.1 (near_equilibrium) or pi/2
    (out_of_equilibrium).  The wavelength uses the realized length M*delta_x
    so the profile is exactly periodic even when L*N is not an integer.
    """
    M, d = params.M, params.n_components
    if kind == "aligned":
        config = np.zeros((M, d))
        config[:, 0] = 1.0
        return config
    if kind not in IC_AMPLITUDES:
        raise ConfigError(
            f"unknown initial-condition kind {kind!r}; "
            "use aligned, near_equilibrium or out_of_equilibrium"
        )
    if amplitude is None:
        amplitude = IC_AMPLITUDES[kind]
    length = M * params.delta_x
    phase = 2.0 * np.pi * (np.arange(M) * params.delta_x) / length
    if params.model == "xy":
        theta = amplitude * np.sin(phase)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    polar = np.pi / 2.0 + amplitude * np.sin(phase)
    azimuth = amplitude * np.cos(phase)
    return np.stack(
        [
            np.sin(polar) * np.cos(azimuth),
            np.sin(polar) * np.sin(azimuth),
            np.cos(polar),
        ],
        axis=-1,
    )
