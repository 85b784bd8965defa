"""Deterministic, seedable Brownian increments on the lattice.

One Brownian path drives both the M-H proposals and the SDE integrator, so
trajectory-wise error measurements compare two discretizations of the *same*
noise.  Randomness comes from a counter-based generator (Philox-4x32-10):
every value is a pure function of

    (seed, step, site, component, stream)

which makes materialized, windowed/streaming, and parallel generation agree
bit-for-bit, and lets independent realizations use spawned seeds without any
stream state.

Counter layout (frozen; changing it changes every result):
    c0 = step index, c1 = (site*(m+1) + component) // 2, c2 = stream, c3 = 0;
    key = (seed low 32, seed high 32).
Each Philox call yields four 32-bit words = two doubles; the lane's parity
selects the first or second.  Uniforms are u = ((x >> 11) + 0.5) * 2^-53 from
the 64-bit word pair (strictly inside (0,1)), Gaussians are ndtri(u).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import ndtri

__all__ = [
    "BrownianLattice",
    "generate",
    "coarsen",
    "mh_noise",
    "gaussian_block",
    "uniform_block",
    "accept_uniforms",
    "spawn_seeds",
    "STREAM_NOISE",
    "STREAM_ACCEPT",
    "STREAM_SPAWN",
]

STREAM_NOISE = 0
STREAM_ACCEPT = 1
STREAM_SPAWN = 2

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_TWO_NEG53 = 2.0**-53

#: default materialization cap for BrownianLattice.increments (entries)
MEMORY_CAP_ENTRIES = 1 << 27


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox-4x32 block cipher, vectorized over any broadcastable
    uint32 inputs.  Returns the four output words (uint32 arrays)."""
    c0 = np.asarray(c0, dtype=np.uint32)
    c1 = np.asarray(c1, dtype=np.uint32)
    c2 = np.asarray(c2, dtype=np.uint32)
    c3 = np.asarray(c3, dtype=np.uint32)
    k0 = np.asarray(k0, dtype=np.uint32)
    k1 = np.asarray(k1, dtype=np.uint32)
    with np.errstate(over="ignore"):  # mod-2^32 wraparound is intentional
        for rnd in range(10):
            if rnd:
                k0 = k0 + _W0
                k1 = k1 + _W1
            p0 = _M0 * c0.astype(np.uint64)
            p1 = _M1 * c2.astype(np.uint64)
            hi0 = (p0 >> _SHIFT32).astype(np.uint32)
            lo0 = p0.astype(np.uint32)
            hi1 = (p1 >> _SHIFT32).astype(np.uint32)
            lo1 = p1.astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _uniform_from_words(w_hi: np.ndarray, w_lo: np.ndarray) -> np.ndarray:
    """53-bit uniform strictly inside (0,1) from two 32-bit words."""
    x = (w_hi.astype(np.uint64) << _SHIFT32) | w_lo.astype(np.uint64)
    mant = (x >> _SHIFT11).astype(np.float64)
    return (mant + 0.5) * _TWO_NEG53


def _split_seeds(seeds) -> tuple[np.ndarray, np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    scalar = np.ndim(seeds) == 0
    k0 = arr.astype(np.uint32)  # low 32 bits
    k1 = (arr >> _SHIFT32).astype(np.uint32)
    return k0, k1, scalar


def uniform_block(seeds, step0: int, step1: int, stream: int) -> np.ndarray:
    """One uniform per step: shape (n,) for a scalar seed, else (B, n)."""
    k0, k1, scalar = _split_seeds(seeds)
    steps = np.arange(step0, step1, dtype=np.uint32)[None, :]
    w0, w1, _, _ = philox4x32(
        steps, np.uint32(0), np.uint32(stream), np.uint32(0), k0[:, None], k1[:, None]
    )
    u = _uniform_from_words(w0, w1)
    return u[0] if scalar else u


def gaussian_block(
    seeds,
    step0: int,
    step1: int,
    n_sites: int,
    n_components: int,
    stream: int = STREAM_NOISE,
) -> np.ndarray:
    """Standard normals for steps [step0, step1): (B, n, M, d) or (n, M, d).

    This is the single Gaussian source of the package; increments and
    proposal noise are scalar multiples of these values.
    """
    k0, k1, scalar = _split_seeds(seeds)
    n = step1 - step0
    lanes = n_sites * n_components
    pairs = (lanes + 1) // 2
    steps = np.arange(step0, step1, dtype=np.uint32)[None, :, None]
    qs = np.arange(pairs, dtype=np.uint32)[None, None, :]
    w0, w1, w2, w3 = philox4x32(
        steps,
        qs,
        np.uint32(stream),
        np.uint32(0),
        k0[:, None, None],
        k1[:, None, None],
    )
    out = np.empty(w0.shape + (2,), dtype=np.float64)
    out[..., 0] = ndtri(_uniform_from_words(w0, w1))
    out[..., 1] = ndtri(_uniform_from_words(w2, w3))
    out = out.reshape(out.shape[0], n, 2 * pairs)[:, :, :lanes]
    out = out.reshape(out.shape[0], n, n_sites, n_components)
    return out[0] if scalar else out


def accept_uniforms(seeds, step0: int, step1: int) -> np.ndarray:
    """The Bernoulli-acceptance uniform stream (separate from proposal noise)."""
    return uniform_block(seeds, step0, step1, STREAM_ACCEPT)


def spawn_seeds(seed: int, n: int, start: int = 0) -> np.ndarray:
    """Derive n independent 64-bit child seeds for realizations [start, start+n)."""
    k0, k1, _ = _split_seeds(seed)
    idx = np.arange(start, start + n, dtype=np.uint32)
    w0, w1, _, _ = philox4x32(
        idx, np.uint32(0), np.uint32(STREAM_SPAWN), np.uint32(0), k0, k1
    )
    return (w0.astype(np.uint64) << _SHIFT32) | w1.astype(np.uint64)


@dataclasses.dataclass
class BrownianLattice:
    """A lattice Brownian path at one time resolution.

    ``dt`` is the step of *this* path.  A coarsened view shares the parent's
    seed and base resolution; its increments are exact sums of the fine ones,
    so fine and coarse are the same Brownian path.  Nothing is stored unless
    :attr:`increments` is touched; windowed access regenerates from the seed.
    """

    seed: int
    n_sites: int
    m: int
    dt: float
    n_steps: int
    base_dt: float
    factor: int = 1
    memory_cap: int = MEMORY_CAP_ENTRIES
    _cache: np.ndarray | None = dataclasses.field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return self.m + 1

    @property
    def M(self) -> int:
        """Site count (alias of n_sites)."""
        return self.n_sites

    @property
    def dt_ref(self) -> float:
        """This path's step (alias of dt; for a coarsened view, the coarse step)."""
        return self.dt

    def raw_block(self, step0: int, step1: int) -> np.ndarray:
        """Coarse-step sums of the underlying standard normals, unscaled.

        Shape (step1-step0, n_sites, m+1); variance ``factor`` per entry.
        """
        if not 0 <= step0 <= step1 <= self.n_steps:
            raise ValueError(
                f"step window [{step0}, {step1}) outside [0, {self.n_steps})"
            )
        g = gaussian_block(
            self.seed,
            step0 * self.factor,
            step1 * self.factor,
            self.n_sites,
            self.n_components,
        )
        if self.factor == 1:
            return g
        n = step1 - step0
        return g.reshape(n, self.factor, self.n_sites, self.n_components).sum(axis=1)

    def window(self, step0: int, step1: int) -> np.ndarray:
        """Wiener increments (each ~ Normal(0, dt)) for steps [step0, step1)."""
        return self.raw_block(step0, step1) * math.sqrt(self.base_dt)

    @property
    def increments(self) -> np.ndarray:
        """The full (n_steps, n_sites, m+1) increment tensor (materialized).

        Paths above the memory cap must be consumed through :meth:`window`.
        """
        entries = self.n_steps * self.n_sites * self.n_components
        if entries > self.memory_cap:
            raise MemoryError(
                f"path holds {entries} entries, above the materialization cap "
                f"{self.memory_cap}; use window(step0, step1) streaming access"
            )
        if self._cache is None:
            self._cache = self.window(0, self.n_steps)
        return self._cache

    def coarsen(self, factor: int) -> "BrownianLattice":
        """The same path at step dt*factor (increment k = sum of a fine block)."""
        if factor < 1 or self.n_steps % factor:
            raise ValueError(
                f"coarsening factor {factor} does not divide {self.n_steps} steps"
            )
        return BrownianLattice(
            seed=self.seed,
            n_sites=self.n_sites,
            m=self.m,
            dt=self.dt * factor,
            n_steps=self.n_steps // factor,
            base_dt=self.base_dt,
            factor=self.factor * factor,
            memory_cap=self.memory_cap,
        )

    def mh_noise(self, step: int, site: int | None = None) -> np.ndarray:
        """w = (increment over step)/sqrt(dt): the standard-normal proposal
        vector(s) for one M-H step; scaled by eps it equals sqrt(N/beta) times
        the Brownian increment the SDE sees over the same interval."""
        if not 0 <= step < self.n_steps:
            raise ValueError(f"step {step} out of range [0, {self.n_steps})")
        w = self.raw_block(step, step + 1)[0] * (1.0 / math.sqrt(self.factor))
        if site is None:
            return w
        if not -self.n_sites <= site < self.n_sites:
            raise ValueError(f"site {site} out of range for {self.n_sites} sites")
        return w[site]


def generate(
    seed: int,
    n_sites: int,
    m: int,
    dt_ref: float,
    n_steps: int,
    memory_cap: int = MEMORY_CAP_ENTRIES,
) -> BrownianLattice:
    """Create a fresh path at reference resolution dt_ref."""
    if dt_ref <= 0:
        raise ValueError(f"dt_ref must be positive, got {dt_ref}")
    if m not in (1, 2):
        raise ValueError(f"sphere dimension m must be 1 or 2, got {m}")
    if n_steps < 0 or n_sites < 1:
        raise ValueError("need n_steps >= 0 and n_sites >= 1")
    return BrownianLattice(
        seed=int(seed) & 0xFFFFFFFFFFFFFFFF,
        n_sites=n_sites,
        m=m,
        dt=float(dt_ref),
        n_steps=n_steps,
        base_dt=float(dt_ref),
        memory_cap=memory_cap,
    )


def coarsen(path: BrownianLattice, factor: int) -> BrownianLattice:
    """Module-level alias of :meth:`BrownianLattice.coarsen`."""
    return path.coarsen(factor)


def mh_noise(path: BrownianLattice, step: int, site: int | None = None) -> np.ndarray:
    """Module-level alias of :meth:`BrownianLattice.mh_noise`."""
    return path.mh_noise(step, site)
