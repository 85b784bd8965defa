"""Geometric primitives on the unit sphere S^m embedded in R^{m+1}.

Every function accepts arrays whose *last* axis holds the m+1 components, so a
single spin (m+1,), a whole configuration (M, m+1), or a batch of
configurations (B, M, m+1) all work unchanged.  All operations are pure.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "tangent_project",
    "cross_project",
    "exp_map",
    "normalized_step",
    "taylor_residuals",
    "renormalize",
]

#: Relative tolerance for "is this vector on the unit sphere" input checks.
UNIT_NORM_TOL = 1e-9

#: Below this kick length exp_map returns the base point unchanged (avoids 0/0).
EXP_MAP_ZERO = 1e-15


def _norm(v: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis, keepdims."""
    return np.sqrt(np.sum(v * v, axis=-1, keepdims=True))


def _check_unit(sigma: np.ndarray) -> None:
    nrm = _norm(sigma)
    if not np.all(np.abs(nrm - 1.0) <= UNIT_NORM_TOL):
        worst = float(np.max(np.abs(nrm - 1.0)))
        raise ValueError(
            f"base point is not on the unit sphere (max |norm-1| = {worst:.3e})"
        )


def _project_raw(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    """v - (v.sigma) sigma without input validation (hot-path form)."""
    dot = np.sum(v * sigma, axis=-1, keepdims=True)
    return v - dot * sigma


def tangent_project(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project ``v`` onto the tangent space of the sphere at ``sigma``.

    Returns ``v - (v.sigma) sigma``.  ``sigma`` must be unit norm (checked to
    1e-9); the result is orthogonal to ``sigma`` to machine precision.
    """
    sigma = np.asarray(sigma, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_unit(sigma)
    return _project_raw(sigma, v)


def cross_project(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Alternative tangent projection for S^2 only: ``sigma x v``.

    Both this and :func:`tangent_project` send an isotropic Gaussian to a
    rotationally symmetric tangent distribution; the sampler uses
    ``tangent_project``, this one exists for the equivalence checks.
    """
    sigma = np.asarray(sigma, dtype=float)
    v = np.asarray(v, dtype=float)
    if sigma.shape[-1] != 3 or v.shape[-1] != 3:
        raise ValueError(
            "cross_project is defined only for the Heisenberg model (m=2, "
            f"3 components); got {sigma.shape[-1]} components"
        )
    _check_unit(sigma)
    return np.cross(sigma, v)


def exp_map(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Great-circle exponential map: cos(|v|) sigma + sin(|v|) v/|v|.

    ``v`` must be tangent at ``sigma`` (|v.sigma| <= 1e-9 |v|).  For
    |v| < 1e-15 returns ``sigma`` verbatim.  Result is unit norm by
    construction.
    """
    sigma = np.asarray(sigma, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_unit(sigma)
    vn = _norm(v)
    dot = np.abs(np.sum(v * sigma, axis=-1, keepdims=True))
    if not np.all(dot <= UNIT_NORM_TOL * np.maximum(vn, EXP_MAP_ZERO)):
        raise ValueError("kick vector is not tangent to the base point")
    return _exp_map_raw(sigma, v, vn)


def _exp_map_raw(sigma: np.ndarray, v: np.ndarray, vn: np.ndarray) -> np.ndarray:
    small = vn < EXP_MAP_ZERO
    # guard the division; the masked lanes are overwritten below
    safe = np.where(small, 1.0, vn)
    out = np.cos(vn) * sigma + np.sin(vn) * (v / safe)
    return np.where(small, sigma, out)


def normalized_step(sigma: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Move off the sphere by ``w`` and renormalize: (sigma+w)/|sigma+w|."""
    sigma = np.asarray(sigma, dtype=float)
    w = np.asarray(w, dtype=float)
    s = sigma + w
    nrm = _norm(s)
    if np.any(nrm <= 1e-12):
        raise ValueError("degenerate step: |sigma + w| ~ 0, cannot renormalize")
    return s / nrm


def renormalize(v: np.ndarray) -> np.ndarray:
    """Rescale the last axis to unit norm (degenerate input -> error)."""
    nrm = _norm(v)
    if np.any(nrm <= 1e-12):
        raise ValueError("cannot renormalize a (near-)zero vector")
    return v / nrm


def taylor_residuals(
    sigma: np.ndarray, kick: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Remainders of three truncations of the exponential map.

    For a tangent kick ``kick`` (the sampler's eps*nu), returns

        a = exp_map(sigma, kick) - normalized_step(sigma, kick)
        c = exp_map(sigma, kick) - (sigma + kick)
        d = exp_map(sigma, kick) - (sigma + kick - 0.5 |kick|^2 sigma)

    whose norms scale as O(eps^3), O(eps^2), O(eps^3); the validator module
    measures these slopes.
    """
    sigma = np.asarray(sigma, dtype=float)
    kick = np.asarray(kick, dtype=float)
    exact = exp_map(sigma, kick)
    a = exact - normalized_step(sigma, kick)
    c = exact - (sigma + kick)
    k2 = np.sum(kick * kick, axis=-1, keepdims=True)
    d = exact - (sigma + kick - 0.5 * k2 * sigma)
    return a, c, d
