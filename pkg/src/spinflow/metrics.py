"""Trajectory-error functionals and convergence-order estimation.

The three metrics quantify pathwise (strong) agreement of two runs driven by
the same Brownian path: an rms config distance at a single time, a running
per-site sup error, and the rescaled squared error e(t) whose boundedness in
the joint (N, beta) scaling is the content of the coupling estimates.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .trajectory import TrajectoryRecord

__all__ = [
    "ErrorSeries",
    "OrderFit",
    "rms_config_error",
    "scaled_error_e",
    "sup_error",
    "fit_order",
]

_METRIC_KINDS = ("rms_at_T", "sup_to_T", "scaled_e_of_t")


@dataclasses.dataclass
class ErrorSeries:
    """A nonnegative error metric sampled on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    metric_kind: str
    p: float | None = None  # rescaling exponent, for scaled_e_of_t only

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.metric_kind not in _METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("error values must be finite and nonnegative")

    @property
    def final(self) -> float:
        return float(self.values[-1])


@dataclasses.dataclass
class OrderFit:
    """Least-squares convergence order: log(err) regressed on log(h)."""

    slope: float
    intercept: float
    r_squared: float
    points: np.ndarray  # (k, 2) columns h, err


def _common_grid(a: TrajectoryRecord, b: TrajectoryRecord) -> np.ndarray:
    ta, tb = a.snapshot_times, b.snapshot_times
    if len(ta) != len(tb) or not np.allclose(ta, tb, rtol=1e-9, atol=1e-12):
        raise ValueError("trajectory snapshot grids do not match")
    if a.snapshots.shape != b.snapshots.shape:
        raise ValueError(
            f"snapshot shapes differ: {a.snapshots.shape} vs {b.snapshots.shape}"
        )
    return ta


def rms_config_error(a: np.ndarray, b: np.ndarray) -> float | np.ndarray:
    """sqrt((1/M) sum_i ||a_i - b_i||^2); batch dims, if any, are preserved."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"configuration shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    msq = np.mean(np.sum(diff * diff, axis=-1), axis=-1)
    return np.sqrt(msq) if msq.ndim else float(np.sqrt(msq))


def scaled_error_e(
    traj_a: TrajectoryRecord,
    traj_b: TrajectoryRecord,
    p: float,
    eps_param: float,
) -> ErrorSeries:
    """e(t) = (1/M) sum_i ||eps^{-p} (a_i(t) - b_i(t))||^2 on the shared grid.

    ``eps_param`` is the proposal scale sqrt(N/beta); p = 0 reduces to the
    squared rms error.
    """
    times = _common_grid(traj_a, traj_b)
    if eps_param <= 0:
        raise ValueError("eps_param must be positive")
    diff = traj_a.snapshots - traj_b.snapshots
    msq = np.mean(np.sum(diff * diff, axis=-1), axis=-1)
    values = float(eps_param) ** (-2.0 * p) * msq
    return ErrorSeries(times=times, values=values, metric_kind="scaled_e_of_t", p=p)


def sup_error(traj_a: TrajectoryRecord, traj_b: TrajectoryRecord) -> ErrorSeries:
    """Running sup over s <= t of the worst per-site squared error."""
    times = _common_grid(traj_a, traj_b)
    diff = traj_a.snapshots - traj_b.snapshots
    site_max = np.max(np.sum(diff * diff, axis=-1), axis=-1)
    return ErrorSeries(
        times=times,
        values=np.maximum.accumulate(site_max),
        metric_kind="sup_to_T",
    )


def fit_order(points) -> OrderFit:
    """Ordinary least squares of log(err) on log(h); the slope estimates the
    convergence order."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (h, err) pairs")
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit an order, got {len(pts)}")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("h and err must all be positive and finite")
    log_h = np.log(pts[:, 0])
    log_e = np.log(pts[:, 1])
    slope, intercept = np.polyfit(log_h, log_e, 1)
    resid = log_e - (slope * log_h + intercept)
    ss_res = float(np.sum(resid * resid))
    ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return OrderFit(
        slope=float(slope), intercept=float(intercept), r_squared=r_squared, points=pts
    )
