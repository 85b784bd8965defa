"""Shared trajectory container for the sampler and both integrators."""

from __future__ import annotations

import dataclasses

import numpy as np

from .lattice import ModelParams

__all__ = ["TrajectoryRecord"]


@dataclasses.dataclass
class TrajectoryRecord:
    """A recorded run: scalar series at every step, snapshots at a stride.

    ``times``/``energies`` (and ``accept_rate`` for the sampler) cover every
    step including t=0.  ``snapshots[k]`` is the configuration at
    ``snapshot_times[k]``; the run's final configuration is always included.
    Trajectories are piecewise constant in time: the state on [n*dt, (n+1)*dt)
    is the step-n configuration, which is what :meth:`config_at` implements.
    """

    kind: str  # "mh" | "sde" | "pde"
    params: ModelParams
    times: np.ndarray
    energies: np.ndarray
    accept_rate: np.ndarray | None
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("mh", "sde", "pde"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if len(self.snapshot_times) != len(self.snapshots):
            raise ValueError("snapshot_times and snapshots length mismatch")

    @property
    def final_time(self) -> float:
        return float(self.snapshot_times[-1])

    @property
    def final_config(self) -> np.ndarray:
        return self.snapshots[-1]

    def config_at(self, t: float) -> np.ndarray:
        """Piecewise-constant lookup among the recorded snapshots.

        Only exact to the dynamics when every step was recorded
        (record_every=1); otherwise it returns the latest snapshot at or
        before ``t``.
        """
        if t < self.snapshot_times[0] - 1e-12:
            raise ValueError(f"t={t} precedes the first snapshot")
        idx = int(np.searchsorted(self.snapshot_times, t * (1.0 + 1e-12), side="right")) - 1
        return self.snapshots[max(idx, 0)]
