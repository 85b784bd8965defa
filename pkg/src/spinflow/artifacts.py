"""File artifacts: CSV writers, JSON/text reports, metadata, plot scripts.

Everything written here is deterministic: fixed column orders, 17-significant-
digit floats, sorted JSON keys, and no timestamps, so a rerun with the same
resolved configuration reproduces every file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .trajectory import TrajectoryRecord

__all__ = [
    "write_config_csv",
    "write_trajectory_csv",
    "write_energy_csv",
    "write_convergence_csv",
    "write_json",
    "render_text_report",
    "sha256_file",
    "write_metadata",
    "write_dynamics_plot_script",
    "write_convergence_plot_script",
]

_COMPONENTS = ("x", "y", "z")


def _fmt(x: float) -> str:
    """Full double precision, compact: 17 significant digits."""
    return format(float(x), ".17g")


def _component_header(n_components: int) -> str:
    return ",".join(_COMPONENTS[:n_components])


def write_config_csv(path: str | Path, config: np.ndarray) -> Path:
    """One configuration snapshot: header ``site,x,y[,z]``, one row per site."""
    config = np.asarray(config, dtype=float)
    if config.ndim != 2 or config.shape[-1] not in (2, 3):
        raise ValueError(f"expected an (M, 2|3) configuration, got {config.shape}")
    path = Path(path)
    lines = [f"site,{_component_header(config.shape[-1])}"]
    for i, spin in enumerate(config):
        lines.append(f"{i}," + ",".join(_fmt(c) for c in spin))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trajectory_csv(path: str | Path, traj: TrajectoryRecord) -> Path:
    """All recorded snapshots: header ``t,site,x,y[,z]``."""
    path = Path(path)
    d = traj.snapshots.shape[-1]
    lines = [f"t,site,{_component_header(d)}"]
    for t, snap in zip(traj.snapshot_times, traj.snapshots):
        ts = _fmt(t)
        for i, spin in enumerate(snap):
            lines.append(f"{ts},{i}," + ",".join(_fmt(c) for c in spin))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_energy_csv(path: str | Path, traj: TrajectoryRecord) -> Path:
    """Scalar trace: header ``t,H,accept_rate`` (the rate column is empty for
    dynamics that have no accept/reject step)."""
    path = Path(path)
    lines = ["t,H,accept_rate"]
    rate = traj.accept_rate
    for k, (t, h) in enumerate(zip(traj.times, traj.energies)):
        r = "" if rate is None else _fmt(rate[k])
        lines.append(f"{_fmt(t)},{_fmt(h)},{r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_convergence_csv(path: str | Path, points: list[dict]) -> Path:
    """Refinement-study points: header ``h,err,stderr,n_realizations``."""
    path = Path(path)
    lines = ["h,err,stderr,n_realizations"]
    for p in points:
        lines.append(
            f"{_fmt(p['h'])},{_fmt(p['err'])},{_fmt(p['stderr'])},{p['n_realizations']}"
        )
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _render_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def render_text_report(report: dict, indent: int = 0) -> str:
    """Aligned key/value text rendering of a (possibly nested) report dict.

    Lists of scalars print inline; lists of dicts (per-level statistics) print
    as one indented block per entry.
    """
    pad = " " * indent
    keys = list(report)
    width = max((len(k) for k in keys), default=0)
    lines = []
    for k in keys:
        v = report[k]
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.append(render_text_report(v, indent + 2))
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"{pad}{k}:")
            for entry in v:
                lines.append(render_text_report(entry, indent + 2))
                lines.append("")
            lines.pop()
        elif isinstance(v, list):
            body = ", ".join(_render_value(x) for x in v)
            lines.append(f"{pad}{k:<{width}}  [{body}]")
        else:
            lines.append(f"{pad}{k:<{width}}  {_render_value(v)}")
    return "\n".join(lines)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_metadata(
    out_dir: str | Path,
    scenario: str,
    config: dict,
    derived: dict,
    seeds: dict,
    artifacts: list[Path],
    extra: dict | None = None,
) -> Path:
    """The provenance file: resolved config, derived quantities, seeds, and a
    sha256 per artifact.  Deliberately contains no timestamps or host data so
    identical runs produce identical metadata."""
    out_dir = Path(out_dir)
    payload = {
        "scenario": scenario,
        "config": config,
        "derived": derived,
        "seeds": seeds,
        "artifacts": {p.name: sha256_file(p) for p in artifacts},
    }
    if extra:
        payload.update(extra)
    return write_json(out_dir / "metadata.json", _jsonable(payload))


def _jsonable(obj):
    """Recursively coerce numpy scalars/arrays (and inf) into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


_DYNAMICS_PLOT = '''\
#!/usr/bin/env python3
"""Render the sampled, stochastic, and deterministic runs from their CSVs.

Generated alongside the data; needs matplotlib only when executed.
"""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).parent
TRAJECTORIES = {trajectories}
ENERGIES = {energies}


def read_trajectory(name):
    by_time = defaultdict(list)
    with open(HERE / name) as fh:
        for row in csv.DictReader(fh):
            comps = [float(row[c]) for c in ("x", "y", "z") if c in row]
            by_time[float(row["t"])].append(comps)
    return dict(sorted(by_time.items()))


def read_energy(name):
    ts, hs = [], []
    with open(HERE / name) as fh:
        for row in csv.DictReader(fh):
            ts.append(float(row["t"]))
            hs.append(float(row["H"]))
    return ts, hs


fig, axes = plt.subplots(1, 2, figsize=(11, 4))
markers = {{"mh": "o", "sde": "*", "pde": "d"}}
for label, fname in TRAJECTORIES.items():
    snaps = read_trajectory(fname)
    final_t = max(snaps)
    for t in (0.0, final_t / 2, final_t):
        key = min(snaps, key=lambda s: abs(s - t))
        first = [s[0] for s in snaps[key]]
        axes[0].plot(first, marker=markers[label], ls="-", ms=4,
                     label=f"{{label}} t={{key:g}}", alpha=0.7)
axes[0].set_xlabel("site")
axes[0].set_ylabel("first spin component")
axes[0].legend(fontsize=7)

for label, fname in ENERGIES.items():
    ts, hs = read_energy(fname)
    axes[1].plot(ts, hs, label=label)
axes[1].set_xlabel("t")
axes[1].set_ylabel("H")
axes[1].legend()
fig.tight_layout()
fig.savefig(HERE / "dynamics.png", dpi=150)
print("wrote", HERE / "dynamics.png")
'''

_CONVERGENCE_PLOT = '''\
#!/usr/bin/env python3
"""Log-log refinement plot of {title} with the fitted order.

Generated alongside the data; needs matplotlib only when executed.
"""
import csv
import math
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).parent
SLOPE = {slope!r}
INTERCEPT = {intercept!r}

hs, errs, bars = [], [], []
with open(HERE / "convergence.csv") as fh:
    for row in csv.DictReader(fh):
        hs.append(float(row["h"]))
        errs.append(float(row["err"]))
        bars.append(float(row["stderr"]))

fig, ax = plt.subplots(figsize=(5, 4))
ax.errorbar(hs, errs, yerr=bars, fmt="o", capsize=3, label="measured")
fit = [math.exp(INTERCEPT) * h ** SLOPE for h in hs]
ax.plot(hs, fit, "--", label=f"slope {{SLOPE:.3f}}")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel({xlabel!r})
ax.set_ylabel("error at T")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "convergence.png", dpi=150)
print("wrote", HERE / "convergence.png")
'''


def write_dynamics_plot_script(
    path: str | Path, trajectories: dict[str, str], energies: dict[str, str]
) -> Path:
    path = Path(path)
    path.write_text(
        _DYNAMICS_PLOT.format(trajectories=repr(trajectories), energies=repr(energies))
    )
    return path


def write_convergence_plot_script(
    path: str | Path, title: str, xlabel: str, slope: float, intercept: float
) -> Path:
    path = Path(path)
    path.write_text(
        _CONVERGENCE_PLOT.format(
            title=title, xlabel=xlabel, slope=float(slope), intercept=float(intercept)
        )
    )
    return path
