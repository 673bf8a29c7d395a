"""SVG figures drawn from experiment results. The CSV files remain the record."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import linear_to_db  # noqa: E402

# fixed ids and no timestamp, so identical data gives identical files
plt.rcParams["svg.hashsalt"] = "madfrc"
_META = {"Date": None}


def convergence_plot(result, path) -> Path:
    """Surrogate value (dB) versus pass; thin lines per seed, thick line for the mean."""
    spec = result.spec
    first = spec.points()[0]
    label = spec.sweep_label(first)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, scheme in enumerate(s.value for s in spec.schemes):
        traces = [np.array([linear_to_db(obj) for (_, obj, _, _) in o.trace])
                  for o in result.outcomes if o.row is not None and o.scheme == scheme and o.sweep == label]
        if not traces:
            continue
        color = f"C{i}"
        for tr in traces:
            ax.plot(np.arange(tr.size), tr, color=color, alpha=0.2, lw=0.7)
        length = max(tr.size for tr in traces)
        padded = np.array([np.pad(tr, (0, length - tr.size), mode="edge") for tr in traces])
        ax.plot(np.arange(length), padded.mean(axis=0), color=color, lw=2, label=scheme)
    ax.set_xlabel("pass")
    ax.set_ylabel("surrogate radar SINR [dB]")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return Path(path)


def sweep_plot(result, path) -> Path:
    """Mean radar SINR with standard-error bars versus the swept parameter."""
    axis = result.spec.sweep_axis
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, scheme in enumerate(s.value for s in result.spec.schemes):
        pts = [s for s in result.summary() if s["scheme"] == scheme and s["feasible"] > 0]
        if not pts:
            continue
        x = [p["sweep"] for p in pts]
        y = [p["mean_radar_sinr_db"] for p in pts]
        err = [0.0 if math.isnan(p["se_radar_sinr_db"]) else p["se_radar_sinr_db"] for p in pts]
        ax.errorbar(x, y, yerr=err, marker="o", ms=3, capsize=2, color=f"C{i}", label=scheme)
    ax.set_xlabel({"power": "transmit power [dBm]", "qos": "QoS target [dB]"}[axis])
    ax.set_ylabel("radar SINR [dB]")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return Path(path)
