"""Density maps of snapshots, written as image files next to the CSV output."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LABELS = {"m": "MCC density", "p": "PCC density", "v": "ECM density", "h": "acidity", "ph": "pH"}
CMAPS = {"m": "viridis", "p": "magma", "v": "YlGn", "h": "Reds", "ph": "RdBu"}


def plot_fields(fields: dict, extent, title: str = "", path=None, dpi: int = 120):
    """One panel per field; returns the figure, or the written path when ``path`` is given."""
    names = [n for n in ("m", "p", "v", "h", "ph") if n in fields]
    fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.0), squeeze=False)
    for ax, name in zip(axes[0], names):
        im = ax.imshow(np.asarray(fields[name]), origin="lower", extent=extent,
                       cmap=CMAPS.get(name, "viridis"), interpolation="nearest")
        ax.set_title(LABELS.get(name, name), fontsize=9)
        ax.set_xticks([extent[0], 0, extent[1]])
        ax.set_yticks([extent[2], 0, extent[3]])
        ax.tick_params(labelsize=7)
        cb = fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        cb.ax.tick_params(labelsize=7)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    if path is None:
        return fig
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return str(path)


def plot_snapshot(state, path, cfg=None) -> str:
    from .driver import snapshot_fields

    g = state.grid
    return plot_fields(snapshot_fields(state, cfg), (g.xmin, g.xmax, g.ymin, g.ymax),
                       title=f"t = {state.t:.4g}", path=Path(path))


def plot_run(out_dir) -> list[str]:
    """Re-render every snapshot of a finished run from its manifest and CSV files."""
    import json

    from .driver import read_snapshot

    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    g = manifest["grid"]
    extent = (g["xmin"], g["xmax"], g["ymin"], g["ymax"])
    paths = []
    for snap in manifest["snapshots"]:
        fields = {f.rsplit("_", 1)[0]: read_snapshot(out_dir / f) for f in snap["files"]}
        target = out_dir / f"snapshot_{snap['index']}.png"
        paths.append(plot_fields(fields, extent, title=f"t = {snap['t']:.4g}", path=target))
    return paths
