"""Static SVG plots of a fitted run: inputs, aligned sequences colored by
cluster, and warp functions against the identity line."""

from __future__ import annotations

import numpy as np

from .warp import warp_from_aux


def save_run_plots(out_dir, prefix, dataset, result):
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "dpalign"
    import matplotlib.pyplot as plt

    cmap = matplotlib.colormaps["tab10"]
    colors = [cmap(int(lab) % 10) for lab in result.labels]

    paths = []
    for kind, rows, title in (
        ("inputs", dataset.Y, "observed sequences"),
        ("aligned", result.aligned, "aligned sequences (colored by cluster)"),
    ):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for j, row in enumerate(rows):
            ax.plot(dataset.x, row, color=colors[j], lw=1.2)
        ax.set_title(title)
        ax.set_xlabel("x")
        fig.tight_layout()
        path = out_dir / f"{prefix}{kind}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        paths.append(path)

    fig, ax = plt.subplots(figsize=(4.2, 4))
    ax.plot([-1, 1], [-1, 1], color="0.6", ls="--", lw=1.0, label="identity")
    for j, w in enumerate(result.warps):
        ax.plot(dataset.x, warp_from_aux(w.u), color=colors[j], lw=1.2)
    ax.set_title("warp functions")
    ax.set_xlabel("x")
    ax.set_ylabel("g(x)")
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    path = out_dir / f"{prefix}warps.svg"
    fig.savefig(path, format="svg")
    plt.close(fig)
    paths.append(path)
    return paths
