"""Optional matplotlib rendering of emitted CSVs.

The delimited files remain the contract surface; these helpers draw quick
figures next to them when the CLI is invoked with ``--plot``.  matplotlib is
only imported here, so the rest of the package works without it.
"""

from __future__ import annotations

import csv


def _load_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    columns = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    return header, columns


def _axes():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 3.7))
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    return fig, ax


def plot_run_csv(csv_path, out_path) -> str:
    """Running average delay against processed arrivals."""
    _, cols = _load_csv(csv_path)
    fig, ax = _axes()
    ax.plot(cols["window_end_arrivals"], cols["mean_delay"])
    ax.set_xlabel("arrivals")
    ax.set_ylabel("running average delay (time units)")
    fig.savefig(out_path, bbox_inches="tight")
    return str(out_path)


def plot_sweep_csv(csv_path, out_path, dimension: str) -> str:
    """All value columns of a sweep CSV against the sweep dimension."""
    header, cols = _load_csv(csv_path)
    fig, ax = _axes()
    x = cols[header[0]]
    for name in header[1:]:
        if name.endswith("_se"):
            continue
        ax.plot(x, cols[name], marker="o", markersize=3, label=name)
    ax.set_xlabel(dimension)
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    fig.savefig(out_path, bbox_inches="tight")
    return str(out_path)
