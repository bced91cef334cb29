"""Static figures for ``--plot``; matplotlib is imported only here."""
from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def make_plots(task, params, axis, values, by_cell, out):
    plt = _plt()
    if task == "map-otoc":
        for i, v in enumerate(values):
            job, res = by_cell[(i, 0)]
            if not res["ok"]:
                continue
            rows = np.array([(r[0], r[1], abs(complex(r[2], r[3]))) for r in res["rows"]])
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.semilogy(rows[:, 0], np.maximum(rows[:, 1], 1e-300), "o-", ms=3, label="C(t)")
            ax.semilogy(rows[:, 0], np.maximum(rows[:, 2], 1e-300), "s-", ms=3, label="|F(t)|")
            ax.set_xlabel("t")
            ax.set_title(f"{params['map']} map, {axis}={v}, N={job[1]['N']}")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out / f"p{i:03d}" / "otoc.png", dpi=120)
            plt.close(fig)
    elif task == "chain-otoc":
        data = np.loadtxt(out / "chain_otoc.csv", delimiter=",", skiprows=1, ndmin=2)
        for i, v in enumerate(values):
            sel = data[data[:, 0] == v]
            if sel.size == 0:
                continue
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for l in np.unique(sel[:, 2]):
                s = sel[sel[:, 2] == l]
                ax.plot(s[:, 1], s[:, 3], label=f"l={int(l)}")
            ax.set_xlabel("t")
            ax.set_ylabel("C(l, t)")
            ax.set_title(f"{axis}={v}")
            ax.legend()
            fig.tight_layout()
            fig.savefig(out / f"p{i:03d}" / "chain_otoc.png", dpi=120)
            plt.close(fig)
    elif task in ("indicators", "chain-spectrum"):
        name = "indicators" if task == "indicators" else "spectrum"
        with open(out / f"{name}_aggregate.csv") as fh:
            header = fh.readline().strip().split(",")
        data = np.genfromtxt(out / f"{name}_aggregate.csv", delimiter=",", skip_header=1, ndmin=2)
        cols = [c for c in header if c.endswith("_mean")] + [c for c in header if c == "inv_sigma"]
        fig, axes = plt.subplots(1, len(cols), figsize=(3.2 * len(cols), 3), squeeze=False)
        for ax, c in zip(axes[0], cols):
            ax.plot(data[:, 0], data[:, header.index(c)], "o-")
            ax.set_xscale("log" if np.all(data[:, 0] > 0) else "linear")
            ax.set_xlabel(axis)
            ax.set_title(c.replace("_mean", ""))
        fig.tight_layout()
        fig.savefig(out / f"{name}.png", dpi=120)
        plt.close(fig)
