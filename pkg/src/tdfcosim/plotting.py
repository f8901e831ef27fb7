"""Figures for a trace directory: per-cluster waveforms and GPIO traffic.

Everything is read back from the files ``simulate`` wrote, so figures can
be regenerated later without rerunning the model.
"""

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .modelio import read_stats, read_trace_csv  # noqa: E402
from .simtime import MS  # noqa: E402

FIGURE_DIR = "figures"
STYLE = {
    "figure.dpi": 100,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 100,
}
MAX_SAMPLES = 400


def _save(fig, path):
    # no Software tag: PNG bytes stay stable across matplotlib versions
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _traces_by_cluster(directory):
    groups = defaultdict(list)
    for fname in sorted(os.listdir(directory)):
        if fname.endswith(".csv"):
            name = fname[:-4]
            groups[name.split(".", 1)[0]].append(name)
    return groups


def plot_waveforms(directory, cluster, names, out_dir, max_samples=MAX_SAMPLES):
    """Stacked step plots, one axis per trace, time axis in ms."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(names), 1, sharex=True, squeeze=False,
                                 figsize=(8, 1.6 * len(names) + 0.8))
        for ax, name in zip(axes[:, 0], names):
            samples = read_trace_csv(os.path.join(directory, f"{name}.csv"))[:max_samples]
            if samples:
                t = [s[0] / MS for s in samples]
                v = [float(s[1]) for s in samples]
                ax.step(t, v, where="post", lw=0.9)
                ax.plot(t, v, ".", ms=2)
            ax.set_ylabel(name.split(".", 1)[1], rotation=0, ha="right", fontsize=7)
        axes[-1, 0].set_xlabel("time [ms]")
        fig.suptitle(f"cluster {cluster}")
        fig.tight_layout()
        return _save(fig, os.path.join(out_dir, f"waveforms_{cluster}.png"))


def plot_gpio_traffic(stats, out_dir):
    """Grouped bars: samples pushed by TDF vs popped by tasks, per endpoint."""
    gpio = stats.get("gpio", {})
    if not gpio:
        return None
    names = list(gpio)
    pushes = [gpio[n]["pushes"] for n in names]
    pops = [gpio[n]["pops"] for n in names]
    x = range(len(names))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(names) + 2), 3.5))
        ax.bar([i - 0.2 for i in x], pushes, width=0.4, label="pushes")
        ax.bar([i + 0.2 for i in x], pops, width=0.4, label="pops")
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel("samples")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, os.path.join(out_dir, "gpio_traffic.png"))


def render_figures(directory):
    """Write all figures under ``<directory>/figures``; returns the paths."""
    out_dir = os.path.join(directory, FIGURE_DIR)
    os.makedirs(out_dir, exist_ok=True)
    paths = [plot_waveforms(directory, c, names, out_dir)
             for c, names in sorted(_traces_by_cluster(directory).items())]
    if os.path.exists(os.path.join(directory, "stats.txt")):
        p = plot_gpio_traffic(read_stats(directory), out_dir)
        if p:
            paths.append(p)
    return paths
