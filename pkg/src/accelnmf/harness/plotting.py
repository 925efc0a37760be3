"""Static figures written next to the CSV outputs."""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def new_figure(width=6.0):
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def plot_curves(curves, path, title=None, floor=1e-6):
    """Mean E(t) per configuration on a log axis, with the seed min/max band."""
    fig, ax = new_figure()
    for label, curve in curves.items():
        mean = curve.mean.clip(min=floor)
        line, = ax.step(curve.t, mean, where="post", label=label, lw=1.2)
        ax.fill_between(curve.t, curve.min.clip(min=floor), curve.max.clip(min=floor),
                        step="post", color=line.get_color(), alpha=0.15, lw=0)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("E(t)")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trace(trace, path):
    """Raw error against time for a single run."""
    fig, ax = new_figure()
    ax.plot(trace.elapsed, trace.errors, marker=".", ms=3, lw=1)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("||M - WH||_F")
    ax.set_title(trace.config.label, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
