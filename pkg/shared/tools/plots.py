"""SVG figures rendered from the run tables."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "qclab"

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_series(
    path: Path,
    frame: pd.DataFrame,
    x: str,
    ys: list[str],
    title: str = "",
    logx: bool = False,
    logy: bool = False,
) -> Path:
    """Line plot of the `ys` columns against `x`."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for column in ys:
        ax.plot(frame[x], frame[column], marker="o", label=column)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if len(ys) > 1:
        ax.legend()
    return _save(fig, path)


def plot_potentials(path: Path, x, curves: dict, title: str = "") -> Path:
    """Overlay 1D potential curves sampled on the same axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in curves.items():
        ax.plot(x, values, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("V")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
