"""Static figures written next to run artifacts."""
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 150


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_loss_curves(epochs: List[Dict[str, float]], path: Path, title: str = "") -> Path:
    """One line per loss term from the epoch-mean rows of a training record."""
    fig, ax = plt.subplots(figsize=(7, 4))
    keys = [k for k in ("d_loss", "g_loss", "e_loss", "recon_x", "recon_z", "kl", "ce", "total")
            if any(k in row for row in epochs)]
    for k in keys:
        xs = [row["epoch"] for row in epochs if k in row]
        ax.plot(xs, [row[k] for row in epochs if k in row], label=k)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    if title:
        ax.set_title(title)
    if keys:
        ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_confusion(confusion: np.ndarray, path: Path, class_names: Optional[Sequence[str]] = None,
                   title: str = "") -> Path:
    cm = np.asarray(confusion)
    K = cm.shape[0]
    names = list(class_names) if class_names else [str(k) for k in range(K)]
    row_sums = cm.sum(axis=1, keepdims=True)
    share = np.divide(cm, row_sums, out=np.zeros(cm.shape, dtype=float), where=row_sums > 0)

    fig, ax = plt.subplots(figsize=(0.6 * K + 2.5, 0.6 * K + 2))
    im = ax.imshow(share, cmap="Blues", vmin=0.0, vmax=1.0)
    for i in range(K):
        for j in range(K):
            ax.text(j, i, str(cm[i, j]), ha="center", va="center", fontsize=7,
                    color="white" if share[i, j] > 0.5 else "black")
    ax.set_xticks(range(K), names, rotation=45, ha="right")
    ax.set_yticks(range(K), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    return _save(fig, path)


def _is_image(values: np.ndarray) -> bool:
    return values.ndim == 3 and values.shape[1] == values.shape[2]


def plot_digit_grid(values: np.ndarray, path: Path, ncols: int = 8) -> Path:
    """Grayscale grid of (n, W, W) sequences, each row-per-timestep back into an image."""
    n = len(values)
    nrows = max(1, int(np.ceil(n / ncols)))
    fig, axes = plt.subplots(nrows, ncols, figsize=(ncols, nrows), squeeze=False)
    for i, ax in enumerate(axes.flat):
        ax.axis("off")
        if i < n:
            ax.imshow(values[i].T, cmap="gray", vmin=-1.0, vmax=1.0)
    return _save(fig, path)


def plot_windows(values: np.ndarray, path: Path, ncols: int = 4) -> Path:
    """Per-channel traces of (n, D, W) windows."""
    n = len(values)
    nrows = max(1, int(np.ceil(n / ncols)))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 2 * nrows), squeeze=False, sharey=True)
    for i, ax in enumerate(axes.flat):
        if i >= n:
            ax.axis("off")
            continue
        for trace in values[i]:
            ax.plot(trace, linewidth=0.8)
        ax.set_ylim(-1.05, 1.05)
    return _save(fig, path)


def plot_samples(values: np.ndarray, path: Path) -> Path:
    return plot_digit_grid(values, path) if _is_image(values) else plot_windows(values, path)


def plot_reconstruction_pairs(originals: np.ndarray, reconstructions: np.ndarray, path: Path,
                              ncols: int = 8) -> Path:
    """Odd rows show originals, even rows their reconstructions."""
    if originals.shape != reconstructions.shape:
        raise ValueError(f"shape mismatch {originals.shape} vs {reconstructions.shape}")
    n = len(originals)
    blocks = int(np.ceil(n / ncols))
    interleaved = []
    for b in range(blocks):
        chunk = slice(b * ncols, (b + 1) * ncols)
        for source in (originals, reconstructions):
            row = list(source[chunk])
            row += [None] * (ncols - len(row))
            interleaved.extend(row)

    image = _is_image(originals)
    fig, axes = plt.subplots(2 * blocks, ncols, figsize=(ncols * (1 if image else 2.5), 2 * blocks * (1 if image else 1.5)),
                             squeeze=False)
    for ax, v in zip(axes.flat, interleaved):
        ax.axis("off")
        if v is None:
            continue
        if image:
            ax.imshow(v.T, cmap="gray", vmin=-1.0, vmax=1.0)
        else:
            for trace in v:
                ax.plot(trace, linewidth=0.8)
            ax.set_ylim(-1.05, 1.05)
    return _save(fig, path)


def plot_sweep(summary: List[Dict[str, float]], path: Path, label: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [s["fraction"] * 100 for s in summary]
    means = np.array([s["mean"] for s in summary])
    stds = np.array([s["std"] for s in summary])
    ax.plot(xs, means, marker="o", label=label or None)
    ax.fill_between(xs, means - stds, means + stds, alpha=0.2)
    ax.set_xscale("log")
    ax.set_xlabel("labelled training data (%)")
    ax.set_ylabel("test accuracy")
    if label:
        ax.legend(frameon=False)
    return _save(fig, path)


def plot_ablation(arms: List[dict], path: Path) -> Path:
    fig, (ax_acc, ax_cyc) = plt.subplots(1, 2, figsize=(10, 4))
    for arm in arms:
        curve = arm["curve"]
        epochs = [r["epoch"] for r in curve]
        ax_acc.plot(epochs, [r["accuracy"] for r in curve], marker="o", label=arm["name"])
        ax_cyc.plot(epochs, [r.get("cycle_error", np.nan) for r in curve], marker="o", label=arm["name"])
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("probe accuracy")
    ax_cyc.set_xlabel("epoch")
    ax_cyc.set_ylabel("cycle error")
    ax_cyc.set_yscale("log")
    ax_acc.legend(frameon=False)
    return _save(fig, path)
