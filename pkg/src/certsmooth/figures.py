"""Matplotlib renderings of the report outputs, written next to the CSVs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_MODE_STYLE = {"standard": "tab:blue", "cc": "tab:orange", "ncl": "tab:green"}


def save_accuracy_curves(rows, path) -> None:
    """Certified accuracy vs radius, one stepped curve per mode."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    modes = []
    for mode, _, _ in rows:
        if mode not in modes:
            modes.append(mode)
    for mode in modes:
        pts = sorted((r, acc) for m, r, acc in rows if m == mode)
        ax.plot([r for r, _ in pts], [a for _, a in pts], drawstyle="steps-post",
                marker="o", ms=3, color=_MODE_STYLE.get(mode), label=mode)
    ax.set_xlabel("radius")
    ax.set_ylabel("certified accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_label_histogram(hist, path) -> None:
    """Bar chart of distinct-label counts per sample, grouped by mode."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    modes = sorted(hist)
    all_bins = sorted({b for counts in hist.values() for b in counts})
    width = 0.8 / max(1, len(modes))
    for j, mode in enumerate(modes):
        xs = [b + (j - (len(modes) - 1) / 2) * width for b in all_bins]
        ys = [hist[mode].get(b, 0) for b in all_bins]
        ax.bar(xs, ys, width=width, color=_MODE_STYLE.get(mode), label=mode)
    ax.set_xlabel("distinct labels in selection stage")
    ax.set_ylabel("samples")
    ax.set_xticks(all_bins)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ood_scatter(frac_id, frac_ood, path) -> None:
    """Shifted-data fraction (x) against in-distribution fraction (y)."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    id_vals = frac_id.as_dict()
    ood_vals = frac_ood.as_dict()
    for name in id_vals:
        ax.scatter(ood_vals[name], id_vals[name], label=name.replace("_", " "), s=45)
    ax.plot([0, 1], [0, 1], ls=":", color="gray", lw=1)
    ax.set_xlabel("fraction on shifted data")
    ax.set_ylabel("fraction on in-distribution data")
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=7, loc="upper left", bbox_to_anchor=(1.02, 1.0))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_calibration_trace(trace, theta, path) -> None:
    """Accuracy over the threshold sweep with the selected threshold marked."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    xs = [t for t, _ in trace]
    ys = [a for _, a in trace]
    ax.plot(xs, ys, color="tab:blue")
    ax.axvline(theta, color="tab:red", ls="--", lw=1, label=f"theta={theta:.4g}")
    ax.set_xlabel("threshold")
    ax.set_ylabel("majority-vote accuracy")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
