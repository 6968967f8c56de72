"""Report figures. Every function renders one PNG next to the text output.

All plotting is headless (Agg); paths come back so callers can log them.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first
import numpy as np  # noqa: E402

_LOSS_COLORS = {"l_sw": "#1f77b4", "l_wp": "#2ca02c", "l_ap": "#d62728",
                "total": "#333333"}


def save_lexicon_figure(path, lexicon, top_k: int = 15) -> str:
    """Horizontal bars: strongest positive and negative mined words."""
    entries = sorted(lexicon.entries.values(), key=lambda e: (-e.score, e.word))
    pos = [e for e in entries if e.score > 0][:top_k]
    neg = [e for e in entries[::-1] if e.score < 0][:top_k]
    rows = list(reversed(pos)) + neg
    words = [e.word + (" *" if e.is_seed else "") for e in rows]
    scores = [e.score for e in rows]
    colors = ["#2ca02c" if s > 0 else "#d62728" for s in scores]

    fig, ax = plt.subplots(figsize=(7, max(3, 0.28 * len(rows))))
    ax.barh(np.arange(len(rows)), scores, color=colors)
    ax.set_yticks(np.arange(len(rows)))
    ax.set_yticklabels(words, fontsize=8)
    ax.axvline(0, color="#444444", linewidth=0.8)
    ax.set_xlabel("polarity score")
    ax.set_title(f"mined lexicon: top {top_k} per polarity (* = seed)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_mask_stats_figure(path, stats) -> str:
    """Composition of masking decisions plus the corruption branch mix."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))

    cats = ("pairs_masked", "step2_positions", "step3_positions")
    vals = [getattr(stats, c, 0) for c in cats]
    ax1.bar(range(len(cats)), vals, color=["#9467bd", "#1f77b4", "#8c8c8c"])
    ax1.set_xticks(range(len(cats)))
    ax1.set_xticklabels(["pairs", "sentiment\nword tokens", "common\ntokens"], fontsize=9)
    ax1.set_ylabel("count")
    ax1.set_title("masking decisions by class")

    branches = ("branch_mask", "branch_random", "branch_keep")
    bvals = np.array([getattr(stats, b, 0) for b in branches], dtype=float)
    tot = bvals.sum()
    frac = bvals / tot if tot else bvals
    ax2.bar(range(3), frac, color=["#333333", "#ff7f0e", "#2ca02c"])
    for i, f in enumerate(frac):
        ax2.text(i, f + 0.01, f"{f:.3f}", ha="center", fontsize=9)
    ax2.set_xticks(range(3))
    ax2.set_xticklabels(["[MASK]", "random", "keep"], fontsize=9)
    ax2.set_ylim(0, 1.0)
    ax2.set_title("common-token corruption mix")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_loss_curves(path, log_rows) -> str:
    """Training curves from (step, l_sw, l_wp, l_ap, total, lr) rows."""
    if not log_rows:
        raise ValueError("no log rows to plot")
    arr = np.asarray([r[:5] for r in log_rows], dtype=float)
    steps = arr[:, 0]
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, name in enumerate(("l_sw", "l_wp", "l_ap", "total"), start=1):
        ax.plot(steps, arr[:, i], label=name, color=_LOSS_COLORS[name],
                linewidth=1.2 if name != "total" else 1.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title("pre-training objectives")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_dev_curves(path, histories, metric_name: str = "dev accuracy") -> str:
    """Per-seed fine-tuning curves from {seed: [(epoch, loss, dev), ...]}."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for seed, hist in sorted(histories.items()):
        h = np.asarray(hist, dtype=float)
        ax.plot(h[:, 0], h[:, 2], marker="o", markersize=3, label=f"seed {seed}")
    ax.set_xlabel("epoch")
    ax.set_ylabel(metric_name)
    ax.set_ylim(0, 1.02)
    ax.set_title("fine-tuning dev performance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_attention_figure(path, weights, tokens, layer: int = -1) -> str:
    """Heat map of [CLS] attention per head. weights: (layers, heads, T, T)."""
    w = np.asarray(weights)
    if w.ndim != 4:
        raise ValueError(f"expected (layers, heads, T, T), got {w.shape}")
    rows = w[layer, :, 0, : len(tokens)]  # what [CLS] looks at, per head
    n_heads = rows.shape[0]
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(tokens)), 1.0 + 0.6 * n_heads))
    im = ax.imshow(rows, aspect="auto", cmap="viridis", vmin=0.0)
    ax.set_yticks(range(n_heads))
    ax.set_yticklabels([f"head {h}" for h in range(n_heads)], fontsize=8)
    ax.set_xticks(range(len(tokens)))
    ax.set_xticklabels(tokens, rotation=60, ha="right", fontsize=7)
    ax.set_title("attention from [CLS]")
    fig.colorbar(im, ax=ax, fraction=0.03)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
