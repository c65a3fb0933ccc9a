"""Figure emitters: render the run's CSV reports to SVG files.

Figures are always rendered from the persisted CSVs, so re-plotting a run
directory reproduces them without re-simulating anything.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .reports import read_rows  # noqa: E402

LAYER_ORDER = ("formants", "tde", "ei1", "ei2")
LAYER_LABELS = {"formants": "Formants", "tde": "TDE", "ei1": "E-I layer 1", "ei2": "E-I layer 2"}
LAYER_COLORS = {"formants": "tab:gray", "tde": "tab:orange", "ei1": "tab:blue", "ei2": "tab:green"}
KEYWORD_STYLES = ("-", "--", ":", "-.")


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _float(v):
    return float(v)


def plot_importance(rows, path, architecture="all"):
    """Per-layer importance profiles, units sorted by importance within each
    layer; one offset curve per keyword."""
    rows = [r for r in rows if r["architecture"] == architecture]
    keywords = sorted({r["keyword"] for r in rows})
    fig, ax = plt.subplots(figsize=(8, 4.5))
    x_base = 0
    ticks, tick_labels = [], []
    for layer in LAYER_ORDER:
        layer_rows = [r for r in rows if r["layer"] == layer]
        if not layer_rows:
            continue
        width = len({r["unit"] for r in layer_rows})
        for ki, kw in enumerate(keywords):
            vals = sorted((_float(r["importance_mean"]) for r in layer_rows
                           if r["keyword"] == kw), reverse=True)
            x = x_base + np.arange(len(vals)) + 10 * ki
            ax.plot(x, vals, linestyle=KEYWORD_STYLES[ki % len(KEYWORD_STYLES)],
                    color=LAYER_COLORS[layer],
                    label=LAYER_LABELS[layer] if ki == 0 else None)
        ticks.append(x_base + width / 2)
        tick_labels.append(LAYER_LABELS[layer])
        x_base += width + 10 * len(keywords) + 15
        ax.axvline(x_base - 8, color="0.8", linewidth=0.8)
    ax.set_xticks(ticks)
    ax.set_xticklabels(tick_labels)
    ax.set_ylabel("Permutation importance (accuracy drop)")
    ax.set_title("Sorted permutation importance per layer "
                 f"(keywords: {', '.join(str(k) for k in keywords)})")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_accuracy(rows, path, split="train"):
    """Grouped bars: classification accuracy per architecture and keyword."""
    rows = [r for r in rows if r["split"] == split]
    archs = sorted({r["architecture"] for r in rows},
                   key=lambda a: ["formants", "ei1", "tde", "ei2", "all"].index(a))
    keywords = sorted({r["keyword"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(1, len(keywords))
    for ki, kw in enumerate(keywords):
        vals = []
        for arch in archs:
            match = [r for r in rows if r["architecture"] == arch and r["keyword"] == kw]
            vals.append(_float(match[0]["accuracy"]) if match else np.nan)
        ax.bar(np.arange(len(archs)) + ki * width, vals, width=width, label=f"keyword {kw}")
    ax.axhline(0.5, color="0.6", linewidth=0.8, linestyle="--")
    ax.set_xticks(np.arange(len(archs)) + 0.4 - width / 2)
    ax.set_xticklabels(archs)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel(f"{split} accuracy")
    ax.set_title(f"Linear readout accuracy per architecture ({split} split)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_single_neuron(single_rows, spike_rows, path):
    """Best single unit per layer: test accuracy split into true-positive and
    true-negative shares, plus its mean spikes per utterance."""
    keywords = sorted({r["keyword"] for r in single_rows})
    fig, (ax_acc, ax_spk) = plt.subplots(2, 1, figsize=(7, 6))
    positions, labels = [], []
    pos = 0
    for kw in keywords:
        for layer in LAYER_ORDER:
            cand = [r for r in single_rows if r["keyword"] == kw and r["layer"] == layer]
            if not cand:
                continue
            best = max(cand, key=lambda r: (_float(r["train_accuracy"]), -int(r["unit"])))
            acc = _float(best["test_accuracy"])
            tp = _float(best["tp_share"])
            tn = _float(best["tn_share"])
            if np.isnan(tp):
                tp, tn = 0.0, 0.0
            color = LAYER_COLORS[layer]
            ax_acc.bar(pos, acc * tp, color=color, alpha=0.5)
            ax_acc.bar(pos, acc * tn, bottom=acc * tp, color=color)
            spk = [r for r in spike_rows
                   if r["keyword"] == kw and r["layer"] == layer
                   and r["unit"] == best["unit"]]
            if spk:
                ax_spk.errorbar(pos, _float(spk[0]["mean_spikes"]),
                                yerr=_float(spk[0]["std_spikes"]),
                                fmt="o", color=color, capsize=3)
            positions.append(pos)
            labels.append(f"{kw}:{LAYER_LABELS[layer]}")
            pos += 1
        pos += 1
    for ax in (ax_acc, ax_spk):
        ax.set_xticks(positions)
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax_acc.axhline(0.5, color="0.6", linewidth=0.8, linestyle="--")
    ax_acc.set_ylabel("test accuracy\n(light = TP share, dark = TN share)")
    ax_acc.set_title("Best single unit per layer")
    ax_spk.set_ylabel("spikes per utterance")
    fig.tight_layout()
    _save(fig, path)


def plot_few_neuron(rows, path):
    """Test accuracy vs readout size, one panel per keyword, line per layer."""
    keywords = sorted({r["keyword"] for r in rows})
    n = len(keywords)
    ncols = min(2, n)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5 * ncols, 3.5 * nrows),
                             squeeze=False)
    for i, kw in enumerate(keywords):
        ax = axes[i // ncols][i % ncols]
        for layer in LAYER_ORDER:
            pts = sorted(((int(r["k"]), _float(r["test_accuracy"])) for r in rows
                          if r["keyword"] == kw and r["layer"] == layer))
            if pts:
                ks, accs = zip(*pts)
                ax.plot(ks, accs, marker="o", markersize=3,
                        color=LAYER_COLORS[layer], label=LAYER_LABELS[layer])
        ax.axhline(0.5, color="0.6", linewidth=0.8, linestyle="--")
        ax.set_title(f"keyword {kw}")
        ax.set_xlabel("number of read-out units")
        ax.set_ylabel("test accuracy")
        ax.set_ylim(0, 1.05)
        ax.legend(fontsize=7)
    for j in range(n, nrows * ncols):
        axes[j // ncols][j % ncols].axis("off")
    fig.tight_layout()
    _save(fig, path)


def render_run(run_dir, cfg_hash=None):
    """Render every figure for a completed run directory from its CSVs."""
    run_dir = Path(run_dir)
    if cfg_hash is not None:
        matplotlib.rcParams["svg.hashsalt"] = cfg_hash
    _, imp_rows = read_rows(run_dir / "importance.csv")
    plot_importance(imp_rows, run_dir / "importance.svg")
    _, acc_rows = read_rows(run_dir / "accuracy.csv")
    plot_accuracy(acc_rows, run_dir / "accuracy_train.svg", split="train")
    plot_accuracy(acc_rows, run_dir / "accuracy_test.svg", split="test")
    _, single_rows = read_rows(run_dir / "single_neuron.csv")
    _, spike_rows = read_rows(run_dir / "spikes_per_utterance.csv")
    plot_single_neuron(single_rows, spike_rows, run_dir / "single_neuron.svg")
    _, few_rows = read_rows(run_dir / "few_neuron.csv")
    plot_few_neuron(few_rows, run_dir / "few_neuron.svg")
    return [run_dir / name for name in
            ("importance.svg", "accuracy_train.svg", "accuracy_test.svg",
             "single_neuron.svg", "few_neuron.svg")]
