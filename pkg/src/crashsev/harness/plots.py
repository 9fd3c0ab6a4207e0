"""Figures for a finished matrix, rendered headless to image files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import BASELINE, FEATURIZERS, MODELS  # noqa: E402
from .report import best_per_view, narrative_lift  # noqa: E402

_COLORS = {"TFIDF": "#1f77b4", "W2V": "#ff7f0e", BASELINE: "#7f7f7f"}
_MARKERS = {"RF": "o", "AdaBoost": "s", "GBT": "^"}


def plot_best_per_view(results, path) -> Path:
    best = best_per_view(results)
    views = list(best)
    f1 = [best[v][1].macro_f1 for v in views]
    colors = [_COLORS[best[v][0].featurizer] for v in views]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(range(len(views)), f1, color=colors)
    ax.set_xticks(range(len(views)))
    ax.set_xticklabels(views, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("Macro F1 (test)")
    ax.set_ylim(0, 1)
    ax.set_title("Best configuration per view")
    handles = [plt.Rectangle((0, 0), 1, 1, color=_COLORS[f]) for f in (*FEATURIZERS, BASELINE)]
    ax.legend(handles, [*FEATURIZERS, "structured only"], fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_narrative_lift(results, path) -> Path | None:
    """Narrative macro F1 against the structured-only F1 of the same view and model."""
    pairs = narrative_lift(results)
    if not pairs:
        return None
    fig, ax = plt.subplots(figsize=(5, 5))
    for model in MODELS:
        for feat in FEATURIZERS:
            sel = [p for p in pairs if p.model == model and p.featurizer == feat]
            if sel:
                ax.scatter([p.baseline_f1 for p in sel], [p.narrative_f1 for p in sel],
                           marker=_MARKERS[model], color=_COLORS[feat], s=24,
                           label=f"{feat} {model}")
    lim = np.array([0.0, 1.0])
    ax.plot(lim, lim, color="k", lw=0.8, ls="--")
    ax.set_xlim(lim)
    ax.set_ylim(lim)
    ax.set_xlabel("Structured-only macro F1")
    ax.set_ylabel("With narrative features macro F1")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_iss(validation, path) -> Path:
    """Stacked ISS band shares per predicted severity."""
    from ..metrics import ISS_BINS
    from ..records import SEVERITY_DISPLAY, Severity

    cross = validation.crosstab.astype(float)
    shares = cross / np.maximum(cross.sum(axis=1, keepdims=True), 1)
    labels = [SEVERITY_DISPLAY[Severity(k)] for k in range(len(cross))]
    fig, ax = plt.subplots(figsize=(6, 4))
    bottom = np.zeros(len(cross))
    for b, name in enumerate(ISS_BINS):
        ax.bar(labels, shares[:, b], bottom=bottom, label=name)
        bottom += shares[:, b]
    ax.set_ylabel("Share of records")
    ax.set_title("ISS band by predicted severity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_figures(results, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [plot_best_per_view(results, out / "best_per_view.png")]
    lift = plot_narrative_lift(results, out / "narrative_lift.png")
    if lift is not None:
        paths.append(lift)
    return paths
