"""Evaluation report files: per-example TSV, metrics JSON and a bar chart."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evalharness import Metrics


def metrics_json(metrics: Metrics) -> str:
    # sorted keys and fixed separators keep repeated runs byte-identical
    return json.dumps(metrics.to_json(), sort_keys=True, indent=2) + "\n"


def write_report(metrics: Metrics, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "metrics.json", "tsv": out / "per_example.tsv", "png": out / "metrics.png"}
    paths["json"].write_text(metrics_json(metrics), encoding="utf-8")
    with open(paths["tsv"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["id", "query_em", "answer_em", "answer_f1", "note"])
        for s in metrics.per_example:
            w.writerow([s.id, int(s.query_em), "" if s.answer_em is None else int(s.answer_em),
                        "" if s.answer_f1 is None else f"{s.answer_f1:.4f}", s.note])
    plot_metrics(metrics, paths["png"])
    return paths


def plot_metrics(metrics: Metrics, path: str | Path) -> None:
    names = ["query EM"]
    values = [metrics.query_em]
    if metrics.answer_em is not None:
        names += ["answer EM", "answer F1"]
        values += [metrics.answer_em, metrics.answer_f1]
    fig, ax = plt.subplots(figsize=(4.5, 3.2), dpi=100)
    bars = ax.bar(names, [100 * v for v in values], color=["#4c72b0", "#55a868", "#c44e52"][: len(values)])
    for b, v in zip(bars, values):
        ax.annotate(f"{100 * v:.1f}", (b.get_x() + b.get_width() / 2, b.get_height()),
                    ha="center", va="bottom", fontsize=9)
    ax.set_ylim(0, 105)
    ax.set_ylabel("%")
    ax.set_title(f"{metrics.mode} (n={metrics.n})")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
