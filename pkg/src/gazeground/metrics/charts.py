"""Result tables and comparison charts.

Charts are grouped bars of overall-average differences: the combined
grounding method against each single-cue method, per model, mirroring the
"is both better than either" question. SVG output is pinned to a fixed
hash salt and stripped of date metadata so identical inputs give identical
bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "gazeground"

import matplotlib.pyplot as plt

from . import DeltaRow, MetricRow, fmt_delta

_SVG_METADATA = {"Date": None, "Creator": None}

# Pairwise questions charted per model: combined method vs each single cue.
COMPARISONS = (
    ("L&M", "L"),
    ("L&M", "M"),
    ("I&L&M", "I&L"),
    ("I&L&M", "I&M"),
)


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-._" else "_" for c in name)


def format_results_table(rows: Sequence[MetricRow], metric_names: Sequence[str],
                         baseline_method: str = "-") -> str:
    """Fixed-width table, one row per (model, method), delta row in parens under
    each non-baseline method."""
    headers = ["Model", "Method"] + [m for m in metric_names] + ["C.AVG(%)", "A.AVG(%)"]
    widths = [14, 7] + [10] * len(metric_names) + [9, 9]

    def _line(cells: Sequence[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = [_line(headers), _line(["-" * w for w in widths])]
    baselines = {r.model: r for r in rows if r.method == baseline_method}
    for row in rows:
        cells = [row.model, row.method]
        cells += [f"{row.scores[m]:.4f}" for m in metric_names]
        cells += [
            f"{row.c_avg_pct:.2f}" if row.c_avg_pct is not None else "-",
            f"{row.a_avg_pct:.2f}" if row.a_avg_pct is not None else "-",
        ]
        lines.append(_line(cells))
        base = baselines.get(row.model)
        if base is not None and row.method != baseline_method:
            deltas = [f"({fmt_delta(row.scores[m] - base.scores[m])})" for m in metric_names]
            agg = []
            for mine, theirs in ((row.c_avg_pct, base.c_avg_pct), (row.a_avg_pct, base.a_avg_pct)):
                agg.append(f"({fmt_delta(mine - theirs, 2)})" if mine is not None and theirs is not None else "")
            lines.append(_line(["", ""] + deltas + agg))
    return "\n".join(lines) + "\n"


def write_results_tsv(rows: Sequence[MetricRow], metric_names: Sequence[str],
                      path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(["model", "method"] + list(metric_names) + ["c_avg_pct", "a_avg_pct"]) + "\n")
        for row in rows:
            cells = [row.model, row.method]
            cells += [f"{row.scores[m]:.6f}" for m in metric_names]
            cells += [
                f"{row.c_avg_pct:.4f}" if row.c_avg_pct is not None else "",
                f"{row.a_avg_pct:.4f}" if row.a_avg_pct is not None else "",
            ]
            fh.write("\t".join(cells) + "\n")


def write_delta_tsv(deltas: Sequence[DeltaRow], metric_names: Sequence[str],
                    path: str | Path) -> None:
    path = Path(path)
    cols = list(metric_names) + ["c_avg_pct", "a_avg_pct"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(["model", "method"] + cols) + "\n")
        for d in deltas:
            cells = [d.model, d.method]
            cells += [fmt_delta(d.deltas[c]) if c in d.deltas else "" for c in cols]
            fh.write("\t".join(cells) + "\n")


def _pairwise_gaps(deltas: Sequence[DeltaRow]) -> list[tuple[str, str, float]]:
    """(model, 'A vs B', a_avg gap) for every comparison both of whose methods exist.

    Baseline deltas cancel, so delta(A) - delta(B) equals avg(A) - avg(B).
    """
    by_key = {(d.model, d.method): d for d in deltas}
    models = sorted({d.model for d in deltas})
    gaps = []
    for model in models:
        for left, right in COMPARISONS:
            a = by_key.get((model, left))
            b = by_key.get((model, right))
            if a is None or b is None:
                continue
            if "a_avg_pct" not in a.deltas or "a_avg_pct" not in b.deltas:
                continue
            gaps.append((model, f"{left} vs {right}", a.deltas["a_avg_pct"] - b.deltas["a_avg_pct"]))
    return gaps


def emit_charts(deltas: Sequence[DeltaRow], out_dir: str | Path) -> list[Path]:
    """Write per-model comparison charts (SVG) plus the underlying data table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gaps = _pairwise_gaps(deltas)
    written: list[Path] = []

    data_path = out_dir / "comparison_data.tsv"
    with open(data_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("model\tcomparison\ta_avg_gap_pct\n")
        for model, label, gap in gaps:
            fh.write(f"{model}\t{label}\t{gap:.4f}\n")
    written.append(data_path)

    def _render(model: Optional[str], items: list[tuple[str, float]], path: Path) -> None:
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        if items:
            labels = [lbl for lbl, _ in items]
            values = [val for _, val in items]
            colors = ["#2a9d8f" if v >= 0 else "#e63946" for v in values]
            ax.bar(range(len(items)), values, color=colors)
            ax.set_xticks(range(len(items)))
            ax.set_xticklabels(labels, fontsize=8)
            ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_ylabel("overall average gap (pp)")
        ax.set_title(model if model else "no comparisons available")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)
        plt.close(fig)

    if not gaps:
        empty_path = out_dir / "comparison.svg"
        _render(None, [], empty_path)
        written.append(empty_path)
        return written

    for model in sorted({g[0] for g in gaps}):
        items = [(label, gap) for m, label, gap in gaps if m == model]
        path = out_dir / f"comparison_{_slug(model)}.svg"
        _render(model, items, path)
        written.append(path)
    return written
