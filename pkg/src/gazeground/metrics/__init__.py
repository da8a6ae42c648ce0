"""Report scoring and aggregation.

ROUGE-L is computed natively (LCS F-measure over a pinned tokenization);
BERTScore-style neural metrics come from external scorer processes behind a
line-delimited wire protocol (see .scorers). Per-row clinical and overall
averages normalize each metric by its maximum over the comparison set and
express the result as a percentage, so 100 marks the best row per metric.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

CLINICAL_METRICS_DEFAULT = ("radgraph_xl", "ratescore")
ALL_METRICS_DEFAULT = ("rouge_l", "bertscore", "radgraph_xl", "ratescore")

# Metric names whose classification is fixed by convention; configs naming
# them on the wrong side are rejected.
LEXICAL_METRIC_NAMES = frozenset({"rouge_l", "bertscore"})
CLINICAL_METRIC_NAMES = frozenset({"radgraph_xl", "ratescore"})

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class MetricError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; no stemming."""
    return _TOKEN_RE.findall(text.lower())


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    # Two-row DP; rows indexed over b.
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS-based F1: harmonic mean of LCS/|candidate| and LCS/|reference|."""
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2.0 * precision * recall / (precision + recall)


def rouge_l_text(candidate: str, reference: str) -> float:
    return rouge_l(tokenize(candidate), tokenize(reference))


def score_candidate(
    candidate: str,
    references: Sequence[str],
    metric=rouge_l_text,
    policy: str = "max",
) -> float:
    """Aggregate a per-reference metric over multiple references (max or mean)."""
    if not references:
        raise MetricError("at least one reference required")
    if policy not in ("max", "mean"):
        raise MetricError(f"unknown multi-reference policy: {policy!r}")
    per_ref = [metric(candidate, ref) for ref in references]
    return max(per_ref) if policy == "max" else sum(per_ref) / len(per_ref)


@dataclass
class MetricRow:
    model: str
    method: str
    scores: dict[str, float] = field(default_factory=dict)
    c_avg_pct: Optional[float] = None
    a_avg_pct: Optional[float] = None

    def key(self) -> tuple[str, str]:
        return (self.model, self.method)


def normalized_averages(
    rows: Sequence[MetricRow],
    clinical: Sequence[str] = CLINICAL_METRICS_DEFAULT,
    all_metrics: Sequence[str] = ALL_METRICS_DEFAULT,
) -> list[MetricRow]:
    """Fill c_avg_pct / a_avg_pct on copies of the rows.

    Each metric is normalized by its maximum over the supplied rows (the
    comparison set), converted to a percentage, and averaged within the
    clinical and "all" sets. Metrics whose maximum is not positive carry no
    information in this scheme and are skipped with a warning.
    """
    if not rows:
        raise MetricError("no rows to normalize")
    needed = set(clinical) | set(all_metrics)
    for row in rows:
        missing = needed - set(row.scores)
        if missing:
            raise MetricError(
                f"row ({row.model}, {row.method}) is missing metric(s): {sorted(missing)}"
            )

    maxima: dict[str, float] = {}
    usable: dict[str, bool] = {}
    for name in needed:
        m = max(row.scores[name] for row in rows)
        maxima[name] = m
        usable[name] = m > 0
        if not usable[name]:
            warnings.warn(f"metric {name!r} has non-positive maximum; skipped in averages")

    def _avg(row: MetricRow, names: Sequence[str]) -> Optional[float]:
        pcts = [100.0 * row.scores[n] / maxima[n] for n in names if usable[n]]
        return sum(pcts) / len(pcts) if pcts else None

    return [
        replace(row, c_avg_pct=_avg(row, clinical), a_avg_pct=_avg(row, all_metrics))
        for row in rows
    ]


@dataclass(frozen=True)
class DeltaRow:
    model: str
    method: str
    deltas: Mapping[str, float]  # per metric, plus "c_avg_pct"/"a_avg_pct" when present


def fmt_delta(value: float, decimals: int = 4) -> str:
    return f"{value:+.{decimals}f}"


def delta_report(rows: Sequence[MetricRow], baseline_method: str = "-") -> list[DeltaRow]:
    """Per-model absolute differences from the baseline method row."""
    baselines = {row.model: row for row in rows if row.method == baseline_method}
    out: list[DeltaRow] = []
    for row in rows:
        if row.method == baseline_method:
            continue
        base = baselines.get(row.model)
        if base is None:
            raise MetricError(f"no baseline ({baseline_method!r}) row for model {row.model!r}")
        deltas = {name: row.scores[name] - base.scores[name] for name in row.scores}
        if row.c_avg_pct is not None and base.c_avg_pct is not None:
            deltas["c_avg_pct"] = row.c_avg_pct - base.c_avg_pct
        if row.a_avg_pct is not None and base.a_avg_pct is not None:
            deltas["a_avg_pct"] = row.a_avg_pct - base.a_avg_pct
        out.append(DeltaRow(model=row.model, method=row.method, deltas=deltas))
    out.sort(key=lambda d: (d.model, d.method))
    return out
