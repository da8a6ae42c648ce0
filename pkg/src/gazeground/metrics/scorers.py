"""External scorer protocol: neural metrics run out of process.

Wire format, one JSON object per UTF-8 line:

    request:  {"id": <string>, "candidate": <string>, "references": [<string>...]}
    response: {"id": <string>, "score": <number>}

carried either over a subprocess's standard streams or over HTTP POST
/score (request body and response body are the same line format).
Responses may arrive in any order; they are re-matched by id.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from typing import Optional, Sequence

import requests

from . import CLINICAL_METRIC_NAMES, LEXICAL_METRIC_NAMES, MetricError


class ScorerError(MetricError):
    """Scorer failure; any scores received before the failure are kept in .partial."""

    def __init__(self, message: str, partial: Optional[dict[str, float]] = None):
        super().__init__(message)
        self.partial = partial or {}


@dataclass
class ScorerSpec:
    metric: str
    transport: str  # "subprocess" | "http"
    command: Sequence[str] = field(default_factory=list)  # subprocess transport
    url: str = ""  # http transport
    batch_size: int = 64
    classification: str = "clinical"  # "clinical" | "lexical"
    timeout_s: float = 120.0

    def __post_init__(self) -> None:
        if self.transport not in ("subprocess", "http"):
            raise MetricError(f"unknown scorer transport: {self.transport!r}")
        if self.transport == "subprocess" and not self.command:
            raise MetricError(f"scorer {self.metric!r}: subprocess transport needs a command")
        if self.transport == "http" and not self.url:
            raise MetricError(f"scorer {self.metric!r}: http transport needs a url")
        if self.classification not in ("clinical", "lexical"):
            raise MetricError(f"scorer {self.metric!r}: bad classification {self.classification!r}")
        if self.metric in CLINICAL_METRIC_NAMES and self.classification != "clinical":
            raise MetricError(f"{self.metric} must be classified clinical")
        if self.metric in LEXICAL_METRIC_NAMES and self.classification != "lexical":
            raise MetricError(f"{self.metric} must be classified lexical")


def _encode_requests(items: Sequence[tuple[str, Sequence[str]]], start: int) -> tuple[str, list[str]]:
    lines = []
    ids = []
    for offset, (candidate, references) in enumerate(items):
        rid = f"item-{start + offset:06d}"
        ids.append(rid)
        lines.append(
            json.dumps(
                {"id": rid, "candidate": candidate, "references": list(references)},
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n", ids


def _decode_responses(text: str, expected_ids: Sequence[str], partial: dict[str, float]) -> None:
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            rid = obj["id"]
            score = float(obj["score"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerError(f"malformed scorer response line: {line[:120]!r} ({exc})", partial)
        if rid in partial:
            raise ScorerError(f"duplicate response id {rid!r}", partial)
        partial[rid] = score
    unknown = set(partial) - set(expected_ids)
    if unknown:
        raise ScorerError(f"scorer returned unknown id(s): {sorted(unknown)[:3]}", partial)


def invoke_external_scorer(
    spec: ScorerSpec, batch: Sequence[tuple[str, Sequence[str]]]
) -> list[float]:
    """Score each (candidate, references) item; result order matches the input."""
    if not batch:
        return []
    partial: dict[str, float] = {}
    all_ids: list[str] = []
    for chunk_start in range(0, len(batch), spec.batch_size):
        chunk = batch[chunk_start : chunk_start + spec.batch_size]
        body, ids = _encode_requests(chunk, chunk_start)
        all_ids.extend(ids)
        if spec.transport == "subprocess":
            try:
                proc = subprocess.run(
                    list(spec.command),
                    input=body.encode("utf-8"),
                    capture_output=True,
                    timeout=spec.timeout_s,
                )
            except subprocess.TimeoutExpired:
                raise ScorerError(f"scorer {spec.metric!r} timed out", partial)
            if proc.returncode != 0:
                stderr = proc.stderr.decode("utf-8", "replace")[:200]
                raise ScorerError(
                    f"scorer {spec.metric!r} exited {proc.returncode}: {stderr}", partial
                )
            _decode_responses(proc.stdout.decode("utf-8"), all_ids, partial)
        else:
            try:
                resp = requests.post(
                    spec.url.rstrip("/") + "/score",
                    data=body.encode("utf-8"),
                    headers={"Content-Type": "application/x-ndjson"},
                    timeout=spec.timeout_s,
                )
            except requests.RequestException as exc:
                raise ScorerError(f"scorer {spec.metric!r} unreachable: {exc}", partial)
            if resp.status_code != 200:
                raise ScorerError(
                    f"scorer {spec.metric!r} HTTP {resp.status_code}", partial
                )
            _decode_responses(resp.text, all_ids, partial)

    missing = [rid for rid in all_ids if rid not in partial]
    if missing:
        raise ScorerError(
            f"scorer {spec.metric!r} returned {len(partial)}/{len(all_ids)} scores; "
            f"missing {missing[:3]}",
            partial,
        )
    return [partial[rid] for rid in all_ids]
