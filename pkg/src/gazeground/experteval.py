"""Blinded expert error review: sessions, annotations, summaries, agreement.

Generated reports are shuffled into opaque items; each reviewer walks a
seeded private ordering and counts clinically significant errors in five
categories. Served payloads never carry model, method, or study identity;
the unblinding map lives in a separate file and is consulted only when
summarizing. Inter-reviewer agreement is Krippendorff's alpha over per-item
total error counts, interval level by default.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .timeutil import now_iso

ERROR_CATEGORIES = (
    "false_prediction",
    "omission",
    "wrong_location",
    "wrong_severity",
    "absent_comparison",
)


class EvalError(Exception):
    pass


class UnknownItemError(EvalError):
    pass


class DuplicateAnnotationError(EvalError):
    pass


@dataclass(frozen=True)
class ErrorCounts:
    false_prediction: int = 0
    omission: int = 0
    wrong_location: int = 0
    wrong_severity: int = 0
    absent_comparison: int = 0

    def __post_init__(self) -> None:
        for name in ERROR_CATEGORIES:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    def total(self) -> int:
        return sum(getattr(self, name) for name in ERROR_CATEGORIES)


@dataclass(frozen=True)
class AnnotationRecord:
    session_id: str
    annotator_id: str
    item_id: str
    counts: ErrorCounts
    submitted_at: str

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "AnnotationRecord":
        d = json.loads(text)
        return cls(
            session_id=d["session_id"],
            annotator_id=d["annotator_id"],
            item_id=d["item_id"],
            counts=ErrorCounts(**d["counts"]),
            submitted_at=d["submitted_at"],
        )


@dataclass(frozen=True)
class GenerationInput:
    """One generated report queued for review, with its (hidden) provenance."""

    model: str
    method: str
    study_id: str
    candidate_text: str
    references: tuple[str, ...]
    image_path: Optional[str] = None


@dataclass
class EvalSession:
    session_id: str
    seed: int
    # Served payload per item: candidate, references, image path. No identity.
    items: dict[str, dict] = field(default_factory=dict)
    queues: dict[str, list[str]] = field(default_factory=dict)
    # item_id -> {"model", "method", "study_id"}; persisted separately.
    unblinding: dict[str, dict] = field(default_factory=dict)


def create_session(
    generations: Sequence[GenerationInput],
    annotator_ids: Sequence[str],
    seed: int,
    session_id: Optional[str] = None,
) -> EvalSession:
    """Assign opaque item ids and a private seeded ordering per annotator."""
    if not generations:
        raise EvalError("no generations to review")
    if not annotator_ids:
        raise EvalError("no annotators")
    if session_id is None:
        content = hashlib.sha256(
            json.dumps(
                [[g.model, g.method, g.study_id, g.candidate_text] for g in generations],
                sort_keys=True,
            ).encode("utf-8")
        ).hexdigest()[:8]
        session_id = f"sess-{seed}-{content}"

    assignment = list(generations)
    random.Random(seed).shuffle(assignment)  # item numbering must not follow input grouping
    session = EvalSession(session_id=session_id, seed=seed)
    for i, gen in enumerate(assignment):
        item_id = f"item-{i:04d}"
        session.items[item_id] = {
            "item_id": item_id,
            "candidate_text": gen.candidate_text,
            "references": list(gen.references),
            # The image file path can embed the study id, so it stays on the
            # private side; clients fetch through an item-scoped URL.
            "has_image": gen.image_path is not None,
        }
        session.unblinding[item_id] = {
            "model": gen.model,
            "method": gen.method,
            "study_id": gen.study_id,
            "image_path": gen.image_path,
        }
    item_ids = sorted(session.items)
    for annotator in annotator_ids:
        order = list(item_ids)
        random.Random(f"{seed}:{annotator}").shuffle(order)
        session.queues[str(annotator)] = order
    return session


class SessionStore:
    """Filesystem-backed session state with an append-only annotation log.

    Layout per session: ``session.json`` (served payloads and queues),
    ``unblinding.json`` (identity map, kept out of anything served), and
    ``annotations.jsonl``. Submissions from distinct annotators may arrive
    concurrently; per-(annotator, item) the first write wins.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, EvalSession] = {}
        self._records: dict[str, dict[tuple[str, str], AnnotationRecord]] = {}
        self._load_existing()

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _load_existing(self) -> None:
        for session_file in sorted(self.root.glob("*/session.json")):
            sdir = session_file.parent
            served = json.loads(session_file.read_text(encoding="utf-8"))
            unblinding = json.loads((sdir / "unblinding.json").read_text(encoding="utf-8"))
            session = EvalSession(
                session_id=served["session_id"],
                seed=served["seed"],
                items=served["items"],
                queues=served["queues"],
                unblinding=unblinding,
            )
            self._sessions[session.session_id] = session
            records: dict[tuple[str, str], AnnotationRecord] = {}
            log = sdir / "annotations.jsonl"
            if log.exists():
                with open(log, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        record = AnnotationRecord.from_json(line)
                        records.setdefault((record.annotator_id, record.item_id), record)
            self._records[session.session_id] = records

    def create(self, session: EvalSession) -> None:
        with self._lock:
            if session.session_id in self._sessions:
                raise EvalError(f"session {session.session_id!r} already exists")
            sdir = self._session_dir(session.session_id)
            sdir.mkdir(parents=True, exist_ok=True)
            served = {
                "session_id": session.session_id,
                "seed": session.seed,
                "items": session.items,
                "queues": session.queues,
            }
            (sdir / "session.json").write_text(
                json.dumps(served, sort_keys=True, ensure_ascii=False, indent=1),
                encoding="utf-8",
            )
            (sdir / "unblinding.json").write_text(
                json.dumps(session.unblinding, sort_keys=True, ensure_ascii=False, indent=1),
                encoding="utf-8",
            )
            self._sessions[session.session_id] = session
            self._records[session.session_id] = {}

    def get(self, session_id: str) -> EvalSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownItemError(f"unknown session {session_id!r}") from None

    def records(self, session_id: str) -> list[AnnotationRecord]:
        self.get(session_id)
        return list(self._records[session_id].values())

    def next_item(self, session_id: str, annotator_id: str) -> Optional[dict]:
        """First unannotated item in this annotator's queue, or None when done."""
        session = self.get(session_id)
        if annotator_id not in session.queues:
            raise UnknownItemError(f"annotator {annotator_id!r} not in session")
        done = {
            item for (annot, item) in self._records[session_id] if annot == annotator_id
        }
        for item_id in session.queues[annotator_id]:
            if item_id not in done:
                return session.items[item_id]
        return None

    def progress(self, session_id: str, annotator_id: Optional[str] = None) -> dict:
        session = self.get(session_id)
        if annotator_id is not None:
            if annotator_id not in session.queues:
                raise UnknownItemError(f"annotator {annotator_id!r} not in session")
            done = sum(
                1 for (annot, _item) in self._records[session_id] if annot == annotator_id
            )
            return {"annotator_id": annotator_id, "done": done, "total": len(session.items)}
        total = len(session.items) * len(session.queues)
        return {"done": len(self._records[session_id]), "total": total}

    def submit(
        self, session_id: str, annotator_id: str, item_id: str, counts: ErrorCounts
    ) -> AnnotationRecord:
        session = self.get(session_id)
        if item_id not in session.items:
            raise UnknownItemError(f"unknown item {item_id!r}")
        if annotator_id not in session.queues:
            raise UnknownItemError(f"annotator {annotator_id!r} not in session")
        record = AnnotationRecord(
            session_id=session_id,
            annotator_id=annotator_id,
            item_id=item_id,
            counts=counts,
            submitted_at=now_iso(),
        )
        with self._lock:
            key = (annotator_id, item_id)
            if key in self._records[session_id]:
                raise DuplicateAnnotationError(
                    f"{annotator_id!r} already annotated {item_id!r}"
                )
            with open(self._session_dir(session_id) / "annotations.jsonl", "a", encoding="utf-8") as fh:
                fh.write(record.to_json() + "\n")
            self._records[session_id][key] = record
        return record

    def error_summary(self, session_id: str) -> list[dict]:
        """Mean total errors per (model, method), unblinded; ranked, name-stable."""
        session = self.get(session_id)
        records = self.records(session_id)
        if not records:
            raise EvalError("no annotations submitted yet")
        totals: dict[tuple[str, str], list[int]] = {}
        for record in records:
            identity = session.unblinding[record.item_id]
            key = (identity["model"], identity["method"])
            totals.setdefault(key, []).append(record.counts.total())
        rows = [
            {
                "model": model,
                "method": method,
                "avg_total_errors": sum(values) / len(values),
                "n_annotations": len(values),
            }
            for (model, method), values in totals.items()
        ]
        rows.sort(key=lambda r: (r["avg_total_errors"], r["model"], r["method"]))
        return rows


# --- Krippendorff's alpha -------------------------------------------------

def _interval_distance(c: float, k: float) -> float:
    return (c - k) ** 2


def _nominal_distance(c: float, k: float) -> float:
    return 0.0 if c == k else 1.0


def _ratio_distance(c: float, k: float) -> float:
    if c + k == 0:
        return 0.0
    return ((c - k) / (c + k)) ** 2


def alpha_from_values(
    values_by_item: Mapping[str, Mapping[str, float]], level: str = "interval"
) -> Optional[float]:
    """Krippendorff's alpha via the coincidence-matrix formulation.

    ``values_by_item`` maps item -> {annotator -> value}; annotators missing
    from an item simply contribute nothing there (pairable-values
    convention: items with fewer than two values are dropped). Returns None
    when expected disagreement is zero (every pairable value identical),
    which is undefined rather than perfect agreement.
    """
    annotators = {a for values in values_by_item.values() for a in values}
    if len(annotators) < 2:
        raise EvalError("alpha needs at least two annotators")
    units = [list(values.values()) for values in values_by_item.values() if len(values) >= 2]
    if not units:
        raise EvalError("alpha needs at least one item with two or more annotations")

    categories = sorted({v for unit in units for v in unit})
    index = {c: i for i, c in enumerate(categories)}
    size = len(categories)
    coincidence = [[0.0] * size for _ in range(size)]
    for unit in units:
        m_u = len(unit)
        for i, vi in enumerate(unit):
            for j, vj in enumerate(unit):
                if i == j:
                    continue
                coincidence[index[vi]][index[vj]] += 1.0 / (m_u - 1)
    marginals = [sum(row) for row in coincidence]
    n = sum(marginals)

    if level == "interval":
        distance = _interval_distance
    elif level == "nominal":
        distance = _nominal_distance
    elif level == "ratio":
        distance = _ratio_distance
    elif level == "ordinal":
        # Rank distance derived from the coincidence marginals.
        def distance(c: float, k: float) -> float:
            lo, hi = (c, k) if c <= k else (k, c)
            between = sum(
                marginals[index[g]] for g in categories if lo <= g <= hi
            )
            return (between - (marginals[index[c]] + marginals[index[k]]) / 2.0) ** 2
    else:
        raise EvalError(f"unknown measurement level: {level!r}")

    d_observed = sum(
        coincidence[a][b] * distance(categories[a], categories[b])
        for a in range(size)
        for b in range(size)
    ) / n
    d_expected = sum(
        marginals[a] * marginals[b] * distance(categories[a], categories[b])
        for a in range(size)
        for b in range(size)
        if a != b
    ) / (n * (n - 1))
    if d_expected == 0:
        return None
    return 1.0 - d_observed / d_expected


def krippendorff_alpha(
    records: Sequence[AnnotationRecord], level: str = "interval"
) -> Optional[float]:
    """Agreement over per-item total error counts; None when undefined."""
    values: dict[str, dict[str, float]] = {}
    for record in records:
        values.setdefault(record.item_id, {})[record.annotator_id] = float(
            record.counts.total()
        )
    return alpha_from_values(values, level=level)
