"""Canonical study records: ingestion from tabular sources, validation, stats, JSONL store.

A study joins one chest X-ray image with abnormality bounding boxes, an eye
fixation sequence, and one or more dictated reference reports. Source files
arrive as delimited tables with site-specific column names; adapter configs
map them into the canonical schema. The canonical on-disk form is one JSON
object per line, keys sorted, UTF-8, so a given corpus always serializes to
identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from PIL import Image

# Boxes may overrun the image frame by up to this much (annotation off-by-one);
# they are clamped with a warning. Anything larger is a validation error.
CLAMP_TOLERANCE_PX = 1.0


class CorpusError(Exception):
    """Raised for unrecoverable ingestion problems (missing image, empty refs, bad rows)."""


class MalformedRowError(CorpusError):
    """A source row that cannot be parsed; carries file, line and field context."""

    def __init__(self, source: str, line_no: int, fieldname: str, detail: str):
        self.source = source
        self.line_no = line_no
        self.fieldname = fieldname
        super().__init__(f"{source}: line {line_no}, field {fieldname!r}: {detail}")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned abnormality region in source-image pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float
    label: str

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def contains(self, x: float, y: float) -> bool:
        # Closed intervals on all four edges: corner hits count as inside.
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2


@dataclass(frozen=True)
class Fixation:
    """One gaze rest event: where the eye dwelled, for how long, and in what order."""

    x: float
    y: float
    t: float  # duration, seconds
    ordinal: int


@dataclass(frozen=True)
class DictatedReport:
    text: str
    source_id: str


@dataclass
class StudyRecord:
    study_id: str
    image_path: str
    width: int
    height: int
    boxes: list[BoundingBox] = field(default_factory=list)
    fixations: list[Fixation] = field(default_factory=list)
    references: list[DictatedReport] = field(default_factory=list)

    def total_fixation_time(self) -> float:
        return sum(f.t for f in self.fixations)


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which field, which rule, and the offending value."""

    field: str
    rule: str
    value: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule} (got {self.value})"


@dataclass(frozen=True)
class CorpusStats:
    n_images: int
    n_reports: int
    avg_reports_per_image: float
    n_missing_findings: int
    n_missing_impression: int
    avg_len_findings: Optional[float]
    avg_len_impression: Optional[float]
    avg_len_dictated: float


@dataclass(frozen=True)
class AffineTransform:
    """Maps recorded fixation coordinates into image pixels (screen-space logs differ per site)."""

    scale_x: float = 1.0
    scale_y: float = 1.0
    offset_x: float = 0.0
    offset_y: float = 0.0

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return self.scale_x * x + self.offset_x, self.scale_y * y + self.offset_y


@dataclass
class SourceConfig:
    """Where one tabular source lives and which columns hold the canonical fields.

    ``columns`` maps canonical field names to source column names, e.g.
    ``{"study_id": "dicom_id", "x": "x_position", ...}``.
    """

    path: str
    columns: dict[str, str]
    delimiter: str = ","
    transform: AffineTransform = field(default_factory=AffineTransform)


@dataclass
class AdapterConfig:
    boxes: SourceConfig
    fixations: SourceConfig
    reports: SourceConfig
    image_manifest: str  # CSV with study_id,image_path columns
    base_dir: str = "."


def _parse_float(row: Mapping[str, str], col: str, source: str, line_no: int) -> float:
    raw = row.get(col)
    if raw is None or raw == "":
        raise MalformedRowError(source, line_no, col, "missing value")
    try:
        value = float(raw)
    except ValueError:
        raise MalformedRowError(source, line_no, col, f"not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise MalformedRowError(source, line_no, col, f"not finite: {raw!r}")
    return value


def _read_rows(cfg: SourceConfig, base_dir: Path) -> Iterable[tuple[int, dict[str, str]]]:
    path = base_dir / cfg.path
    if not path.exists():
        raise CorpusError(f"source file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=cfg.delimiter)
        # DictReader consumes the header as line 1.
        for line_no, row in enumerate(reader, start=2):
            yield line_no, row


def read_image_manifest(adapters: AdapterConfig) -> dict[str, str]:
    """Return study_id -> image path (kept as written, resolved against base_dir on use)."""
    base = Path(adapters.base_dir)
    path = base / adapters.image_manifest
    if not path.exists():
        raise CorpusError(f"image manifest not found: {path}")
    manifest: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.DictReader(fh), start=2):
            sid = (row.get("study_id") or "").strip()
            img = (row.get("image_path") or "").strip()
            if not sid or not img:
                raise MalformedRowError(str(path), line_no, "study_id/image_path", "missing value")
            manifest[sid] = img
    return manifest


def _boxes_for_study(adapters: AdapterConfig, study_id: str) -> list[BoundingBox]:
    cfg = adapters.boxes
    cols = cfg.columns
    source = cfg.path
    boxes = []
    for line_no, row in _read_rows(cfg, Path(adapters.base_dir)):
        if row.get(cols["study_id"]) != study_id:
            continue
        label = (row.get(cols["label"]) or "").strip()
        if not label:
            raise MalformedRowError(source, line_no, cols["label"], "empty label")
        boxes.append(
            BoundingBox(
                x1=_parse_float(row, cols["x1"], source, line_no),
                y1=_parse_float(row, cols["y1"], source, line_no),
                x2=_parse_float(row, cols["x2"], source, line_no),
                y2=_parse_float(row, cols["y2"], source, line_no),
                label=label,
            )
        )
    return boxes


def _fixations_for_study(adapters: AdapterConfig, study_id: str) -> list[Fixation]:
    cfg = adapters.fixations
    cols = cfg.columns
    fixations = []
    for line_no, row in _read_rows(cfg, Path(adapters.base_dir)):
        if row.get(cols["study_id"]) != study_id:
            continue
        x = _parse_float(row, cols["x"], cfg.path, line_no)
        y = _parse_float(row, cols["y"], cfg.path, line_no)
        t = _parse_float(row, cols["t"], cfg.path, line_no)
        if t <= 0:
            raise MalformedRowError(cfg.path, line_no, cols["t"], f"duration must be positive, got {t}")
        x, y = cfg.transform.apply(x, y)
        # Ordinal assigned by input order; source row order is the temporal order.
        fixations.append(Fixation(x=x, y=y, t=t, ordinal=len(fixations)))
    return fixations


def _reports_for_study(adapters: AdapterConfig, study_id: str) -> list[DictatedReport]:
    cfg = adapters.reports
    cols = cfg.columns
    reports = []
    for line_no, row in _read_rows(cfg, Path(adapters.base_dir)):
        if row.get(cols["study_id"]) != study_id:
            continue
        text = (row.get(cols["text"]) or "").strip()
        if not text:
            raise MalformedRowError(cfg.path, line_no, cols["text"], "empty report text")
        source_id = (row.get(cols["source_id"]) or f"row{line_no}").strip()
        reports.append(DictatedReport(text=text, source_id=source_id))
    return reports


def _clamp_boxes(boxes: list[BoundingBox], width: int, height: int, study_id: str) -> list[BoundingBox]:
    clamped = []
    for b in boxes:
        out_by = max(0.0 - b.x1, 0.0 - b.y1, b.x2 - width, b.y2 - height, 0.0)
        if 0 < out_by <= CLAMP_TOLERANCE_PX:
            warnings.warn(
                f"study {study_id}: box {b.label!r} exceeds image bounds by "
                f"{out_by:.2f}px; clamping",
                stacklevel=3,
            )
            b = BoundingBox(
                x1=max(b.x1, 0.0),
                y1=max(b.y1, 0.0),
                x2=min(b.x2, float(width)),
                y2=min(b.y2, float(height)),
                label=b.label,
            )
        clamped.append(b)
    return clamped


def load_study(adapters: AdapterConfig, study_id: str) -> StudyRecord:
    """Assemble and validate one StudyRecord from the three sources plus the image manifest."""
    manifest = read_image_manifest(adapters)
    if study_id not in manifest:
        raise CorpusError(f"study {study_id!r} not present in image manifest")
    image_rel = manifest[study_id]
    image_abs = Path(adapters.base_dir) / image_rel
    if not image_abs.exists():
        raise CorpusError(f"study {study_id!r}: image not found: {image_abs}")
    try:
        with Image.open(image_abs) as img:
            width, height = img.size
    except Exception as exc:
        raise CorpusError(f"study {study_id!r}: image does not decode: {exc}") from exc

    references = _reports_for_study(adapters, study_id)
    if not references:
        raise CorpusError(f"study {study_id!r}: no references")

    boxes = _clamp_boxes(_boxes_for_study(adapters, study_id), width, height, study_id)
    record = StudyRecord(
        study_id=study_id,
        image_path=image_rel,
        width=width,
        height=height,
        boxes=boxes,
        fixations=_fixations_for_study(adapters, study_id),
        references=references,
    )
    violations = validate_record(record)
    if violations:
        raise CorpusError(
            f"study {study_id!r}: {len(violations)} validation error(s): "
            + "; ".join(str(v) for v in violations)
        )
    return record


def load_corpus(adapters: AdapterConfig) -> list[StudyRecord]:
    """Load every study listed in the image manifest, in manifest order."""
    manifest = read_image_manifest(adapters)
    return [load_study(adapters, sid) for sid in manifest]


def validate_record(r: StudyRecord) -> list[Violation]:
    """Check every type invariant; violations are data, not exceptions."""
    out: list[Violation] = []
    if not r.study_id:
        out.append(Violation("study_id", "must be non-empty", repr(r.study_id)))
    if r.width <= 0 or r.height <= 0:
        out.append(Violation("width/height", "must be positive", f"{r.width}x{r.height}"))
    for i, b in enumerate(r.boxes):
        if not (b.x1 < b.x2 and b.y1 < b.y2):
            out.append(Violation(f"boxes[{i}]", "degenerate box", f"({b.x1},{b.y1},{b.x2},{b.y2})"))
        if b.x1 < 0 or b.y1 < 0 or b.x2 > r.width or b.y2 > r.height:
            out.append(
                Violation(
                    f"boxes[{i}]",
                    "box outside image bounds",
                    f"({b.x1},{b.y1},{b.x2},{b.y2}) vs {r.width}x{r.height}",
                )
            )
        if not b.label:
            out.append(Violation(f"boxes[{i}].label", "must be non-empty", repr(b.label)))
    prev_ordinal = -1
    for i, f in enumerate(r.fixations):
        if f.t <= 0:
            out.append(Violation(f"fixations[{i}].t", "duration must be positive", str(f.t)))
        if not (math.isfinite(f.x) and math.isfinite(f.y)):
            out.append(Violation(f"fixations[{i}]", "coordinates must be finite", f"({f.x},{f.y})"))
        if f.ordinal <= prev_ordinal:
            out.append(Violation(f"fixations[{i}].ordinal", "must be strictly increasing", str(f.ordinal)))
        prev_ordinal = f.ordinal
    if not r.references:
        out.append(Violation("references", "must be non-empty", "[]"))
    for i, ref in enumerate(r.references):
        if not ref.text.strip():
            out.append(Violation(f"references[{i}].text", "must be non-empty after trimming", repr(ref.text)))
    return out


def compute_corpus_stats(
    corpus: Sequence[StudyRecord],
    sidecar: Optional[Mapping[str, Mapping[str, Optional[str]]]] = None,
) -> CorpusStats:
    """Corpus-level counts and average text lengths.

    ``sidecar`` optionally maps study_id to ``{"findings": str|None,
    "impression": str|None}``; missing or None entries count as absent
    sections. Lengths are Unicode scalar counts of trimmed text, averaged
    only over present fields. Full precision is kept; rounding is a display
    concern.
    """
    if not corpus:
        raise CorpusError("empty corpus")
    n_images = len(corpus)
    n_reports = sum(len(r.references) for r in corpus)
    dictated_lengths = [len(ref.text.strip()) for r in corpus for ref in r.references]

    n_missing_findings = 0
    n_missing_impression = 0
    findings_lengths: list[int] = []
    impression_lengths: list[int] = []
    if sidecar is not None:
        for r in corpus:
            entry = sidecar.get(r.study_id, {})
            findings = entry.get("findings")
            impression = entry.get("impression")
            if findings is None or not findings.strip():
                n_missing_findings += 1
            else:
                findings_lengths.append(len(findings.strip()))
            if impression is None or not impression.strip():
                n_missing_impression += 1
            else:
                impression_lengths.append(len(impression.strip()))

    def _mean(values: list[int]) -> Optional[float]:
        return sum(values) / len(values) if values else None

    return CorpusStats(
        n_images=n_images,
        n_reports=n_reports,
        avg_reports_per_image=n_reports / n_images,
        n_missing_findings=n_missing_findings,
        n_missing_impression=n_missing_impression,
        avg_len_findings=_mean(findings_lengths),
        avg_len_impression=_mean(impression_lengths),
        avg_len_dictated=sum(dictated_lengths) / len(dictated_lengths),
    )


def record_to_dict(r: StudyRecord) -> dict:
    return asdict(r)


def record_from_dict(d: Mapping) -> StudyRecord:
    return StudyRecord(
        study_id=d["study_id"],
        image_path=d["image_path"],
        width=d["width"],
        height=d["height"],
        boxes=[BoundingBox(**b) for b in d["boxes"]],
        fixations=[Fixation(**f) for f in d["fixations"]],
        references=[DictatedReport(**ref) for ref in d["references"]],
    )


def dumps_record(r: StudyRecord) -> str:
    return json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def export_canonical(corpus: Sequence[StudyRecord], path: str | Path) -> None:
    """Write the corpus as deterministic JSONL (one record per line, keys sorted)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in corpus:
            fh.write(dumps_record(r))
            fh.write("\n")


def load_canonical(path: str | Path) -> list[StudyRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}: line {line_no}: bad record: {exc}") from exc
    seen: set[str] = set()
    for r in records:
        if r.study_id in seen:
            raise CorpusError(f"duplicate study_id {r.study_id!r} in {path}")
        seen.add(r.study_id)
    return records
