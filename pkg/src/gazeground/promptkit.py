"""Prompt assembly for the eight method variants.

Method flags select what grounding reaches the model:

* mark: abnormality boxes drawn on the image,
* look: gaze heatmap blended into the image plus one dwell-time text line
  per attended box,
* icl: three fixed exemplar reports embedded as prior chat turns.

Bundles are immutable, content-addressed values: the digest covers every
field, so identical inputs always produce the same bundle bytes.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from PIL import Image

from .corpus import StudyRecord
from .grounding import GroundedFixationSummary, aggregate_fixation_times
from .rendering import RenderSpec, render_box_overlay, render_fixation_heatmap

FIXATION_LINE = "Fixation Data: [Abnormality bounding box: {label}, Fixation Time: {time} seconds]"

METHOD_LABELS = ("-", "L", "M", "L&M", "I", "I&L", "I&M", "I&L&M")


class PromptError(Exception):
    pass


@dataclass(frozen=True, order=True)
class MethodFlags:
    look: bool = False
    mark: bool = False
    icl: bool = False

    @property
    def label(self) -> str:
        parts = []
        if self.icl:
            parts.append("I")
        if self.look:
            parts.append("L")
        if self.mark:
            parts.append("M")
        return "&".join(parts) if parts else "-"

    @property
    def slug(self) -> str:
        """Filesystem-safe token, e.g. 'base', 'LM', 'ILM'."""
        s = ("I" if self.icl else "") + ("L" if self.look else "") + ("M" if self.mark else "")
        return s or "base"

    @classmethod
    def from_label(cls, label: str) -> "MethodFlags":
        label = label.strip()
        if label == "-":
            return cls()
        parts = label.split("&")
        if not parts or any(p not in ("I", "L", "M") for p in parts) or len(set(parts)) != len(parts):
            raise PromptError(f"unknown method label: {label!r}")
        return cls(look="L" in parts, mark="M" in parts, icl="I" in parts)


ALL_METHODS = tuple(MethodFlags.from_label(label) for label in METHOD_LABELS)


@dataclass(frozen=True)
class PromptTemplate:
    version: int
    system_text: str
    user_base_text: str


def load_template(path: str | Path) -> PromptTemplate:
    """Parse the sectioned template file (``version:`` header, [system] and [user] blocks)."""
    text = Path(path).read_text(encoding="utf-8")
    version: Optional[int] = None
    sections: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in text.splitlines():
        stripped = line.strip()
        if version is None and stripped.startswith("version:"):
            version = int(stripped.split(":", 1)[1].strip())
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = []
            continue
        if current is not None:
            sections[current].append(line)
    if version is None or "system" not in sections or "user" not in sections:
        raise PromptError(f"template {path} must declare a version and [system]/[user] sections")
    return PromptTemplate(
        version=version,
        system_text="\n".join(sections["system"]).strip(),
        user_base_text="\n".join(sections["user"]).strip(),
    )


def default_template() -> PromptTemplate:
    return load_template(Path(__file__).parent / "templates" / "default_prompt.txt")


def fixation_summary_text(summary: GroundedFixationSummary) -> str:
    """One line per attended box, durations at two decimals, in summary order."""
    return "\n".join(
        FIXATION_LINE.format(label=e.label, time=f"{e.total_time_seconds:.2f}")
        for e in summary.entries
    )


@dataclass(frozen=True)
class Exemplar:
    exemplar_id: str
    text: str


def select_exemplars(pool: Sequence[Exemplar], k: int = 3, seed: int = 0,
                     attested_disjoint: bool = True) -> list[Exemplar]:
    """Pick k exemplars deterministically; one fixed trio is reused for a whole run.

    The caller attests the pool is disjoint from the evaluation corpus;
    exemplars drawn from evaluated studies would leak references into prompts.
    """
    if not attested_disjoint:
        raise PromptError("exemplar pool must be attested disjoint from the evaluation corpus")
    if len(pool) < k:
        raise PromptError(f"exemplar pool has {len(pool)} entries, need {k}")
    rng = random.Random(seed)
    indices = sorted(rng.sample(range(len(pool)), k))
    return [pool[i] for i in indices]


def load_exemplar_pool(path: str | Path) -> list[Exemplar]:
    pool = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            pool.append(Exemplar(exemplar_id=str(obj["id"]), text=str(obj["text"])))
    return pool


@dataclass(frozen=True)
class PromptBundle:
    study_id: str
    flags: MethodFlags
    image_b64: str
    image_mime: str
    system_text: str
    user_text: str
    exemplars: tuple[str, ...]
    exemplar_prompt_text: str  # user-turn text paired with each exemplar reply
    digest: str = field(default="", compare=False)

    def canonical_dict(self) -> dict:
        return {
            "study_id": self.study_id,
            "method": self.flags.label,
            "image_b64": self.image_b64,
            "image_mime": self.image_mime,
            "system_text": self.system_text,
            "user_text": self.user_text,
            "exemplars": list(self.exemplars),
            "exemplar_prompt_text": self.exemplar_prompt_text,
        }

    def compute_digest(self) -> str:
        canon = json.dumps(self.canonical_dict(), sort_keys=True, ensure_ascii=False,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def to_json(self) -> str:
        payload = self.canonical_dict()
        payload["digest"] = self.digest
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "PromptBundle":
        d = json.loads(text)
        bundle = cls(
            study_id=d["study_id"],
            flags=MethodFlags.from_label(d["method"]),
            image_b64=d["image_b64"],
            image_mime=d["image_mime"],
            system_text=d["system_text"],
            user_text=d["user_text"],
            exemplars=tuple(d["exemplars"]),
            exemplar_prompt_text=d["exemplar_prompt_text"],
            digest=d.get("digest", ""),
        )
        recomputed = bundle.compute_digest()
        if bundle.digest and bundle.digest != recomputed:
            raise PromptError(f"bundle digest mismatch: stored {bundle.digest}, computed {recomputed}")
        return _with_digest(bundle, recomputed)

    def decode_image(self) -> Image.Image:
        return Image.open(io.BytesIO(base64.b64decode(self.image_b64)))


def _with_digest(bundle: PromptBundle, digest: str) -> PromptBundle:
    return PromptBundle(
        study_id=bundle.study_id,
        flags=bundle.flags,
        image_b64=bundle.image_b64,
        image_mime=bundle.image_mime,
        system_text=bundle.system_text,
        user_text=bundle.user_text,
        exemplars=bundle.exemplars,
        exemplar_prompt_text=bundle.exemplar_prompt_text,
        digest=digest,
    )


def _encode_png(image: Image.Image) -> str:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def compose_image(record: StudyRecord, flags: MethodFlags, spec: RenderSpec,
                  base_dir: str | Path = ".") -> tuple[str, str]:
    """Return (b64 payload, mime) for the method's visual channel.

    Baseline passes the study image bytes through untouched. Look blends the
    heatmap first; Mark draws boxes on top of whatever is below, so L&M keeps
    the strokes legible over the heatmap.
    """
    path = Path(base_dir) / record.image_path
    raw = path.read_bytes()
    if not flags.look and not flags.mark:
        mime = "image/jpeg" if path.suffix.lower() in (".jpg", ".jpeg") else "image/png"
        return base64.b64encode(raw).decode("ascii"), mime
    with Image.open(io.BytesIO(raw)) as img:
        composed = img.convert("RGB")
        if flags.look:
            composed = render_fixation_heatmap(composed, record.fixations, spec)
        if flags.mark:
            composed = render_box_overlay(composed, record.boxes, spec)
        return _encode_png(composed), "image/png"


def build_prompt(
    record: StudyRecord,
    flags: MethodFlags,
    exemplar_pool: Sequence[Exemplar] = (),
    render_spec: Optional[RenderSpec] = None,
    template: Optional[PromptTemplate] = None,
    exemplar_seed: int = 0,
    base_dir: str | Path = ".",
) -> PromptBundle:
    """Assemble the full multimodal request for one (study, method) pair."""
    spec = render_spec or RenderSpec()
    tpl = template or default_template()

    user_text = tpl.user_base_text
    if flags.look:
        summary = aggregate_fixation_times(record.fixations, record.boxes)
        block = fixation_summary_text(summary)
        if block:
            user_text = user_text + "\n" + block

    exemplars: tuple[str, ...] = ()
    if flags.icl:
        chosen = select_exemplars(exemplar_pool, k=3, seed=exemplar_seed)
        exemplars = tuple(e.text for e in chosen)

    image_b64, mime = compose_image(record, flags, spec, base_dir=base_dir)
    bundle = PromptBundle(
        study_id=record.study_id,
        flags=flags,
        image_b64=image_b64,
        image_mime=mime,
        system_text=tpl.system_text,
        user_text=user_text,
        exemplars=exemplars,
        exemplar_prompt_text=tpl.user_base_text,
    )
    return _with_digest(bundle, bundle.compute_digest())
