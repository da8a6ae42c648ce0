"""Run configuration: one JSON file drives every pipeline stage.

Relative paths inside the config resolve against the config file's own
directory, so a run directory can be moved or archived wholesale. The raw
config bytes are hashed and a copy is written into the output directory;
every artifact is attributable to that hash through the manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .corpus import AdapterConfig, AffineTransform, SourceConfig
from .genclient import ModelEndpoint
from .metrics import ALL_METRICS_DEFAULT, CLINICAL_METRICS_DEFAULT
from .metrics.scorers import ScorerSpec
from .promptkit import MethodFlags
from .rendering import RenderSpec


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    base_dir: Path
    raw_text: str
    adapters: Optional[AdapterConfig]
    sidecar_path: Optional[str]
    render: RenderSpec
    methods: list[MethodFlags]
    endpoints: list[ModelEndpoint]
    scorers: list[ScorerSpec]
    clinical_metrics: list[str]
    all_metrics: list[str]
    multi_ref_policy: str
    exemplar_seed: int
    session_seed: int
    exemplar_pool_path: Optional[str]
    exemplar_pool_attested_disjoint: bool
    template_path: Optional[str]
    annotators: list[str]
    annotators_see_images: bool
    out_dir: Path
    max_workers: int = 1

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode("utf-8")).hexdigest()

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel


def _source_config(obj: dict, name: str) -> SourceConfig:
    try:
        transform = AffineTransform(**obj.get("transform", {}))
        return SourceConfig(
            path=obj["path"],
            columns=dict(obj["columns"]),
            delimiter=obj.get("delimiter", ","),
            transform=transform,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"adapters.{name}: {exc}") from exc


def load_config(path: str | Path, out_override: Optional[str] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw_text = path.read_text(encoding="utf-8")
    try:
        obj = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    base_dir = path.parent

    adapters = None
    if "adapters" in obj:
        a = obj["adapters"]
        try:
            adapters = AdapterConfig(
                boxes=_source_config(a["boxes"], "boxes"),
                fixations=_source_config(a["fixations"], "fixations"),
                reports=_source_config(a["reports"], "reports"),
                image_manifest=a["image_manifest"],
                base_dir=str(base_dir),
            )
        except KeyError as exc:
            raise ConfigError(f"adapters section incomplete: missing {exc}") from exc

    try:
        render = RenderSpec(**obj.get("render", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"render spec: {exc}") from exc

    try:
        methods = [MethodFlags.from_label(m) for m in obj.get("methods", ["-"])]
    except Exception as exc:
        raise ConfigError(f"methods: {exc}") from exc

    endpoints = []
    for e in obj.get("endpoints", []):
        try:
            endpoints.append(
                ModelEndpoint(
                    name=e["name"],
                    base_url=e["base_url"],
                    auth_env_var=e.get("auth_env_var"),
                    max_new_tokens=e.get("max_new_tokens", 512),
                    request_timeout_s=e.get("request_timeout_s", 60.0),
                    max_retries=e.get("max_retries", 2),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"endpoint entry missing {exc}") from exc

    scorers = []
    for s in obj.get("scorers", []):
        try:
            scorers.append(
                ScorerSpec(
                    metric=s["metric"],
                    transport=s["transport"],
                    command=s.get("command", []),
                    url=s.get("url", ""),
                    batch_size=s.get("batch_size", 64),
                    classification=s.get("classification", "clinical"),
                    timeout_s=s.get("timeout_s", 120.0),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"scorer entry missing {exc}") from exc

    metric_sets = obj.get("metric_sets", {})
    seeds = obj.get("seeds", {})
    out_dir = Path(out_override) if out_override else base_dir / obj.get("out_dir", "out")

    return RunConfig(
        base_dir=base_dir,
        raw_text=raw_text,
        adapters=adapters,
        sidecar_path=obj.get("sidecar_path"),
        render=render,
        methods=methods,
        endpoints=endpoints,
        scorers=scorers,
        clinical_metrics=list(metric_sets.get("clinical", CLINICAL_METRICS_DEFAULT)),
        all_metrics=list(metric_sets.get("all", ALL_METRICS_DEFAULT)),
        multi_ref_policy=obj.get("multi_ref_policy", "max"),
        exemplar_seed=seeds.get("exemplars", 0),
        session_seed=seeds.get("session", 1),
        exemplar_pool_path=obj.get("exemplar_pool_path"),
        exemplar_pool_attested_disjoint=obj.get("exemplar_pool_attested_disjoint", False),
        template_path=obj.get("template_path"),
        annotators=[str(a) for a in obj.get("annotators", [])],
        annotators_see_images=obj.get("annotators_see_images", True),
        out_dir=out_dir,
        max_workers=obj.get("max_workers", 1),
    )
