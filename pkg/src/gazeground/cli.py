"""Pipeline entry point: ingest -> ground -> render -> generate -> score -> report -> eval-serve.

Stages communicate only through files in the output directory. Each stage
records a key (hash of its config slice and input bytes) in the manifest
and is skipped on rerun when the key matches and its outputs exist, so a
completed pipeline re-runs as pure cache hits.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus as corpus_mod
from .config import ConfigError, RunConfig, load_config
from .corpus import CorpusError, load_canonical
from .experteval import EvalError, GenerationInput, SessionStore, create_session
from .genclient import GenerationCache, GenerationRecord, run_batch
from .grounding import aggregate_fixation_times
from .metrics import MetricRow, delta_report, normalized_averages, score_candidate
from .metrics.charts import (
    emit_charts,
    format_results_table,
    write_delta_tsv,
    write_results_tsv,
)
from .metrics.scorers import ScorerError, invoke_external_scorer
from .promptkit import (
    METHOD_LABELS,
    MethodFlags,
    PromptError,
    build_prompt,
    default_template,
    load_exemplar_pool,
    load_template,
    select_exemplars,
)
from .rendering import render_box_overlay, render_fixation_heatmap
from .timeutil import now_iso

TOKENIZATION_ID = "lowercase_alnum"


class StageError(Exception):
    pass


def _hash_parts(*parts: bytes) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part)
        digest.update(b"\x00")
    return digest.hexdigest()


def _hash_obj(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, default=str).encode("utf-8")


def _hash_file(path: Path) -> bytes:
    if not path.exists():
        raise StageError(f"required input missing: {path}")
    return hashlib.sha256(path.read_bytes()).digest()


class Manifest:
    """Stage ledger in the output directory; all recorded paths are relative
    to it so runs in different working directories stay byte-identical."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.path = out_dir / "manifest.json"
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {"stages": {}}

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self.data, sort_keys=True, ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8",
        )

    def _rel(self, p: Path) -> str:
        try:
            return str(Path(p).relative_to(self.out_dir))
        except ValueError:
            return str(p)

    def stage_fresh(self, name: str, key: str, outputs: Sequence[Path]) -> bool:
        entry = self.data["stages"].get(name)
        return (
            entry is not None
            and entry.get("key") == key
            and all((self.out_dir / p).exists() for p in entry.get("outputs", []))
            and all(p.exists() for p in outputs)
        )

    def record_stage(self, name: str, key: str, outputs: Sequence[Path]) -> None:
        self.data["stages"][name] = {
            "key": key,
            "outputs": sorted(self._rel(p) for p in outputs),
            "completed_at": now_iso(),
        }
        self.save()


def _load_template(config: RunConfig):
    if config.template_path:
        return load_template(config.resolve(config.template_path))
    return default_template()


def _corpus_path(config: RunConfig) -> Path:
    return config.out_dir / "corpus.jsonl"


def _generations_path(config: RunConfig) -> Path:
    return config.out_dir / "generations.jsonl"


def _scores_path(config: RunConfig) -> Path:
    return config.out_dir / "scores.jsonl"


def _method_order(label: str) -> int:
    try:
        return METHOD_LABELS.index(label)
    except ValueError:
        return len(METHOD_LABELS)


# --- stages ----------------------------------------------------------------

def stage_ingest(config: RunConfig, manifest: Manifest) -> None:
    if config.adapters is None:
        raise StageError("ingest: config has no adapters section")
    a = config.adapters
    base = Path(a.base_dir)
    manifest_map = corpus_mod.read_image_manifest(a)
    key = _hash_parts(
        _hash_obj(
            {
                "boxes": [a.boxes.path, a.boxes.columns, a.boxes.delimiter],
                "fixations": [
                    a.fixations.path,
                    a.fixations.columns,
                    a.fixations.delimiter,
                    vars(a.fixations.transform),
                ],
                "reports": [a.reports.path, a.reports.columns, a.reports.delimiter],
                "image_manifest": a.image_manifest,
            }
        ),
        _hash_file(base / a.boxes.path),
        _hash_file(base / a.fixations.path),
        _hash_file(base / a.reports.path),
        _hash_file(base / a.image_manifest),
        *[_hash_file(base / rel) for rel in manifest_map.values()],
    )
    sidecar = None
    if config.sidecar_path:
        sidecar_file = config.resolve(config.sidecar_path)
        key = _hash_parts(bytes.fromhex(key), _hash_file(sidecar_file))
        sidecar = json.loads(sidecar_file.read_text(encoding="utf-8"))
    out_path = _corpus_path(config)
    stats_path = config.out_dir / "corpus_stats.json"
    if manifest.stage_fresh("ingest", key, [out_path, stats_path]):
        print(f"ingest: up to date ({out_path})")
        return
    records = corpus_mod.load_corpus(a)
    corpus_mod.export_canonical(records, out_path)
    stats = corpus_mod.compute_corpus_stats(records, sidecar)
    stats_path.write_text(
        json.dumps(vars(stats), sort_keys=True, ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8",
    )
    manifest.record_stage("ingest", key, [out_path, stats_path])
    print(f"ingest: wrote {len(records)} studies to {out_path}")


def _render_study_images(config: RunConfig, records, render_dir: Path) -> list[Path]:
    from PIL import Image

    render_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for record in records:
        with Image.open(config.base_dir / record.image_path) as img:
            rgb = img.convert("RGB")
            overlay = render_box_overlay(rgb, record.boxes, config.render)
            heatmap = render_fixation_heatmap(rgb, record.fixations, config.render)
        overlay_path = render_dir / f"{record.study_id}_overlay.png"
        heatmap_path = render_dir / f"{record.study_id}_heatmap.png"
        overlay.save(overlay_path, format="PNG")
        heatmap.save(heatmap_path, format="PNG")
        outputs += [overlay_path, heatmap_path]
    return outputs


def stage_ground(config: RunConfig, manifest: Manifest) -> None:
    corpus_path = _corpus_path(config)
    key = _hash_parts(_hash_obj(vars(config.render)), _hash_file(corpus_path))
    summaries_path = config.out_dir / "summaries.jsonl"
    render_dir = config.out_dir / "render"
    if manifest.stage_fresh("ground", key, [summaries_path]):
        print("ground: up to date")
        return
    records = load_canonical(corpus_path)
    with open(summaries_path, "w", encoding="utf-8", newline="\n") as fh:
        for record in sorted(records, key=lambda r: r.study_id):
            summary = aggregate_fixation_times(record.fixations, record.boxes)
            fh.write(
                json.dumps(
                    {
                        "study_id": record.study_id,
                        "entries": [
                            {
                                "box_index": e.box_index,
                                "label": e.label,
                                "total_time_seconds": e.total_time_seconds,
                            }
                            for e in summary.entries
                        ],
                        "unmapped_time_seconds": summary.unmapped_time_seconds,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
                + "\n"
            )
    outputs = [summaries_path] + _render_study_images(config, records, render_dir)
    manifest.record_stage("ground", key, outputs)
    print(f"ground: wrote summaries for {len(records)} studies + {len(outputs) - 1} images")


def stage_render(config: RunConfig, manifest: Manifest) -> None:
    corpus_path = _corpus_path(config)
    key = _hash_parts(_hash_obj(vars(config.render)), _hash_file(corpus_path))
    render_dir = config.out_dir / "render"
    if manifest.stage_fresh("render", key, []):
        print("render: up to date")
        return
    records = load_canonical(corpus_path)
    outputs = _render_study_images(config, records, render_dir)
    manifest.record_stage("render", key, outputs)
    print(f"render: wrote {len(outputs)} images")


def _select_methods(config: RunConfig, methods_arg: Optional[str]) -> list[MethodFlags]:
    if methods_arg:
        return [MethodFlags.from_label(m.strip()) for m in methods_arg.split(",")]
    return config.methods


def _exemplar_state(config: RunConfig, methods: Sequence[MethodFlags]):
    needs_icl = any(m.icl for m in methods)
    if not needs_icl:
        return [], []
    if not config.exemplar_pool_path:
        raise StageError("generate: icl methods configured but no exemplar_pool_path")
    pool = load_exemplar_pool(config.resolve(config.exemplar_pool_path))
    chosen = select_exemplars(
        pool,
        k=3,
        seed=config.exemplar_seed,
        attested_disjoint=config.exemplar_pool_attested_disjoint,
    )
    return pool, chosen


def stage_generate(
    config: RunConfig,
    manifest: Manifest,
    methods_arg: Optional[str] = None,
    model_arg: Optional[str] = None,
) -> None:
    corpus_path = _corpus_path(config)
    methods = _select_methods(config, methods_arg)
    endpoints = [
        ep for ep in config.endpoints if model_arg is None or ep.name == model_arg
    ]
    if not endpoints:
        raise StageError(f"generate: no endpoint matches --model {model_arg!r}")
    template = _load_template(config)
    pool, chosen = _exemplar_state(config, methods)

    key = _hash_parts(
        _hash_file(corpus_path),
        _hash_obj(vars(config.render)),
        _hash_obj([m.label for m in methods]),
        _hash_obj([template.version, template.system_text, template.user_base_text]),
        _hash_obj([e.exemplar_id for e in chosen]),
        _hash_obj([[ep.name, ep.params_hash()] for ep in endpoints]),
    )
    gen_path = _generations_path(config)
    fail_path = config.out_dir / "generation_failures.jsonl"
    if manifest.stage_fresh("generate", key, [gen_path]):
        print("generate: up to date")
        return

    records = load_canonical(corpus_path)
    bundles_dir = config.out_dir / "bundles"
    bundles_dir.mkdir(parents=True, exist_ok=True)
    cache = GenerationCache(config.out_dir / "cache" / "gen")

    all_records: list[GenerationRecord] = []
    all_failures: list[GenerationRecord] = []
    requests_issued = 0
    for flags in methods:
        bundles = []
        for record in records:
            bundle = build_prompt(
                record,
                flags,
                exemplar_pool=pool,
                render_spec=config.render,
                template=template,
                exemplar_seed=config.exemplar_seed,
                base_dir=config.base_dir,
            )
            (bundles_dir / f"{bundle.digest}.json").write_text(
                bundle.to_json(), encoding="utf-8"
            )
            bundles.append(bundle)
        for ep in endpoints:
            report = run_batch(bundles, ep, cache, max_workers=config.max_workers)
            all_records.extend(report.records)
            all_failures.extend(report.failures)
            requests_issued += report.requests_issued
            print(f"generate: {ep.name} {flags.label}: {report.summary()}")

    all_records.sort(key=lambda r: (r.model, _method_order(r.method), r.study_id))
    with open(gen_path, "w", encoding="utf-8", newline="\n") as fh:
        for record in all_records:
            fh.write(record.to_json() + "\n")
    if all_failures:
        all_failures.sort(key=lambda r: (r.model, _method_order(r.method), r.study_id))
        with open(fail_path, "w", encoding="utf-8", newline="\n") as fh:
            for record in all_failures:
                fh.write(record.to_json() + "\n")
        print(f"generate: completion report: {len(all_failures)} failure(s) -> {fail_path}")
    elif fail_path.exists():
        fail_path.unlink()  # earlier run's failures have all been resolved
    manifest.data["template_version"] = template.version
    manifest.data["exemplar_ids"] = [e.exemplar_id for e in chosen]
    manifest.record_stage("generate", key, [gen_path])
    print(
        f"generate: {len(all_records)} records ({requests_issued} requests issued), "
        f"{len(all_failures)} failures"
    )


def stage_score(config: RunConfig, manifest: Manifest) -> None:
    corpus_path = _corpus_path(config)
    gen_path = _generations_path(config)
    key = _hash_parts(
        _hash_file(corpus_path),
        _hash_file(gen_path),
        _hash_obj(
            [
                [s.metric, s.transport, list(s.command), s.url, s.batch_size, s.classification]
                for s in config.scorers
            ]
        ),
        _hash_obj([config.multi_ref_policy]),
    )
    scores_path = _scores_path(config)
    if manifest.stage_fresh("score", key, [scores_path]):
        print("score: up to date")
        return

    references = {
        r.study_id: [ref.text for ref in r.references] for r in load_canonical(corpus_path)
    }
    generations: list[GenerationRecord] = []
    with open(gen_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                generations.append(GenerationRecord.from_json(line))

    groups: dict[tuple[str, str], list[GenerationRecord]] = {}
    for g in generations:
        if g.ok:
            groups.setdefault((g.model, g.method), []).append(g)

    rows: list[MetricRow] = []
    for (model, method), group in sorted(
        groups.items(), key=lambda kv: (kv[0][0], _method_order(kv[0][1]))
    ):
        group.sort(key=lambda g: g.study_id)
        items = [(g.output_text or "", references[g.study_id]) for g in group]
        scores: dict[str, float] = {}
        per_study = [
            score_candidate(cand, refs, policy=config.multi_ref_policy)
            for cand, refs in items
        ]
        scores["rouge_l"] = sum(per_study) / len(per_study)
        for spec in config.scorers:
            values = invoke_external_scorer(spec, items)
            scores[spec.metric] = sum(values) / len(values)
        rows.append(MetricRow(model=model, method=method, scores=scores))

    with open(scores_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {"model": row.model, "method": row.method, "scores": row.scores},
                    sort_keys=True,
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
                + "\n"
            )
    manifest.record_stage("score", key, [scores_path])
    print(f"score: wrote {len(rows)} rows to {scores_path}")


def stage_report(config: RunConfig, manifest: Manifest) -> None:
    scores_path = _scores_path(config)
    key = _hash_parts(
        _hash_file(scores_path),
        _hash_obj([config.clinical_metrics, config.all_metrics]),
    )
    report_dir = config.out_dir / "report"
    table_path = report_dir / "results_table.txt"
    tsv_path = report_dir / "results.tsv"
    deltas_path = report_dir / "deltas.tsv"
    if manifest.stage_fresh("report", key, [table_path, tsv_path, deltas_path]):
        print("report: up to date")
        return

    rows: list[MetricRow] = []
    with open(scores_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                rows.append(
                    MetricRow(model=obj["model"], method=obj["method"], scores=obj["scores"])
                )
    if not rows:
        raise StageError("report: nothing to report (no scored rows)")

    rows.sort(key=lambda r: (r.model, _method_order(r.method)))
    rows = normalized_averages(rows, config.clinical_metrics, config.all_metrics)
    metric_names = list(config.all_metrics)
    report_dir.mkdir(parents=True, exist_ok=True)
    table_path.write_text(format_results_table(rows, metric_names), encoding="utf-8")
    write_results_tsv(rows, metric_names, tsv_path)
    deltas = delta_report(rows)
    write_delta_tsv(deltas, metric_names, deltas_path)
    chart_files = emit_charts(deltas, report_dir / "charts")
    outputs = [table_path, tsv_path, deltas_path] + chart_files
    manifest.record_stage("report", key, outputs)
    print(f"report: wrote tables and {len(chart_files)} chart file(s) under {report_dir}")


def stage_eval_serve(
    config: RunConfig,
    manifest: Manifest,
    host: str = "127.0.0.1",
    port: int = 8800,
    frontend_dir: Optional[str] = None,
    serve: bool = True,
):
    from .service import create_app

    gen_path = _generations_path(config)
    corpus = {r.study_id: r for r in load_canonical(_corpus_path(config))}
    inputs = []
    with open(gen_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            g = GenerationRecord.from_json(line)
            if not g.ok:
                continue
            study = corpus[g.study_id]
            inputs.append(
                GenerationInput(
                    model=g.model,
                    method=g.method,
                    study_id=g.study_id,
                    candidate_text=g.output_text or "",
                    references=tuple(ref.text for ref in study.references),
                    image_path=study.image_path if config.annotators_see_images else None,
                )
            )
    if not inputs:
        raise StageError("eval-serve: no successful generations to review")
    if not config.annotators:
        raise StageError("eval-serve: config.annotators is empty")

    store = SessionStore(config.out_dir / "eval_sessions")
    session = create_session(inputs, config.annotators, seed=config.session_seed)
    if session.session_id not in {p.name for p in (config.out_dir / "eval_sessions").iterdir()}:
        store.create(session)
        print(f"eval-serve: created session {session.session_id}", flush=True)
    else:
        print(f"eval-serve: resuming session {session.session_id}", flush=True)

    app = create_app(store, image_base_dir=config.base_dir, frontend_dir=frontend_dir)
    if not serve:  # test hook: hand back the app instead of blocking
        return app, store, session.session_id
    import uvicorn

    # Flush before uvicorn blocks; otherwise redirected output never shows
    # the session id the annotator URL needs.
    print(f"eval-serve: session {session.session_id} on http://{host}:{port}", flush=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


STAGES = ("ingest", "ground", "render", "generate", "score", "report", "eval-serve")


def dispatch(subcommand: str, config: RunConfig, **kwargs) -> int:
    manifest = Manifest(config.out_dir)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    copy_path = config.out_dir / "config.json"
    if not copy_path.exists():
        copy_path.write_text(config.raw_text, encoding="utf-8")
    manifest.data.update(
        {
            "config_hash": config.config_hash,
            "tokenization": TOKENIZATION_ID,
            "multi_ref_policy": config.multi_ref_policy,
            "seeds": {"exemplars": config.exemplar_seed, "session": config.session_seed},
        }
    )
    try:
        if subcommand == "ingest":
            stage_ingest(config, manifest)
        elif subcommand == "ground":
            stage_ground(config, manifest)
        elif subcommand == "render":
            stage_render(config, manifest)
        elif subcommand == "generate":
            stage_generate(
                config,
                manifest,
                methods_arg=kwargs.get("methods"),
                model_arg=kwargs.get("model"),
            )
        elif subcommand == "score":
            stage_score(config, manifest)
        elif subcommand == "report":
            stage_report(config, manifest)
        elif subcommand == "eval-serve":
            stage_eval_serve(
                config,
                manifest,
                host=kwargs.get("host", "127.0.0.1"),
                port=kwargs.get("port", 8800),
                frontend_dir=kwargs.get("frontend_dir"),
            )
        else:
            print(f"unknown subcommand: {subcommand}", file=sys.stderr)
            return 2
    except (StageError, CorpusError, ConfigError, PromptError, ScorerError, EvalError) as exc:
        print(f"{subcommand}: {exc}", file=sys.stderr)
        return 1
    manifest.save()
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="gazeground", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in STAGES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--seed", type=int, default=None, help="override session/exemplar seed")
        if name == "generate":
            p.add_argument("--methods", default=None, help="comma list, e.g. '-,L,M,L&M'")
            p.add_argument("--model", default=None, help="restrict to one endpoint name")
        if name == "eval-serve":
            p.add_argument("--host", default="127.0.0.1")
            p.add_argument("--port", type=int, default=8800)
            p.add_argument("--frontend-dir", default=None)
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config, out_override=args.out)
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        config.session_seed = args.seed
        config.exemplar_seed = args.seed

    kwargs = {}
    if args.subcommand == "generate":
        kwargs = {"methods": args.methods, "model": args.model}
    if args.subcommand == "eval-serve":
        kwargs = {"host": args.host, "port": args.port, "frontend_dir": args.frontend_dir}
    return dispatch(args.subcommand, config, **kwargs)


if __name__ == "__main__":
    raise SystemExit(main())
