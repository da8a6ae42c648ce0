from __future__ import annotations

import json
import subprocess
import sys
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from gazeground.cli import Manifest, main as cli_main, stage_eval_serve
from gazeground.config import load_config
from gazeground.mockend import MockEndpoint

from conftest import E2E_EPOCH, E2E_PORT, GOLDEN_DIR, build_e2e_workspace


def assert_dirs_equal(actual: Path, expected: Path) -> None:
    actual_files = sorted(p.relative_to(actual) for p in actual.rglob("*") if p.is_file())
    expected_files = sorted(p.relative_to(expected) for p in expected.rglob("*") if p.is_file())
    assert actual_files == expected_files, (
        f"file sets differ:\n only actual: {set(actual_files) - set(expected_files)}\n"
        f" only expected: {set(expected_files) - set(actual_files)}"
    )
    for rel in expected_files:
        assert (actual / rel).read_bytes() == (expected / rel).read_bytes(), (
            f"byte mismatch in {rel}"
        )


@pytest.fixture
def frozen_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", E2E_EPOCH)


def run_stage(config_path: Path, stage: str, *extra: str) -> int:
    return cli_main([stage, "--config", str(config_path), *extra])


def test_full_pipeline_matches_golden_and_is_idempotent(tmp_path, frozen_clock):
    config_path = build_e2e_workspace(tmp_path)
    out_dir = tmp_path / "out"
    stages = ("ingest", "ground", "generate", "score", "report")

    started = time.monotonic()
    with MockEndpoint(port=E2E_PORT) as mock:
        for stage in stages:
            assert run_stage(config_path, stage) == 0, f"stage {stage} failed"
        first_run_requests = mock.request_count
        elapsed = time.monotonic() - started
        assert elapsed < 30.0, f"pipeline took {elapsed:.1f}s"
        assert first_run_requests == 25  # 5 studies x 5 methods

        assert_dirs_equal(out_dir, GOLDEN_DIR / "e2e_out")

        # Second pass: every stage is a cache hit; zero regeneration.
        for stage in stages:
            assert run_stage(config_path, stage) == 0
        assert mock.request_count == first_run_requests
    assert_dirs_equal(out_dir, GOLDEN_DIR / "e2e_out")


def test_generate_resumes_after_partial_failure(tmp_path, frozen_clock):
    config_path = build_e2e_workspace(tmp_path)
    with MockEndpoint(port=E2E_PORT, fail_plan=[None, None, 500, 500, 500]) as mock:
        assert run_stage(config_path, "ingest") == 0
        assert run_stage(config_path, "generate", "--methods", "-") == 0
        failures = (tmp_path / "out" / "generation_failures.jsonl").read_text().splitlines()
        assert len(failures) == 1
        ok_lines = (tmp_path / "out" / "generations.jsonl").read_text().splitlines()
        assert len(ok_lines) == 4
        count_before = mock.request_count
        # Manifest key matches but outputs are incomplete relative to the
        # corpus only for the failed study; rerun issues exactly one request.
        (tmp_path / "out" / "manifest.json").unlink()  # force stage re-entry
        assert run_stage(config_path, "generate", "--methods", "-") == 0
        assert mock.request_count == count_before + 1
        assert not (tmp_path / "out" / "generation_failures.jsonl").exists() or (
            (tmp_path / "out" / "generation_failures.jsonl").read_text().strip() == ""
        )
        ok_lines = (tmp_path / "out" / "generations.jsonl").read_text().splitlines()
        assert len(ok_lines) == 5


def test_report_with_no_rows_is_explicit_failure(tmp_path, frozen_clock, capsys):
    config_path = build_e2e_workspace(tmp_path)
    out = tmp_path / "out"
    out.mkdir()
    (out / "scores.jsonl").write_text("")
    assert run_stage(config_path, "report") == 1
    assert "nothing to report" in capsys.readouterr().err


def test_missing_config_is_config_error(tmp_path, capsys):
    assert cli_main(["ingest", "--config", str(tmp_path / "nope.json")]) == 1
    assert "config" in capsys.readouterr().err


def test_ingest_writes_stats_with_sidecar(tmp_path, frozen_clock):
    config_path = build_e2e_workspace(tmp_path)
    sidecar = {
        "e1": {"findings": "enlarged cardiac silhouette", "impression": "cardiomegaly"},
        "e2": {"findings": None, "impression": "opacity"},
    }
    (tmp_path / "sidecar.json").write_text(json.dumps(sidecar), encoding="utf-8")
    config = json.loads(config_path.read_text())
    config["sidecar_path"] = "sidecar.json"
    config_path.write_text(json.dumps(config, indent=1, sort_keys=True) + "\n")
    assert run_stage(config_path, "ingest") == 0
    stats = json.loads((tmp_path / "out" / "corpus_stats.json").read_text())
    assert stats["n_images"] == 5
    assert stats["n_reports"] == 9
    assert stats["avg_reports_per_image"] == pytest.approx(1.8)
    assert stats["n_missing_findings"] == 4  # e2 explicit None + e3..e5 absent
    assert stats["n_missing_impression"] == 3


def test_render_stage_writes_only_images(tmp_path, frozen_clock):
    config_path = build_e2e_workspace(tmp_path)
    assert run_stage(config_path, "ingest") == 0
    assert run_stage(config_path, "render") == 0
    render_dir = tmp_path / "out" / "render"
    assert len(list(render_dir.glob("*.png"))) == 10
    assert not (tmp_path / "out" / "summaries.jsonl").exists()


def test_cli_runs_as_module_subprocess(tmp_path, frozen_clock):
    config_path = build_e2e_workspace(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "gazeground.cli", "ingest", "--config", str(config_path)],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin:/usr/local/bin", "SOURCE_DATE_EPOCH": E2E_EPOCH},
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "corpus.jsonl").exists()


def test_prompt_reconstructable_from_bundle_store(tmp_path, frozen_clock):
    """Provenance: every generation's prompt digest resolves to a stored bundle."""
    config_path = build_e2e_workspace(tmp_path)
    with MockEndpoint(port=E2E_PORT):
        for stage in ("ingest", "ground", "generate"):
            assert run_stage(config_path, stage) == 0
    out = tmp_path / "out"
    from gazeground.promptkit import PromptBundle

    for line in (out / "generations.jsonl").read_text().splitlines():
        record = json.loads(line)
        bundle_path = out / "bundles" / f"{record['prompt_digest']}.json"
        assert bundle_path.exists()
        bundle = PromptBundle.from_json(bundle_path.read_text())
        assert bundle.digest == record["prompt_digest"]
        assert bundle.study_id == record["study_id"]


def test_eval_serve_round_trip(tmp_path, frozen_clock, monkeypatch):
    config_path = build_e2e_workspace(tmp_path)
    with MockEndpoint(port=E2E_PORT):
        for stage in ("ingest", "ground", "generate"):
            assert run_stage(config_path, stage) == 0
    config = load_config(config_path)
    manifest = Manifest(config.out_dir)
    app, store, session_id = stage_eval_serve(config, manifest, serve=False)
    http = TestClient(app)
    first = http.get(f"/sessions/{session_id}/next", params={"annotator": "rad1"})
    assert first.status_code == 200
    payload = first.json()
    assert payload["progress"]["total"] == 25
    assert "mock-model" not in json.dumps(payload)
    image = http.get(payload["image_url"])
    assert image.status_code == 200 and image.content[:4] == b"\x89PNG"


def test_eval_serve_can_withhold_images(tmp_path, frozen_clock):
    config_path = build_e2e_workspace(tmp_path)
    with MockEndpoint(port=E2E_PORT):
        for stage in ("ingest", "ground", "generate"):
            assert run_stage(config_path, stage) == 0
    config_obj = json.loads(config_path.read_text())
    config_obj["annotators_see_images"] = False
    config_path.write_text(json.dumps(config_obj, indent=1, sort_keys=True) + "\n")
    config = load_config(config_path)
    app, store, session_id = stage_eval_serve(config, Manifest(config.out_dir), serve=False)
    http = TestClient(app)
    payload = http.get(f"/sessions/{session_id}/next", params={"annotator": "rad1"}).json()
    assert payload["image_url"] is None
