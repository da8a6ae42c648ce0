from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def pytest_runtest_logreport(report):
    # One visible verdict line per acceptance criterion.
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        sys.stderr.write(f"ACCEPTANCE {name}: {status}\n")

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from gazeground.corpus import (
    AdapterConfig,
    BoundingBox,
    DictatedReport,
    Fixation,
    SourceConfig,
    StudyRecord,
)

GOLDEN_DIR = Path(__file__).parent / "golden"

BOX_COLUMNS = {"study_id": "dicom_id", "x1": "x_min", "y1": "y_min",
               "x2": "x_max", "y2": "y_max", "label": "finding"}
FIX_COLUMNS = {"study_id": "dicom_id", "x": "gaze_x", "y": "gaze_y", "t": "duration_s"}
REP_COLUMNS = {"study_id": "dicom_id", "text": "report_text", "source_id": "session"}


def synthetic_image(width: int, height: int, seed: int) -> Image.Image:
    """Deterministic gray chest-film-ish gradient with a seeded texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    base = 90 + 70 * np.sin(xx / max(width, 1) * 3.1) * np.cos(yy / max(height, 1) * 2.3)
    noise = rng.integers(0, 25, size=(height, width))
    gray = np.clip(base + noise, 0, 255).astype(np.uint8)
    return Image.fromarray(gray, mode="L").convert("RGB")


def make_study(study_id: str = "s1", width: int = 200, height: int = 160,
               n_boxes: int = 2, n_fix: int = 4, n_refs: int = 2) -> StudyRecord:
    boxes = [
        BoundingBox(10.0 + 30 * i, 10.0 + 20 * i, 70.0 + 30 * i, 60.0 + 20 * i,
                    label=f"Finding{i}")
        for i in range(n_boxes)
    ]
    fixations = [
        Fixation(x=15.0 + 7 * j, y=20.0 + 5 * j, t=0.25 + 0.1 * j, ordinal=j)
        for j in range(n_fix)
    ]
    references = [
        DictatedReport(text=f"reference report {k} for {study_id}", source_id=f"r{k}")
        for k in range(n_refs)
    ]
    return StudyRecord(
        study_id=study_id,
        image_path=f"images/{study_id}.png",
        width=width,
        height=height,
        boxes=boxes,
        fixations=fixations,
        references=references,
    )


def write_source_fixture(root: Path, studies: list[dict]) -> AdapterConfig:
    """Write adapter CSVs + images for the given study descriptions.

    Each study dict: {"study_id", "width", "height", "boxes": [(x1,y1,x2,y2,label)],
    "fixations": [(x,y,t)], "reports": [text, ...]}
    """
    (root / "images").mkdir(parents=True, exist_ok=True)
    box_lines = ["dicom_id,x_min,y_min,x_max,y_max,finding"]
    fix_lines = ["dicom_id,gaze_x,gaze_y,duration_s"]
    rep_lines = ["dicom_id,report_text,session"]
    man_lines = ["study_id,image_path"]
    for i, s in enumerate(studies):
        sid = s["study_id"]
        img = synthetic_image(s.get("width", 200), s.get("height", 160), seed=1000 + i)
        img.save(root / "images" / f"{sid}.png", format="PNG")
        man_lines.append(f"{sid},images/{sid}.png")
        for (x1, y1, x2, y2, label) in s.get("boxes", []):
            box_lines.append(f"{sid},{x1},{y1},{x2},{y2},{label}")
        for (x, y, t) in s.get("fixations", []):
            fix_lines.append(f"{sid},{x},{y},{t}")
        for k, text in enumerate(s.get("reports", [])):
            rep_lines.append(f'{sid},"{text}",sess{k}')
    (root / "boxes.csv").write_text("\n".join(box_lines) + "\n", encoding="utf-8")
    (root / "fixations.csv").write_text("\n".join(fix_lines) + "\n", encoding="utf-8")
    (root / "reports.csv").write_text("\n".join(rep_lines) + "\n", encoding="utf-8")
    (root / "images.csv").write_text("\n".join(man_lines) + "\n", encoding="utf-8")
    return AdapterConfig(
        boxes=SourceConfig(path="boxes.csv", columns=BOX_COLUMNS),
        fixations=SourceConfig(path="fixations.csv", columns=FIX_COLUMNS),
        reports=SourceConfig(path="reports.csv", columns=REP_COLUMNS),
        image_manifest="images.csv",
        base_dir=str(root),
    )


DEFAULT_STUDIES = [
    {
        "study_id": "s1",
        "boxes": [(20, 20, 90, 80, "Cardiomegaly")],
        "fixations": [(30, 30, 0.5), (40, 50, 0.7), (150, 120, 0.3)],
        "reports": ["heart size is enlarged", "cardiomegaly without effusion"],
    },
    {
        "study_id": "s2",
        "boxes": [(10, 10, 60, 60, "Pneumonia"), (100, 40, 180, 140, "Effusion")],
        "fixations": [(15, 15, 0.4), (120, 70, 1.1)],
        "reports": ["patchy right opacity suggests pneumonia"],
    },
    {
        "study_id": "s3",
        "boxes": [],
        "fixations": [(80, 90, 0.9)],
        "reports": ["clear lungs", "no acute abnormality", "stable exam"],
    },
]


@pytest.fixture
def source_fixture(tmp_path):
    adapters = write_source_fixture(tmp_path, DEFAULT_STUDIES)
    return tmp_path, adapters


# --- end-to-end fixture workspace -------------------------------------------

E2E_PORT = 18731
E2E_EPOCH = "1700000000"

E2E_STUDIES = [
    {
        "study_id": "e1",
        "width": 160, "height": 120,
        "boxes": [(20, 20, 80, 70, "Cardiomegaly")],
        "fixations": [(30, 30, 0.5), (50, 60, 0.75), (140, 100, 0.25)],
        "reports": ["the heart is enlarged", "cardiomegaly is present"],
    },
    {
        "study_id": "e2",
        "width": 160, "height": 120,
        "boxes": [(10, 10, 90, 90, "Pneumonia"), (20, 20, 50, 50, "Nodule")],
        "fixations": [(30, 30, 1.0), (70, 70, 0.5), (30, 35, 0.25), (100, 100, 0.4)],
        "reports": ["patchy opacity with a nodule"],
    },
    {
        "study_id": "e3",
        "width": 160, "height": 120,
        "boxes": [],
        "fixations": [(40, 40, 0.3), (90, 60, 0.6)],
        "reports": ["no acute abnormality", "clear lungs bilaterally"],
    },
    {
        "study_id": "e4",
        "width": 160, "height": 120,
        "boxes": [(5, 5, 40, 40, "Effusion"), (60, 10, 120, 60, "Atelectasis"),
                   (100, 70, 150, 110, "Opacity")],
        "fixations": [],
        "reports": ["layering effusion with atelectasis"],
    },
    {
        "study_id": "e5",
        "width": 160, "height": 120,
        "boxes": [(15, 15, 70, 65, "Consolidation"), (80, 40, 140, 100, "Pneumothorax")],
        "fixations": [(20, 20, 0.2), (100, 60, 0.9), (25, 30, 0.35), (120, 80, 0.15),
                        (10, 110, 0.5)],
        "reports": ["right consolidation", "small apical pneumothorax", "support lines in place"],
    },
]

E2E_EXEMPLARS = [
    {"id": "pool-a", "text": "No pneumothorax. Support apparatus. Mediastinum normal."},
    {"id": "pool-b", "text": "Bilateral pleural effusions with superimposed atelectasis."},
    {"id": "pool-c", "text": "A large right pleural effusion is present. Heart is normal in size."},
    {"id": "pool-d", "text": "Lungs clear. No acute osseous abnormality."},
]


def build_e2e_workspace(root: Path) -> Path:
    """Write the five-study fixture corpus, exemplar pool, and run config.

    Everything is seeded/relative, so two builds produce identical bytes no
    matter where ``root`` lives. Returns the config path.
    """
    root.mkdir(parents=True, exist_ok=True)
    write_source_fixture(root, E2E_STUDIES)
    with open(root / "exemplars.jsonl", "w", encoding="utf-8") as fh:
        for entry in E2E_EXEMPLARS:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    config = {
        "adapters": {
            "boxes": {"path": "boxes.csv", "columns": BOX_COLUMNS},
            "fixations": {"path": "fixations.csv", "columns": FIX_COLUMNS},
            "reports": {"path": "reports.csv", "columns": REP_COLUMNS},
            "image_manifest": "images.csv",
        },
        "render": {
            "box_stroke_px": 2,
            "label_font_px": 10,
            "heatmap_sigma_px": 6.0,
            "heatmap_alpha": 0.4,
            "palette_seed": 0,
            "heatmap_weight": "duration",
        },
        "methods": ["-", "L", "M", "L&M", "I&L&M"],
        "endpoints": [
            {
                "name": "mock-model",
                "base_url": f"http://127.0.0.1:{E2E_PORT}/v1",
                "max_new_tokens": 512,
                "request_timeout_s": 10,
                "max_retries": 2,
            }
        ],
        "scorers": [
            {
                "metric": "unigram_f1",
                "transport": "subprocess",
                "command": ["python3", "-m", "gazeground.mock_scorer"],
                "batch_size": 16,
                "classification": "clinical",
            }
        ],
        "metric_sets": {"clinical": ["unigram_f1"], "all": ["rouge_l", "unigram_f1"]},
        "multi_ref_policy": "max",
        "seeds": {"exemplars": 7, "session": 1},
        "exemplar_pool_path": "exemplars.jsonl",
        "exemplar_pool_attested_disjoint": True,
        "annotators": ["rad1", "rad2", "rad3"],
        "out_dir": "out",
        "max_workers": 1,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return config_path


@pytest.fixture
def study() -> StudyRecord:
    return make_study()


def load_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))
