#!/usr/bin/env python3
"""Launch a review service over a synthetic session for UI integration tests.

Prints one READY line with JSON ({"port", "session_id", "store_dir"}) once
the session exists, then serves until killed. The store directory is a
fresh temp dir; the test inspects its annotations.jsonl directly to verify
round-trip fidelity.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

import numpy as np
import uvicorn
from PIL import Image

from gazeground.experteval import GenerationInput, SessionStore, create_session
from gazeground.service import create_app

MODELS = ("CXR-LLaVA", "MAIRA2", "LLaVA-OV", "Qwen2.5VL")
METHODS = ("-", "L&M", "I&L&M")


def synthetic_png(path: Path, seed: int) -> None:
    rng = np.random.default_rng(seed)
    gray = rng.integers(40, 200, size=(48, 64), dtype=np.uint8)
    Image.fromarray(gray, mode="L").save(path, format="PNG")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--items", type=int, default=24)
    args = parser.parse_args()

    base = Path(tempfile.mkdtemp(prefix="gazeground-ui-"))
    images = base / "images"
    images.mkdir()
    inputs = []
    for i in range(args.items):
        image_rel = f"images/img{i % 4}.png"
        synthetic_png(base / image_rel, seed=i % 4)
        inputs.append(
            GenerationInput(
                model=MODELS[i % len(MODELS)],
                method=METHODS[i % len(METHODS)],
                study_id=f"study-{i:03d}",
                candidate_text=(
                    f"Synthetic candidate {i}: lungs are clear, "
                    "cardiomediastinal silhouette unremarkable."
                ),
                references=(
                    f"Reference one for case {i}.",
                    f"Reference two for case {i}.",
                ),
                image_path=image_rel,
            )
        )
    store = SessionStore(base / "sessions")
    session = create_session(inputs, ["ui-tester"], seed=42)
    store.create(session)
    app = create_app(store, image_base_dir=base)

    print(
        "READY "
        + json.dumps(
            {
                "port": args.port,
                "session_id": session.session_id,
                "store_dir": str(base / "sessions" / session.session_id),
            }
        ),
        flush=True,
    )
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="error")
    return 0


if __name__ == "__main__":
    sys.exit(main())
