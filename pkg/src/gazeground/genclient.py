"""Chat-completion client for multimodal endpoints, with a content-addressed cache.

Requests go out one study at a time (batch size 1) with deterministic
decoding: temperature 0, falling back exactly once to 0.1 for stacks that
reject 0, and a 512-token generation cap. Results are cached under
(model, method, prompt digest, decode-params hash); reruns hit the cache
and never re-issue a request.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, Sequence

import requests

from .promptkit import MethodFlags, PromptBundle
from .timeutil import Stopwatch, now_iso

DEFAULT_MAX_NEW_TOKENS = 512
TEMPERATURE_POLICY = (0.0, 0.1)  # try 0, fall back once to 0.1 where 0 is rejected

# Model roster the harness is configured for; weights and serving stacks are
# external. Names are also the blinding lexicon for expert review.
DEFAULT_MODEL_REGISTRY = (
    "CXR-LLaVA",
    "MAIRA2",
    "LLaVA-Med",
    "Llama3.2V",
    "LLaVA-OV",
    "Qwen2.5VL",
)


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    base_url: str
    auth_env_var: Optional[str] = None
    temperature_policy: tuple[float, float] = TEMPERATURE_POLICY
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    request_timeout_s: float = 60.0
    max_retries: int = 2

    def params_hash(self) -> str:
        canon = json.dumps(
            {
                "temperature_policy": list(self.temperature_policy),
                "max_new_tokens": self.max_new_tokens,
            },
            sort_keys=True,
        )
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


@dataclass
class GenerationRecord:
    study_id: str
    model: str
    method: str
    prompt_digest: str
    output_text: Optional[str]
    decode_params: dict
    latency_ms: int
    timestamp: str
    attempts: int
    error_class: Optional[str] = None
    error_detail: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error_class is None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "GenerationRecord":
        return cls(**json.loads(text))


def build_request_payload(ep: ModelEndpoint, bundle: PromptBundle, temperature: float) -> dict:
    """Chat-completion request body: system turn, exemplar turns, then the study turn."""
    messages: list[dict] = [{"role": "system", "content": bundle.system_text}]
    for exemplar in bundle.exemplars:
        messages.append({"role": "user", "content": bundle.exemplar_prompt_text})
        messages.append({"role": "assistant", "content": exemplar})
    messages.append(
        {
            "role": "user",
            "content": [
                {"type": "text", "text": bundle.user_text},
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:{bundle.image_mime};base64,{bundle.image_b64}"},
                },
            ],
        }
    )
    return {
        "model": ep.name,
        "messages": messages,
        "temperature": temperature,
        "max_new_tokens": ep.max_new_tokens,
    }


def _auth_headers(ep: ModelEndpoint) -> dict[str, str]:
    if not ep.auth_env_var:
        return {}
    token = os.environ.get(ep.auth_env_var)
    if not token:
        raise GenerationError(f"auth env var {ep.auth_env_var} is not set")
    return {"Authorization": f"Bearer {token}"}


def _classify_http(status: int) -> str:
    if status in (401, 403):
        return "auth"
    if status == 429:
        return "rate-limit"
    if 400 <= status < 500:
        return "rejection"
    return "server"


def _is_temperature_rejection(status: int, body_text: str) -> bool:
    return status == 400 and "temperature" in body_text.lower()


def generate_report(
    ep: ModelEndpoint,
    bundle: PromptBundle,
    session: Optional[requests.Session] = None,
) -> GenerationRecord:
    """Issue one generation request; returns a failure record rather than raising.

    Transient failures (timeout, connection, rate limit, 5xx) are retried up
    to ep.max_retries. A temperature-0 rejection triggers exactly one
    fallback retry at 0.1, and the record carries the value actually used.
    """
    http = session or requests
    url = ep.base_url.rstrip("/") + "/chat/completions"
    headers = _auth_headers(ep)
    temp_index = 0
    attempts = 0
    transient_retries = 0
    watch = Stopwatch()
    error_class = "unknown"
    error_detail = ""

    while True:
        temperature = ep.temperature_policy[temp_index]
        payload = build_request_payload(ep, bundle, temperature)
        attempts += 1
        try:
            resp = http.post(url, json=payload, headers=headers, timeout=ep.request_timeout_s)
        except requests.Timeout:
            error_class, error_detail = "timeout", f"no response within {ep.request_timeout_s}s"
            if transient_retries < ep.max_retries:
                transient_retries += 1
                continue
            break
        except requests.ConnectionError as exc:
            error_class, error_detail = "network", str(exc)
            if transient_retries < ep.max_retries:
                transient_retries += 1
                continue
            break

        if resp.status_code == 200:
            try:
                output_text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError) as exc:
                error_class, error_detail = "protocol", f"malformed response: {exc}"
                break
            return GenerationRecord(
                study_id=bundle.study_id,
                model=ep.name,
                method=bundle.flags.label,
                prompt_digest=bundle.digest,
                output_text=output_text,
                decode_params={"temperature": temperature, "max_new_tokens": ep.max_new_tokens},
                latency_ms=watch.elapsed_ms(),
                timestamp=now_iso(),
                attempts=attempts,
            )

        body_text = resp.text or ""
        if _is_temperature_rejection(resp.status_code, body_text) and temp_index == 0:
            temp_index = 1  # single fallback, per decoding policy
            continue
        error_class = _classify_http(resp.status_code)
        error_detail = f"HTTP {resp.status_code}: {body_text[:200]}"
        if error_class in ("rate-limit", "server") and transient_retries < ep.max_retries:
            transient_retries += 1
            continue
        break

    return GenerationRecord(
        study_id=bundle.study_id,
        model=ep.name,
        method=bundle.flags.label,
        prompt_digest=bundle.digest,
        output_text=None,
        decode_params={
            "temperature": ep.temperature_policy[temp_index],
            "max_new_tokens": ep.max_new_tokens,
        },
        latency_ms=watch.elapsed_ms(),
        timestamp=now_iso(),
        attempts=attempts,
        error_class=error_class,
        error_detail=error_detail,
    )


class GenerationCache:
    """Directory of one JSON record per (model, method, prompt digest, params hash)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _key_path(self, model: str, flags: MethodFlags, digest: str, params_hash: str) -> Path:
        model_slug = "".join(c if c.isalnum() or c in "-._" else "_" for c in model)
        return self.root / f"{model_slug}__{flags.slug}__{digest[:16]}__{params_hash}.json"

    def get(self, model: str, flags: MethodFlags, digest: str, params_hash: str) -> Optional[GenerationRecord]:
        path = self._key_path(model, flags, digest, params_hash)
        if not path.exists():
            return None
        return GenerationRecord.from_json(path.read_text(encoding="utf-8"))

    def put(self, record: GenerationRecord, flags: MethodFlags, params_hash: str) -> None:
        path = self._key_path(record.model, flags, record.prompt_digest, params_hash)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(record.to_json(), encoding="utf-8")
        os.replace(tmp, path)  # atomic on POSIX


@dataclass
class BatchReport:
    records: list[GenerationRecord] = field(default_factory=list)
    failures: list[GenerationRecord] = field(default_factory=list)
    cache_hits: int = 0
    requests_issued: int = 0

    def summary(self) -> str:
        return (
            f"{len(self.records)} ok ({self.cache_hits} cached), "
            f"{len(self.failures)} failed, {self.requests_issued} requests issued"
        )


def run_batch(
    bundles: Sequence[PromptBundle],
    ep: ModelEndpoint,
    cache: GenerationCache,
    max_workers: int = 1,
) -> BatchReport:
    """Generate for every bundle, skipping cache hits; per-study failures don't abort."""
    report = BatchReport()
    params_hash = ep.params_hash()
    lock = threading.Lock()
    to_generate: list[PromptBundle] = []

    for bundle in bundles:
        hit = cache.get(ep.name, bundle.flags, bundle.digest, params_hash)
        if hit is not None:
            report.records.append(hit)
            report.cache_hits += 1
        else:
            to_generate.append(bundle)

    def _one(bundle: PromptBundle) -> None:
        record = generate_report(ep, bundle)
        with lock:
            report.requests_issued += 1
            if record.ok:
                cache.put(record, bundle.flags, params_hash)
                report.records.append(record)
            else:
                report.failures.append(record)

    if max_workers <= 1:
        for bundle in to_generate:
            _one(bundle)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(_one, to_generate))

    report.records.sort(key=lambda r: (r.model, r.method, r.study_id))
    report.failures.sort(key=lambda r: (r.model, r.method, r.study_id))
    return report
