"""Timestamps that honor SOURCE_DATE_EPOCH for reproducible runs.

When SOURCE_DATE_EPOCH is set (the reproducible-builds convention), every
recorded timestamp collapses to that instant and measured latencies read as
zero, so two runs over identical inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import os
import time
from datetime import datetime, timezone
from typing import Optional


def frozen_epoch() -> Optional[int]:
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    if raw is None or raw == "":
        return None
    return int(raw)


def now_iso() -> str:
    epoch = frozen_epoch()
    ts = epoch if epoch is not None else time.time()
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Stopwatch:
    """Millisecond timer that reads zero under a frozen clock."""

    def __init__(self) -> None:
        self._frozen = frozen_epoch() is not None
        self._start = time.monotonic()

    def elapsed_ms(self) -> int:
        if self._frozen:
            return 0
        return int((time.monotonic() - self._start) * 1000)
