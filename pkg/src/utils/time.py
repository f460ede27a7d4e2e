from __future__ import annotations

from datetime import datetime, timezone

UTC = timezone.utc


def utc_now_iso() -> str:
    return datetime.now(UTC).isoformat()
