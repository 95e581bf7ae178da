"""Shared JSON-over-HTTP helper with retry/backoff semantics."""

from __future__ import annotations

import logging
import time
from typing import Optional

import requests

from .errors import TransportError

logger = logging.getLogger(__name__)


def post_json(
    endpoint: str,
    payload: dict,
    *,
    headers: Optional[dict] = None,
    timeout: float = 30.0,
    max_retries: int = 3,
    backoff: float = 0.5,
    what: str = "endpoint",
) -> dict:
    """POST a JSON payload and return the parsed JSON response.

    Retries transport-level failures (connection errors, HTTP errors,
    unparseable bodies) with exponential backoff, then raises
    :class:`TransportError` carrying the attempt count.
    """
    last: Optional[Exception] = None
    for attempt in range(1, max_retries + 1):
        try:
            resp = requests.post(
                endpoint, json=payload, headers=headers, timeout=timeout
            )
            resp.raise_for_status()
            return resp.json()
        except (requests.RequestException, ValueError) as exc:
            last = exc
            logger.warning(
                "%s call to %s failed (attempt %d/%d): %s",
                what, endpoint, attempt, max_retries, exc,
            )
            if attempt < max_retries:
                time.sleep(backoff * (2 ** (attempt - 1)))
    raise TransportError(
        f"{what} {endpoint} failed after {max_retries} attempts: {last}",
        attempts=max_retries,
    )
