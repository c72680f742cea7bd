"""Small JSON-over-HTTP client with bounded retries, shared by remote backends."""

from __future__ import annotations

import time

import requests

RETRY_ATTEMPTS = 3
RETRY_BACKOFF_SECONDS = 0.25


class TransportError(Exception):
    """Transport-level failure talking to a remote backend."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


def request_json(
    method: str,
    url: str,
    payload: dict | None = None,
    *,
    attempts: int | None = None,
    backoff: float | None = None,
    timeout: float = 30.0,
):
    """Issue a JSON request; retry transport failures and 5xx responses.

    4xx responses are not retried (the request itself is at fault).
    """
    attempts = RETRY_ATTEMPTS if attempts is None else attempts
    backoff = RETRY_BACKOFF_SECONDS if backoff is None else backoff
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = requests.request(method, url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last = TransportError(str(exc))
        else:
            if resp.status_code < 400:
                try:
                    return resp.json()
                except ValueError as exc:
                    last = TransportError(f"non-JSON response from {url}: {exc}")
            else:
                err = TransportError(
                    f"HTTP {resp.status_code} from {url}: {resp.text[:300]}",
                    status=resp.status_code,
                )
                if resp.status_code < 500:
                    raise err
                last = err
        if attempt + 1 < attempts:
            time.sleep(backoff * (2**attempt))
    assert last is not None
    if isinstance(last, TransportError):
        raise last
    raise TransportError(str(last))
