from __future__ import annotations

from typing import Any, Dict, Protocol

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .errors import RemoteError


class SessionLike(Protocol):
    def post(self, url: str, json: Any = ..., timeout: float = ...) -> Any:  # pragma: no cover - protocol
        ...


def build_session(retries: int) -> requests.Session:
    """
    Build a requests session for the translation / scoring services.

    Connection errors, read timeouts and 429/5xx responses are retried up to
    `retries` times with exponential backoff. POST is retried too: both
    services are pure functions of the request body.
    """
    retry = Retry(
        total=retries,
        connect=retries,
        read=retries,
        status=retries,
        backoff_factor=0.5,
        status_forcelist=(429, 500, 502, 503, 504),
        allowed_methods=None,
        raise_on_status=False,
    )
    session = requests.Session()
    adapter = HTTPAdapter(max_retries=retry)
    session.mount("http://", adapter)
    session.mount("https://", adapter)
    return session


def post_json(
    session: SessionLike, url: str, payload: Dict[str, Any], timeout: float
) -> Dict[str, Any]:
    try:
        resp = session.post(url, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise RemoteError(f"POST {url} failed after retries: {exc!r}", url=url) from exc
    if resp.status_code != 200:
        raise RemoteError(
            f"POST {url} returned HTTP {resp.status_code}",
            url=url,
            status=resp.status_code,
        )
    try:
        data = resp.json()
    except ValueError as exc:
        raise RemoteError(f"POST {url} returned a non-JSON body", url=url) from exc
    if not isinstance(data, dict):
        raise RemoteError(f"POST {url} returned {type(data).__name__}, expected an object", url=url)
    return data
