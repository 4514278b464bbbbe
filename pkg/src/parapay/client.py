"""Client for the payment-design service.

The CLI talks to the service through this class.  Without a base URL
the app is mounted in-process, so every subcommand exercises the same
request/response path a remote deployment would see; with a base URL
the same calls go over HTTP.  Service error envelopes are mapped back
onto the library's typed errors so callers never branch on status
codes.
"""

from __future__ import annotations

import json
import warnings

import httpx

from .errors import NumericalError, ParameterError


def _detail_message(payload) -> str:
    detail = payload.get("detail", payload) if isinstance(payload, dict) else payload
    if isinstance(detail, dict) and "message" in detail:
        return str(detail["message"])
    if isinstance(detail, str):
        return detail
    return json.dumps(detail)


def _detail_kind(payload) -> str:
    if isinstance(payload, dict) and isinstance(payload.get("detail"), dict):
        return payload["detail"].get("kind", "")
    return ""


class ServiceClient:
    """Typed wrapper over the service endpoints.

    Parameters
    ----------
    base_url : str, optional
        Address of a running service.  When omitted the app runs
        in-process (no network, no server to manage).
    timeout : float
        Request timeout in seconds for remote calls; simulation
        endpoints can run for minutes at full study sizes.
    """

    def __init__(self, base_url: str | None = None, timeout: float = 600.0):
        if base_url is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())
        else:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _handle(self, response) -> dict:
        if response.status_code == 422:
            raise ParameterError(_detail_message(response.json()))
        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = response.text
            if _detail_kind(payload) == "numerical":
                raise NumericalError(_detail_message(payload))
            raise NumericalError(
                f"service error {response.status_code}: {_detail_message(payload)}"
            )
        return response.json()

    def get(self, path: str) -> dict:
        return self._handle(self._client.get(path))

    def post(self, path: str, payload: dict) -> dict:
        return self._handle(self._client.post(path, json=payload))
