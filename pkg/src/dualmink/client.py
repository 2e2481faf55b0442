"""Thin client for the service.

Without a server URL the client mounts the ASGI app in-process (no network,
no separate process); with one it speaks plain HTTP to a running service.
The CLI is built on this, so every command works standalone and against a
remote deployment alike.
"""

from __future__ import annotations

import httpx


class ServiceClient:
    def __init__(self, server: str | None = None, timeout: float = 600.0):
        if server is None:
            import warnings

            from .service import create_app

            with warnings.catch_warnings():
                # starlette >= 1.3 prefers httpx2, which this environment
                # does not ship; plain httpx remains fully functional here
                warnings.filterwarnings("ignore", message=".*httpx2.*")
                from starlette.testclient import TestClient
                self._client = TestClient(create_app())
        else:
            self._client = httpx.Client(base_url=server, timeout=timeout)

    def post(self, path: str, payload: dict) -> httpx.Response:
        return self._client.post(path, json=payload)

    def get(self, path: str) -> httpx.Response:
        return self._client.get(path)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
