"""Thin HTTP client for the gateway, shared by the CLI and scripts."""

from __future__ import annotations

import json
from typing import Any, Iterator, Optional

import requests


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, body: str):
        super().__init__(f"[{status}] {code}: {message}")
        self.status = status
        self.code = code
        self.body = body


class ApiClient:
    def __init__(self, base_url: str, token: Optional[str] = None,
                 timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout_s = timeout_s
        self.session = requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def request(self, method: str, path: str, body: Optional[dict] = None,
                params: Optional[dict] = None, stream: bool = False):
        resp = self.session.request(
            method, self.base_url + path,
            json=body, params=params, headers=self._headers(),
            timeout=self.timeout_s, stream=stream,
        )
        if resp.status_code >= 400:
            try:
                err = resp.json()["error"]
                raise ApiError(resp.status_code, err["code"], err["message"],
                               resp.text)
            except (ValueError, KeyError):
                raise ApiError(resp.status_code, "http", resp.text, resp.text)
        return resp

    def get(self, path: str, **params) -> requests.Response:
        return self.request("GET", path,
                            params={k: v for k, v in params.items()
                                    if v is not None})

    def post(self, path: str, body: Optional[dict] = None) -> requests.Response:
        return self.request("POST", path, body=body or {})

    def get_json(self, path: str, **params) -> Any:
        return self.get(path, **params).json()

    def post_json(self, path: str, body: Optional[dict] = None) -> Any:
        return self.post(path, body).json()

    # -- conveniences used by scripts ------------------------------------------

    def login(self, token: str) -> dict:
        self.token = token
        return self.post_json("/v1/login", {"token": token})

    def run(self, dataset_id: str, image_id: str, config: dict,
            gpus: int = 1, memory_gb: float = 1.0, **extra) -> dict:
        body = {"dataset_id": dataset_id, "image_id": image_id,
                "config": config, "gpus": gpus, "memory_gb": memory_gb}
        body.update(extra)
        return self.post_json("/v1/sessions", body)

    def advance(self, ms: int = 0, until_quiet: bool = False,
                max_ms: int = 3_600_000) -> dict:
        if until_quiet:
            return self.post_json("/v1/sim/advance",
                                  {"until_quiet": True, "max_ms": max_ms})
        return self.post_json("/v1/sim/advance", {"ms": ms})

    def follow_logs(self, session_id: str,
                    max_wall_s: float = 10.0) -> Iterator[dict]:
        resp = self.request(
            "GET", f"/v1/sessions/{session_id}/logs",
            params={"follow": "1", "max_wall_s": str(max_wall_s)}, stream=True,
        )
        for line in resp.iter_lines():
            if line:
                yield json.loads(line)
