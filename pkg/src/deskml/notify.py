"""Notification delivery.

The control plane records every notification in the log; delivery to sinks
happens once, at origin time, never on replay. Real email stays out; a file
sink and a webhook sink cover the integration surface.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .types import Notification

log = logging.getLogger(__name__)


class MemorySink:
    def __init__(self):
        self.delivered: list[Notification] = []

    def deliver(self, notification: Notification) -> None:
        self.delivered.append(notification)


class FileSink:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def deliver(self, notification: Notification) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({
                "recipient": notification.recipient,
                "session_id": notification.session_id,
                "kind": notification.kind.value,
                "detail": notification.detail,
                "ts": notification.ts,
            }) + "\n")


class WebhookSink:
    def __init__(self, url: str, timeout_s: float = 2.0):
        self.url = url
        self.timeout_s = timeout_s

    def deliver(self, notification: Notification) -> None:
        import requests

        resp = requests.post(self.url, json={
            "recipient": notification.recipient,
            "session_id": notification.session_id,
            "kind": notification.kind.value,
            "detail": notification.detail,
            "ts": notification.ts,
        }, timeout=self.timeout_s)
        resp.raise_for_status()


class Notifier:
    def __init__(self, sinks=None, max_attempts: int = 3):
        self.sinks = list(sinks) if sinks else []
        self.max_attempts = max_attempts

    def deliver(self, notification: Notification) -> None:
        for sink in self.sinks:
            for attempt in range(1, self.max_attempts + 1):
                try:
                    sink.deliver(notification)
                    break
                except Exception as exc:
                    if attempt == self.max_attempts:
                        log.warning(
                            "notification to %s via %s dropped after %d attempts: %s",
                            notification.recipient, type(sink).__name__, attempt, exc,
                        )
