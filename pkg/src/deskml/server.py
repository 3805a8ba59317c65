"""HTTP/JSON gateway over a Platform.

Every mutating endpoint requires a bearer token. All handlers serialize
through the platform lock, so concurrent requests cannot interleave with the
event engine. Responses are JSON except log streaming (ndjson) and backup
(tar). Static dashboard files, when built, are served under /ui.
"""

from __future__ import annotations

import argparse
import io
import json
import re
import tarfile
import threading
import time
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional

from .errors import AuthError, DeskmlError, NotFoundError, ValidationError
from .platform import Platform
from .scenario import load_scenario
from .types import GIB, SweepSpec, SweepStrategy

ROUTES: list[tuple[str, re.Pattern, str, bool]] = []

SESSION_ID = r"(?P<sid>[^/\s]+/[^/\s]+/\d+)"


def route(method: str, pattern: str, auth: bool = True):
    def wrap(fn):
        ROUTES.append((method, re.compile(pattern), fn.__name__, auth))
        return fn
    return wrap


class Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "deskml-gateway"

    # quiet by default; tests and demos do not want request spam
    def log_message(self, fmt, *args):
        pass

    @property
    def platform(self) -> Platform:
        return self.server.platform  # type: ignore[attr-defined]

    # -- plumbing ---------------------------------------------------------------

    def _dispatch(self, method: str) -> None:
        parsed = urllib.parse.urlsplit(self.path)
        path = urllib.parse.unquote(parsed.path)
        self.query = urllib.parse.parse_qs(parsed.query)
        if path == "/" or path.startswith("/ui"):
            if method == "GET":
                return self._serve_static(path)
            return self._error(ValidationError("static files are read-only"))
        for m, pattern, name, needs_auth in ROUTES:
            if m != method:
                continue
            match = pattern.fullmatch(path)
            if match is None:
                continue
            try:
                body = self._read_body()
                with self.platform.lock:
                    user = self._authenticate() if needs_auth else None
                    getattr(self, name)(match, body, user)
            except DeskmlError as exc:
                self._error(exc)
            except BrokenPipeError:
                pass
            return
        self._error(NotFoundError(f"no route for {method} {path}"))

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _read_body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        return body

    def _authenticate(self):
        header = self.headers.get("Authorization") or ""
        if not header.startswith("Bearer "):
            raise AuthError("missing bearer token")
        return self.platform.plane.user_by_token(header[len("Bearer "):].strip())

    def _send(self, code: int, payload: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _json(self, obj: Any, code: int = 200) -> None:
        self._send(code, (json.dumps(obj, sort_keys=True) + "\n").encode(),
                   "application/json")

    def _error(self, exc: DeskmlError) -> None:
        try:
            self._json({"error": {"code": exc.code, "message": exc.message}},
                       code=exc.http_status)
        except BrokenPipeError:
            pass

    def _qp(self, name: str, default: Optional[str] = None) -> Optional[str]:
        values = self.query.get(name)
        return values[0] if values else default

    def _serve_static(self, path: str) -> None:
        ui_dir = getattr(self.server, "ui_dir", None)
        if ui_dir is None:
            return self._error(NotFoundError("dashboard not built"))
        rel = path[len("/ui"):].lstrip("/") if path.startswith("/ui") else ""
        rel = rel or "index.html"
        target = (Path(ui_dir) / rel).resolve()
        if (not str(target).startswith(str(Path(ui_dir).resolve()))
                or not target.is_file()):
            return self._error(NotFoundError(f"no static file {rel}"))
        ctype = {
            ".html": "text/html", ".js": "text/javascript",
            ".css": "text/css", ".json": "application/json",
            ".svg": "image/svg+xml",
        }.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)

    # -- auth / accounts ----------------------------------------------------------

    @route("POST", r"/v1/login", auth=False)
    def login(self, match, body, user):
        token = body.get("token") or ""
        account = self.platform.plane.user_by_token(token)
        self._json({
            "user_id": account.user_id, "role": account.role.value,
            "teams": sorted(account.teams), "credits": account.credit_balance,
        })

    @route("GET", r"/v1/users/me")
    def me(self, match, body, user):
        self._json({
            "user_id": user.user_id, "role": user.role.value,
            "teams": sorted(user.teams), "credits": user.credit_balance,
        })

    @route("POST", r"/v1/users")
    def create_user(self, match, body, user):
        account = self.platform.plane.create_user(
            user.user_id, body["user_id"], role=body.get("role", "user"),
            credits=body.get("credits", 0), teams=body.get("teams"),
        )
        if body.get("token"):
            self.platform.plane.add_token(user.user_id, body["token"],
                                          account.user_id)
        self._json({"user_id": account.user_id, "credits": account.credit_balance},
                   code=201)

    @route("POST", r"/v1/users/(?P<uid>[^/]+)/credit")
    def set_credit(self, match, body, user):
        account = self.platform.plane.set_credit(
            user.user_id, match["uid"], body["credits"]
        )
        self._json({"user_id": account.user_id, "credits": account.credit_balance})

    # -- status ----------------------------------------------------------------

    @route("GET", r"/v1/status", auth=False)
    def status(self, match, body, user):
        state = self.platform.plane.state
        self._json({
            "scheduler_epoch": state.epoch,
            "leader": state.leader,
            "nodes": len(state.nodes),
            "alive_nodes": sum(1 for n in state.nodes.values() if n.alive),
            "queue_depth": len(state.queue),
            "sessions": len(state.sessions),
            "now_ms": self.platform.engine.now_ms,
        })

    # -- sessions ----------------------------------------------------------------

    @route("POST", r"/v1/sessions")
    def run_session(self, match, body, user):
        plane = self.platform.plane
        memory = body.get("memory")
        if memory is None:
            memory = int(body.get("memory_gb", 1) * GIB)
        sid = plane.run(
            user.user_id, body["dataset_id"], body["image_id"],
            body.get("config") or {}, gpus=body.get("gpus", 1), memory=memory,
            profile=body.get("profile"), seed=body.get("seed"),
        )
        self._json({"session_id": sid,
                    "session": plane.session_info(plane.get_session(sid))},
                   code=201)

    @route("GET", r"/v1/sessions")
    def list_sessions(self, match, body, user):
        plane = self.platform.plane
        sessions = plane.list_sessions(
            user.user_id, owner=self._qp("owner"), state=self._qp("state"),
        )
        offset = int(self._qp("offset", "0"))
        limit = int(self._qp("limit", "500"))
        page = sessions[offset:offset + limit]
        self._json({
            "sessions": [plane.session_info(s) for s in page],
            "total": len(sessions),
        })

    @route("GET", rf"/v1/sessions/{SESSION_ID}")
    def get_session(self, match, body, user):
        plane = self.platform.plane
        sess = plane.get_session(match["sid"])
        plane._require_viewer(user.user_id, sess)
        self._json(plane.session_info(sess))

    @route("POST", rf"/v1/sessions/{SESSION_ID}/stop")
    def stop_session(self, match, body, user):
        sess = self.platform.plane.stop(match["sid"], user.user_id)
        self._json({"session_id": sess.session_id, "state": sess.state.value})

    @route("POST", rf"/v1/sessions/{SESSION_ID}/rm")
    def rm_session(self, match, body, user):
        self.platform.plane.rm(match["sid"], user.user_id)
        self._json({"session_id": match["sid"], "removed": True})

    @route("POST", rf"/v1/sessions/{SESSION_ID}/resume")
    def resume_session(self, match, body, user):
        sess = self.platform.plane.resume(match["sid"], user.user_id)
        self._json({"session_id": sess.session_id, "state": sess.state.value,
                    "start_step": sess.start_step})

    @route("POST", rf"/v1/sessions/{SESSION_ID}/fork")
    def fork_session(self, match, body, user):
        child = self.platform.plane.fork(
            match["sid"], user.user_id,
            overrides=body.get("overrides"), seed=body.get("seed"),
        )
        plane = self.platform.plane
        self._json({"session_id": child,
                    "session": plane.session_info(plane.get_session(child))},
                   code=201)

    @route("POST", rf"/v1/sessions/{SESSION_ID}/serve")
    def serve_session(self, match, body, user):
        sess = self.platform.plane.serve(match["sid"], user.user_id,
                                         checkpoint_id=body.get("checkpoint_id"))
        self._json({"session_id": sess.session_id, "state": sess.state.value,
                    "node_id": sess.node_id,
                    "checkpoint_id": sess.serving_checkpoint})

    @route("POST", rf"/v1/sessions/{SESSION_ID}/submit")
    def submit_session(self, match, body, user):
        result = self.platform.plane.submit(
            match["sid"], user.user_id, checkpoint_id=body.get("checkpoint_id"),
        )
        self._json(result, code=201)

    @route("POST", rf"/v1/sessions/{SESSION_ID}/infer")
    def infer_session(self, match, body, user):
        self._json(self.platform.plane.infer(match["sid"], body.get("payload")))

    @route("POST", rf"/v1/sessions/{SESSION_ID}/memo")
    def memo_session(self, match, body, user):
        self.platform.plane.set_memo(match["sid"], user.user_id,
                                     body.get("text", ""))
        self._json({"session_id": match["sid"], "memo": body.get("text", "")})

    @route("GET", rf"/v1/sessions/{SESSION_ID}/events")
    def session_events(self, match, body, user):
        from_step = self._qp("from_step")
        events = self.platform.plane.events(
            match["sid"], user.user_id, name=self._qp("name"),
            from_step=int(from_step) if from_step else None,
        )
        offset = int(self._qp("offset", "0"))
        limit = int(self._qp("limit", "100000"))
        page = events[offset:offset + limit]
        self._json({
            "session_id": match["sid"],
            "events": [[e.step, e.name, e.value, e.ts] for e in page],
            "total": len(events),
        })

    @route("GET", rf"/v1/sessions/{SESSION_ID}/checkpoints")
    def session_checkpoints(self, match, body, user):
        self._json(self.platform.plane.checkpoint_manifest(match["sid"],
                                                           user.user_id))

    @route("GET", rf"/v1/sessions/{SESSION_ID}/diff")
    def session_diff(self, match, body, user):
        other = self._qp("other")
        if not other:
            raise ValidationError("diff needs ?other=<session_id>")
        self._json(self.platform.plane.diff(match["sid"], other, user.user_id))

    @route("GET", r"/v1/sessions/compare")
    def sessions_compare(self, match, body, user):
        ids = [s for s in (self._qp("ids") or "").split(",") if s]
        self._json(self.platform.plane.compare(ids, user.user_id))

    @route("GET", rf"/v1/sessions/{SESSION_ID}/telemetry")
    def session_telemetry(self, match, body, user):
        rows = self.platform.plane.telemetry_for_session(match["sid"], user.user_id)
        self._json({"session_id": match["sid"], "samples": rows})

    @route("GET", rf"/v1/sessions/{SESSION_ID}/backup")
    def session_backup(self, match, body, user):
        bundle = self.platform.plane.bundle(match["sid"], user.user_id)
        buf = io.BytesIO()
        with tarfile.open(fileobj=buf, mode="w") as tar:
            def add(name: str, text: str):
                data = text.encode()
                info = tarfile.TarInfo(name)
                info.size = len(data)
                info.mtime = self.platform.engine.now_ms // 1000
                tar.addfile(info, io.BytesIO(data))

            add("session.json", json.dumps(bundle["session"], indent=2, sort_keys=True))
            add("events.jsonl", "\n".join(json.dumps(e) for e in bundle["events"]))
            add("checkpoints.json", json.dumps(bundle["checkpoints"], indent=2,
                                               sort_keys=True))
            add("logs.txt", "\n".join(f"{e['ts']} {e['line']}"
                                      for e in bundle["logs"]))
        self._send(200, buf.getvalue(), "application/x-tar")

    @route("GET", rf"/v1/sessions/{SESSION_ID}/logs")
    def session_logs(self, match, body, user):
        sid = match["sid"]
        plane = self.platform.plane
        lines = plane.logs(sid, user.user_id)
        if self._qp("follow") not in ("1", "true"):
            self._json({"session_id": sid, "lines": lines})
            return
        # ndjson stream until the session is terminal (bounded wall time)
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Connection", "close")
        self.end_headers()
        sent = 0
        deadline = time.monotonic() + float(self._qp("max_wall_s", "10"))
        while True:
            for entry in lines[sent:]:
                self.wfile.write((json.dumps(entry) + "\n").encode())
            self.wfile.flush()
            sent = len(lines)
            sess = plane.state.sessions.get(sid)
            if sess is None or sess.terminal or time.monotonic() > deadline:
                break
            self.platform.lock.release()
            try:
                time.sleep(0.02)
            finally:
                self.platform.lock.acquire()
            lines = plane.logs(sid, user.user_id)
        self.close_connection = True

    # -- datasets ----------------------------------------------------------------

    @route("POST", r"/v1/datasets")
    def push_dataset(self, match, body, user):
        size = body.get("size")
        if size is None:
            size = int(body.get("size_gb", 0) * GIB)
        dataset = self.platform.plane.push_dataset(
            user.user_id, body["dataset_id"], size, team=body.get("team"),
            metric_name=body.get("metric_name", "accuracy"),
            metric_order=body.get("metric_order", "desc"),
        )
        self._json(self.platform.plane.dataset_info(dataset), code=201)

    @route("GET", r"/v1/datasets")
    def list_datasets(self, match, body, user):
        plane = self.platform.plane
        self._json({
            "datasets": [plane.dataset_info(d)
                         for d in plane.list_datasets(user.user_id)],
        })

    # -- leaderboard / telemetry ----------------------------------------------------

    @route("GET", r"/v1/leaderboard/(?P<ds>[^/]+)")
    def leaderboard(self, match, body, user):
        self._json(self.platform.plane.leaderboard(match["ds"]))

    @route("GET", r"/v1/telemetry/nodes")
    def telemetry_nodes(self, match, body, user):
        self._json({"nodes": self.platform.plane.telemetry_nodes()})

    @route("GET", r"/v1/telemetry/aggregate")
    def telemetry_aggregate(self, match, body, user):
        window = self._qp("window")
        from_ms = to_ms = None
        if window:
            if ":" in window:
                a, b = window.split(":", 1)
                from_ms, to_ms = int(a), int(b)
            else:
                to_ms = self.platform.engine.now_ms
                from_ms = max(0, to_ms - int(window) * 1000)
        self._json(self.platform.plane.telemetry_aggregate(from_ms, to_ms))

    @route("GET", rf"/v1/telemetry/sessions/{SESSION_ID}")
    def telemetry_session(self, match, body, user):
        rows = self.platform.plane.telemetry_for_session(match["sid"], user.user_id)
        self._json({"session_id": match["sid"], "samples": rows})

    # -- sweeps ----------------------------------------------------------------

    @route("POST", r"/v1/sweeps")
    def create_sweep(self, match, body, user):
        memory = body.get("memory")
        if memory is None:
            memory = int(body.get("memory_gb", 1) * GIB)
        spec = SweepSpec(
            strategy=SweepStrategy(body["strategy"]),
            dataset_id=body["dataset_id"], image_id=body["image_id"],
            base_config=body.get("base_config") or {},
            space=body["space"], seed=body.get("seed", 0),
            gpus=body.get("gpus", 1), memory=memory,
            n=body.get("n", 0), population=body.get("population", 0),
            truncation_fraction=body.get("truncation_fraction", 0.25),
            perturb_factors=tuple(body.get("perturb_factors", (0.8, 1.2))),
        )
        result = self.platform.plane.start_sweep(user.user_id, spec,
                                                 profile=body.get("profile"))
        self._json(result, code=201)

    @route("GET", r"/v1/sweeps/(?P<swid>[^/]+)")
    def sweep_info(self, match, body, user):
        self._json(self.platform.plane.sweep_info(match["swid"]))

    # -- sim control -----------------------------------------------------------

    @route("POST", r"/v1/sim/advance")
    def sim_advance(self, match, body, user):
        if body.get("until_quiet"):
            consumed = self.platform.run_until_quiet(
                max_ms=body.get("max_ms", 3_600_000)
            )
        else:
            consumed = int(body.get("ms", 0))
            self.platform.advance(consumed)
        self._json({"advanced_ms": consumed, "now_ms": self.platform.engine.now_ms})

    # -- internal replication surface ---------------------------------------------

    @route("POST", r"/v1/internal/heartbeat", auth=False)
    def internal_heartbeat(self, match, body, user):
        secondary = next(
            (n for n in (self.platform.sched_a, self.platform.sched_b)
             if n.alive and n.role == "secondary"), None,
        )
        if secondary is None:
            raise NotFoundError("no standby scheduler")
        self._json(secondary.wire_heartbeat(body))

    @route("GET", r"/v1/internal/log", auth=False)
    def internal_log(self, match, body, user):
        from_seq = int(self._qp("from", "1"))
        to = self._qp("to")
        records = self.platform.plane.log.records(
            from_seq, int(to) if to else None
        )
        self._json({"records": [
            {"seq": r.seq, "kind": r.kind, "id": r.entity_id, "ts": r.ts,
             "payload": r.payload}
            for r in records
        ]})


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, platform: Platform, host: str = "127.0.0.1",
                 port: int = 0, ui_dir: Optional[str] = None):
        super().__init__((host, port), Handler)
        self.platform = platform
        self.ui_dir = str(ui_dir) if ui_dir else None

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.server_address[0]}:{self.port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def default_ui_dir() -> Optional[Path]:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="deskml-server",
                                     description="MLaaS control-plane gateway")
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--config", help="gateway config JSON (bind, tokens, rates)")
    parser.add_argument("--bind", default=None, help="host:port (overrides config)")
    parser.add_argument("--persist-dir", default=None)
    parser.add_argument("--ui-dir", default=None)
    args = parser.parse_args(argv)

    scenario = load_scenario(args.scenario)
    config: dict[str, Any] = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    bind = args.bind or config.get("bind", "127.0.0.1:8080")
    host, _, port = bind.partition(":")
    scenario.setdefault("sim", {})
    for key in ("credit_rate_per_gpu_min", "heartbeat_interval_ms",
                "failover_timeout_ms", "telemetry_period_ms",
                "tick_interval_ms", "seed"):
        if key in config:
            scenario["sim"][key] = config[key]

    platform = Platform(scenario, persist_dir=args.persist_dir)
    for token, user_id in config.get("tokens", {}).items():
        if user_id in platform.plane.state.users:
            platform.plane.add_token(None, token, user_id)

    ui_dir = args.ui_dir or default_ui_dir()
    server = GatewayServer(platform, host=host or "127.0.0.1",
                           port=int(port or 8080), ui_dir=ui_dir)
    print(f"gateway listening on {server.url} "
          f"(ui={'on' if ui_dir else 'off'})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
