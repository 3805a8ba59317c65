"""Command-line client for the gateway.

Each subcommand maps onto one API endpoint. `--json` prints the raw response
body exactly as the server sent it, so scripted output is byte-identical to
the API. Login state (host + token) lives in a small JSON file at
$DESKML_CONFIG (default ~/.deskml.json); $DESKML_HOST and $DESKML_TOKEN
override it per invocation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional

from .client import ApiClient, ApiError

DEFAULT_HOST = "http://127.0.0.1:8080"


def config_path() -> Path:
    return Path(os.environ.get("DESKML_CONFIG", Path.home() / ".deskml.json"))


def load_login() -> dict[str, Any]:
    try:
        return json.loads(config_path().read_text())
    except (OSError, ValueError):
        return {}


def save_login(data: dict[str, Any]) -> None:
    config_path().write_text(json.dumps(data, indent=2) + "\n")


def parse_arg_value(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_config_args(pairs: Optional[list[str]]) -> dict[str, Any]:
    config = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"bad -a argument {pair!r}, expected key=value")
        key, _, value = pair.partition("=")
        config[key] = parse_arg_value(value)
    return config


def emit(args, resp, render=None) -> int:
    """Print raw body under --json, otherwise a human rendering."""
    if args.json:
        sys.stdout.write(resp.text)
        return 0
    obj = resp.json()
    if render is None:
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        render(obj)
    return 0


# -- session helpers --------------------------------------------------------------


def render_session_row(s: dict[str, Any]) -> str:
    return (f"{s['session_id']:<24} {s['state']:<10} "
            f"{s['gpus']}g {s.get('node_id') or '-':<8} "
            f"{s['image_id']:<10} {s.get('memo') or ''}")


# -- subcommand handlers ------------------------------------------------------------


def cmd_login(client, args) -> int:
    host = args.host or os.environ.get("DESKML_HOST") or DEFAULT_HOST
    client = ApiClient(host, args.token)
    resp = client.post("/v1/login", {"token": args.token})
    save_login({"host": host, "token": args.token})
    if args.json:
        sys.stdout.write(resp.text)
    else:
        info = resp.json()
        print(f"logged in as {info['user_id']} ({info['role']}), "
              f"credits {info['credits']}")
    return 0


def cmd_logout(client, args) -> int:
    data = load_login()
    data.pop("token", None)
    save_login(data)
    print("logged out")
    return 0


def cmd_credit(client, args) -> int:
    resp = client.get("/v1/users/me")
    return emit(args, resp,
                lambda o: print(f"{o['user_id']}: {o['credits']} credits"))


def cmd_run(client, args) -> int:
    body = {
        "dataset_id": args.dataset, "image_id": args.image,
        "config": parse_config_args(args.arg), "gpus": args.gpus,
        "memory_gb": args.memory_gb,
    }
    if args.seed is not None:
        body["seed"] = args.seed
    resp = client.post("/v1/sessions", body)
    return emit(args, resp, lambda o: print(o["session_id"]))


def cmd_stop(client, args) -> int:
    resp = client.post(f"/v1/sessions/{args.session}/stop")
    return emit(args, resp, lambda o: print(f"{o['session_id']} {o['state']}"))


def cmd_rm(client, args) -> int:
    resp = client.post(f"/v1/sessions/{args.session}/rm")
    return emit(args, resp, lambda o: print(f"removed {o['session_id']}"))


def cmd_resume(client, args) -> int:
    resp = client.post(f"/v1/sessions/{args.session}/resume")
    return emit(args, resp,
                lambda o: print(f"{o['session_id']} resumed from step "
                                f"{o['start_step']}"))


def cmd_fork(client, args) -> int:
    body: dict[str, Any] = {"overrides": parse_config_args(args.arg)}
    if args.seed is not None:
        body["seed"] = args.seed
    resp = client.post(f"/v1/sessions/{args.session}/fork", body)
    return emit(args, resp, lambda o: print(o["session_id"]))


def cmd_ps(client, args) -> int:
    resp = client.get("/v1/sessions", owner=args.owner, state=args.state)

    def render(obj):
        for s in obj["sessions"]:
            print(render_session_row(s))

    return emit(args, resp, render)


def cmd_logs(client, args) -> int:
    if args.follow:
        for entry in client.follow_logs(args.session, max_wall_s=args.max_wall_s):
            print(f"{entry['ts']:>8} {entry['line']}")
        return 0
    resp = client.get(f"/v1/sessions/{args.session}/logs")

    def render(obj):
        for e in obj["lines"]:
            print(f"{e['ts']:>8} {e['line']}")

    return emit(args, resp, render)


def cmd_getid(client, args) -> int:
    resp = client.get("/v1/sessions", owner=args.me)
    obj = resp.json()
    mine = obj["sessions"]
    if not mine:
        print("no sessions", file=sys.stderr)
        return 1
    latest = max(mine, key=lambda s: (s["created_at"], s["session_id"]))
    print(latest["session_id"])
    return 0


def cmd_diff(client, args) -> int:
    resp = client.get(f"/v1/sessions/{args.session}/diff", other=args.other)

    def render(obj):
        for param, (a, b) in sorted(obj["changed"].items()):
            print(f"{param}: {a} -> {b}")

    return emit(args, resp, render)


def cmd_download(client, args) -> int:
    out = Path(args.output or args.session.replace("/", "_"))
    out.mkdir(parents=True, exist_ok=True)
    session = client.get_json(f"/v1/sessions/{args.session}")
    manifest = client.get_json(f"/v1/sessions/{args.session}/checkpoints")
    (out / "session.json").write_text(json.dumps(session, indent=2, sort_keys=True))
    (out / "checkpoints.json").write_text(json.dumps(manifest, indent=2,
                                                     sort_keys=True))
    print(f"wrote {out}/session.json and {out}/checkpoints.json")
    return 0


def cmd_backup(client, args) -> int:
    resp = client.get(f"/v1/sessions/{args.session}/backup")
    out = Path(args.output or args.session.replace("/", "_") + ".tar")
    out.write_bytes(resp.content)
    print(f"wrote {out} ({len(resp.content)} bytes)")
    return 0


def cmd_events(client, args) -> int:
    resp = client.get(f"/v1/sessions/{args.session}/events", name=args.name)

    def render(obj):
        for step, name, value, ts in obj["events"]:
            print(f"{step:>6} {name:<16} {value:.6f}")

    return emit(args, resp, render)


def cmd_eventlen(client, args) -> int:
    obj = client.get_json(f"/v1/sessions/{args.session}/events", name=args.name)
    print(obj["total"])
    return 0


def cmd_memo(client, args) -> int:
    resp = client.post(f"/v1/sessions/{args.session}/memo", {"text": args.text})
    return emit(args, resp, lambda o: print("memo set"))


def cmd_model(client, args) -> int:
    resp = client.get(f"/v1/sessions/{args.session}/checkpoints")

    def render(obj):
        for c in obj["checkpoints"]:
            print(f"{c['checkpoint_id']:<30} step {c['step']:>5} {c['digest']}")

    return emit(args, resp, render)


def cmd_plot(client, args) -> int:
    resp = client.get(f"/v1/sessions/{args.session}/events", name=args.name)
    if args.json:
        sys.stdout.write(resp.text)
        return 0
    obj = resp.json()
    series: dict[str, list[tuple[int, float]]] = {}
    for step, name, value, _ in obj["events"]:
        series.setdefault(name, []).append((step, value))
    width = args.width
    for name, points in sorted(series.items()):
        print(f"{name}:")
        values = [v for _, v in points]
        lo, hi = min(values), max(values)
        span = (hi - lo) or 1.0
        for step, value in points:
            bar = "#" * max(1, round((value - lo) / span * width))
            print(f"  {step:>5} {value:>10.4f} {bar}")
    return 0


def cmd_pull(client, args) -> int:
    obj = client.get_json(f"/v1/sessions/{args.session}/checkpoints")
    checkpoints = obj["checkpoints"]
    if not checkpoints:
        print("no checkpoints", file=sys.stderr)
        return 1
    if args.checkpoint:
        match = [c for c in checkpoints if c["checkpoint_id"] == args.checkpoint]
        if not match:
            print(f"no checkpoint {args.checkpoint}", file=sys.stderr)
            return 1
        chosen = match[0]
    else:
        chosen = max(checkpoints, key=lambda c: c["step"])
    out = Path(args.output or chosen["checkpoint_id"].replace("/", "_") + ".json")
    out.write_text(json.dumps(chosen, indent=2, sort_keys=True))
    print(f"wrote {out}")
    return 0


def cmd_submit(client, args) -> int:
    body = {}
    if args.checkpoint:
        body["checkpoint_id"] = args.checkpoint
    resp = client.post(f"/v1/sessions/{args.session}/submit", body)
    return emit(args, resp,
                lambda o: print(f"{o['submission_id']}: {o['metric_name']}="
                                f"{o['score']} ({o['order']})"))


def cmd_dataset(client, args) -> int:
    if args.dataset_cmd == "push":
        body = {"dataset_id": args.dataset_id, "size_gb": args.size_gb,
                "metric_name": args.metric, "metric_order": args.order}
        if args.team:
            body["team"] = args.team
        resp = client.post("/v1/datasets", body)
        return emit(args, resp, lambda o: print(f"pushed {o['dataset_id']}"))
    resp = client.get("/v1/datasets")

    def render(obj):
        for d in obj["datasets"]:
            vis = d["visibility"] if d["visibility"] == "public" else f"team:{d['team']}"
            print(f"{d['dataset_id']:<16} {d['size'] / (1 << 30):>7.1f} GiB "
                  f"{vis:<12} last_access={d['last_access']}")

    return emit(args, resp, render)


def cmd_gpustat(client, args) -> int:
    resp = client.get("/v1/telemetry/aggregate", window=args.window)

    def render(obj):
        if obj["empty"]:
            print("no telemetry in window")
            return
        print(f"running: {obj['running_ratio']:.2f}  "
              f"over80: {obj['over80_ratio']:.2f}  "
              f"gpus: {obj['total_gpus']}")

    return emit(args, resp, render)


def cmd_gpumonitor(client, args) -> int:
    if args.session:
        resp = client.get(f"/v1/telemetry/sessions/{args.session}")

        def render(obj):
            for s in obj["samples"]:
                print(f"{s['ts']:>8} {s['node_id']} gpu{s['gpu_index']} "
                      f"{s['utilization_pct']:5.1f}% {s['memory_used']}")

        return emit(args, resp, render)
    resp = client.get("/v1/telemetry/nodes")

    def render(obj):
        for n in obj["nodes"]:
            print(f"{n['node_id']:<10} {n['liveness']:<6} "
                  f"gpus {n['total_gpus'] - n['available_gpus']}/{n['total_gpus']} "
                  f"cached={','.join(n['cached_datasets']) or '-'}")

    return emit(args, resp, render)


def cmd_status(client, args) -> int:
    resp = client.get("/v1/status")

    def render(o):
        print(f"epoch {o['scheduler_epoch']} leader {o['leader']} "
              f"nodes {o['alive_nodes']}/{o['nodes']} "
              f"queue {o['queue_depth']} sessions {o['sessions']} "
              f"t={o['now_ms']}ms")

    return emit(args, resp, render)


def cmd_infer(client, args) -> int:
    payload = parse_arg_value(args.payload)
    resp = client.post(f"/v1/sessions/{args.session}/infer", {"payload": payload})
    return emit(args, resp, lambda o: print(json.dumps(o["output"], sort_keys=True)))


def cmd_automl(client, args) -> int:
    if args.info:
        resp = client.get(f"/v1/sweeps/{args.info}")
        return emit(args, resp, lambda o: print(json.dumps(o, indent=2,
                                                           sort_keys=True)))
    with open(args.spec, encoding="utf-8") as fh:
        body = json.load(fh)
    resp = client.post("/v1/sweeps", body)
    return emit(args, resp,
                lambda o: print(f"{o['sweep_id']}: {len(o['members'])} sessions"))


def cmd_command(client, args) -> int:
    obj = client.get_json(f"/v1/sessions/{args.session}")
    print(obj["command"])
    return 0


def cmd_leaderboard(client, args) -> int:
    resp = client.get(f"/v1/leaderboard/{args.dataset}")

    def render(obj):
        print(f"dataset {obj['dataset_id']} metric {obj['metric_name']} "
              f"({obj['order']})")
        for e in obj["entries"]:
            print(f"{e['rank']:>4}  {e['user_id']:<12} {e['score']:<10} "
                  f"{e['session_id']}")

    return emit(args, resp, render)


def cmd_serve(client, args) -> int:
    body = {}
    if args.checkpoint:
        body["checkpoint_id"] = args.checkpoint
    resp = client.post(f"/v1/sessions/{args.session}/serve", body)
    return emit(args, resp,
                lambda o: print(f"{o['session_id']} serving {o['checkpoint_id']} "
                                f"on {o['node_id']}"))


def cmd_advance(client, args) -> int:
    resp = client.post("/v1/sim/advance",
                       {"until_quiet": True, "max_ms": args.max_ms}
                       if args.until_quiet else {"ms": args.ms})
    return emit(args, resp,
                lambda o: print(f"advanced {o['advanced_ms']}ms "
                                f"(now {o['now_ms']}ms)"))


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deskml", description="client for the deskml control plane")
    parser.add_argument("--host", help="gateway URL (or $DESKML_HOST)")
    parser.add_argument("--token", help="bearer token (or $DESKML_TOKEN)")
    parser.add_argument("--json", action="store_true",
                        help="print the raw API response body")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=fn)
        return p

    p = add("login", cmd_login, help="store host+token after verifying them")
    p.add_argument("--token", dest="token", required=True)
    p.add_argument("--host", dest="host")

    add("logout", cmd_logout, help="forget the stored token")
    add("credit", cmd_credit, help="show the credit balance")

    p = add("run", cmd_run, help="launch a session")
    p.add_argument("-d", "--dataset", required=True)
    p.add_argument("-e", "--image", required=True)
    p.add_argument("-a", "--arg", action="append", metavar="K=V")
    p.add_argument("-g", "--gpus", type=int, default=1)
    p.add_argument("-m", "--memory-gb", type=float, default=1.0)
    p.add_argument("--seed", type=int)

    for name, fn in (("stop", cmd_stop), ("rm", cmd_rm), ("resume", cmd_resume)):
        p = add(name, fn, help=f"{name} a session")
        p.add_argument("session")

    p = add("fork", cmd_fork, help="fork a session with config overrides")
    p.add_argument("session")
    p.add_argument("-a", "--arg", action="append", metavar="K=V")
    p.add_argument("--seed", type=int)

    p = add("ps", cmd_ps, help="list sessions")
    p.add_argument("--owner")
    p.add_argument("--state")

    p = add("logs", cmd_logs, help="session logs")
    p.add_argument("session")
    p.add_argument("--follow", action="store_true")
    p.add_argument("--max-wall-s", type=float, default=10.0)

    p = add("getid", cmd_getid, help="print your most recent session id")
    p.add_argument("--me", help=argparse.SUPPRESS)

    p = add("diff", cmd_diff, help="config diff between two sessions")
    p.add_argument("session")
    p.add_argument("other")

    p = add("download", cmd_download, help="download session + checkpoint manifests")
    p.add_argument("session")
    p.add_argument("-o", "--output")

    p = add("backup", cmd_backup, help="export a session bundle archive")
    p.add_argument("session")
    p.add_argument("-o", "--output")

    p = add("events", cmd_events, help="metric events")
    p.add_argument("session")
    p.add_argument("--name")

    p = add("eventlen", cmd_eventlen, help="count metric events")
    p.add_argument("session")
    p.add_argument("--name")

    p = add("memo", cmd_memo, help="attach a note to a session")
    p.add_argument("session")
    p.add_argument("text")

    p = add("model", cmd_model, help="list checkpoints")
    p.add_argument("session")

    p = add("plot", cmd_plot, help="ascii chart of metric events")
    p.add_argument("session")
    p.add_argument("--name")
    p.add_argument("--width", type=int, default=40)

    p = add("pull", cmd_pull, help="fetch a checkpoint manifest")
    p.add_argument("session")
    p.add_argument("checkpoint", nargs="?")
    p.add_argument("-o", "--output")

    p = add("submit", cmd_submit, help="submit a checkpoint for evaluation")
    p.add_argument("session")
    p.add_argument("--checkpoint")

    p = add("dataset", cmd_dataset, help="dataset registry")
    dsub = p.add_subparsers(dest="dataset_cmd", required=True)
    dp = dsub.add_parser("push")
    dp.add_argument("dataset_id")
    dp.add_argument("--size-gb", type=float, required=True)
    dp.add_argument("--team")
    dp.add_argument("--metric", default="accuracy")
    dp.add_argument("--order", default="desc", choices=["asc", "desc"])
    dsub.add_parser("list")

    p = add("gpustat", cmd_gpustat, help="fleet utilization ratios")
    p.add_argument("--window", help="seconds, or from_ms:to_ms")

    p = add("gpumonitor", cmd_gpumonitor, help="node or per-session telemetry")
    p.add_argument("--session")

    add("status", cmd_status, help="scheduler status")

    p = add("infer", cmd_infer, help="query a serving session")
    p.add_argument("session")
    p.add_argument("--payload", required=True, help="JSON payload")

    p = add("automl", cmd_automl, help="submit or inspect a hyperparameter sweep")
    p.add_argument("spec", nargs="?", help="sweep spec JSON file")
    p.add_argument("--info", help="sweep id to inspect")

    p = add("command", cmd_command, help="print the launch command of a session")
    p.add_argument("session")

    p = add("leaderboard", cmd_leaderboard, help="dataset leaderboard")
    p.add_argument("dataset")

    p = add("serve", cmd_serve, help="serve a done session's checkpoint")
    p.add_argument("session")
    p.add_argument("--checkpoint")

    p = add("advance", cmd_advance, help="advance virtual time (admin)")
    p.add_argument("--ms", type=int, default=0)
    p.add_argument("--until-quiet", action="store_true")
    p.add_argument("--max-ms", type=int, default=3_600_000)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stored = load_login()
    host = (getattr(args, "host", None) or os.environ.get("DESKML_HOST")
            or stored.get("host") or DEFAULT_HOST)
    token = (getattr(args, "token", None) or os.environ.get("DESKML_TOKEN")
             or stored.get("token"))
    client = ApiClient(host, token)
    if args.cmd == "getid" and not args.me:
        try:
            args.me = client.get_json("/v1/users/me")["user_id"]
        except ApiError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        return args.func(client, args)
    except ApiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
