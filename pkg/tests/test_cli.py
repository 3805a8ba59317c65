"""CLI behavior and CLI/API byte-equality."""

import json

import pytest
import requests

from conftest import small_scenario
from deskml import Platform
from deskml.cli import main
from deskml.server import GatewayServer


@pytest.fixture
def env(tmp_path, monkeypatch):
    platform = Platform(small_scenario())
    server = GatewayServer(platform)
    server.start_background()
    monkeypatch.setenv("DESKML_CONFIG", str(tmp_path / "login.json"))
    monkeypatch.setenv("DESKML_HOST", server.url)
    monkeypatch.setenv("DESKML_TOKEN", "tok-u1")
    yield platform, server
    server.shutdown()


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_login_persists_and_logout_clears(env, capsys, tmp_path, monkeypatch):
    monkeypatch.delenv("DESKML_TOKEN")
    code, out, err = run_cli(capsys, "login", "--token", "tok-u1")
    assert code == 0
    assert "logged in as u1" in out
    stored = json.loads((tmp_path / "login.json").read_text())
    assert stored["token"] == "tok-u1"
    code, out, err = run_cli(capsys, "credit")
    assert code == 0 and "u1:" in out
    code, out, err = run_cli(capsys, "logout")
    assert code == 0
    assert "token" not in json.loads((tmp_path / "login.json").read_text())
    code, out, err = run_cli(capsys, "credit")
    assert code == 1


def test_bad_token_nonzero_exit(env, capsys, monkeypatch):
    monkeypatch.setenv("DESKML_TOKEN", "bogus")
    code, out, err = run_cli(capsys, "status")  # status itself is open
    assert code == 0
    code, out, err = run_cli(capsys, "ps")
    assert code == 1
    assert "unauthorized" in err


def test_run_ps_states(env, capsys):
    code, out, _ = run_cli(capsys, "run", "-d", "d1", "-e", "quick",
                           "-a", "lr=0.1")
    assert code == 0
    sid = out.strip()
    assert sid == "u1/d1/1"
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "ps")
    assert code == 0
    assert "u1/d1/1" in out and "done" in out


def test_fork_then_single_line_diff(env, capsys):
    run_cli(capsys, "run", "-d", "d1", "-e", "quick", "-a", "lr=0.1",
            "-a", "bs=128")
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "fork", "u1/d1/1", "-a", "lr=0.01")
    assert code == 0
    child = out.strip()
    assert child == "u1/d1/2"
    code, out, _ = run_cli(capsys, "diff", "u1/d1/1", child)
    assert code == 0
    lines = [l for l in out.strip().splitlines() if l]
    assert lines == ["lr: 0.1 -> 0.01"]


def test_gpustat_json_byte_equal_to_api(env, capsys):
    platform, server = env
    run_cli(capsys, "run", "-d", "d1", "-e", "quick")
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "--json", "gpustat", "--window", "0:99999")
    assert code == 0
    api = requests.get(server.url + "/v1/telemetry/aggregate",
                       params={"window": "0:99999"},
                       headers={"Authorization": "Bearer tok-u1"},
                       timeout=5)
    assert out == api.text


def test_leaderboard_json_byte_equal_to_api(env, capsys):
    platform, server = env
    run_cli(capsys, "run", "-d", "d1", "-e", "quick")
    run_cli(capsys, "advance", "--until-quiet")
    run_cli(capsys, "submit", "u1/d1/1")
    code, out, _ = run_cli(capsys, "--json", "leaderboard", "d1")
    assert code == 0
    api = requests.get(server.url + "/v1/leaderboard/d1",
                       headers={"Authorization": "Bearer tok-u1"}, timeout=5)
    assert out == api.text
    assert json.loads(out)["entries"][0]["user_id"] == "u1"


def test_events_eventlen_plot(env, capsys):
    run_cli(capsys, "run", "-d", "d1", "-e", "quick")
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "events", "u1/d1/1")
    assert code == 0
    assert len(out.strip().splitlines()) == 10
    code, out, _ = run_cli(capsys, "eventlen", "u1/d1/1")
    assert out.strip() == "10"
    code, out, _ = run_cli(capsys, "plot", "u1/d1/1", "--width", "20")
    assert code == 0
    assert "accuracy:" in out and "#" in out


def test_memo_model_pull_download_backup(env, capsys, tmp_path):
    run_cli(capsys, "run", "-d", "d1", "-e", "quick")
    run_cli(capsys, "advance", "--until-quiet")
    code, _, _ = run_cli(capsys, "memo", "u1/d1/1", "baseline run")
    assert code == 0
    code, out, _ = run_cli(capsys, "model", "u1/d1/1")
    assert "u1/d1/1@10" in out
    code, out, _ = run_cli(capsys, "pull", "u1/d1/1",
                           "-o", str(tmp_path / "ck.json"))
    assert code == 0
    assert json.loads((tmp_path / "ck.json").read_text())["step"] == 10
    code, out, _ = run_cli(capsys, "download", "u1/d1/1",
                           "-o", str(tmp_path / "dl"))
    assert code == 0
    session = json.loads((tmp_path / "dl" / "session.json").read_text())
    assert session["memo"] == "baseline run"
    code, out, _ = run_cli(capsys, "backup", "u1/d1/1",
                           "-o", str(tmp_path / "b.tar"))
    assert code == 0
    import tarfile

    with tarfile.open(tmp_path / "b.tar") as tar:
        assert "session.json" in tar.getnames()


def test_dataset_push_and_list(env, capsys):
    code, out, _ = run_cli(capsys, "dataset", "push", "mine", "--size-gb", "3",
                           "--metric", "mse", "--order", "asc")
    assert code == 0
    code, out, _ = run_cli(capsys, "dataset", "list")
    assert "mine" in out


def test_getid_command_status(env, capsys):
    run_cli(capsys, "run", "-d", "d1", "-e", "quick", "-a", "lr=0.5")
    code, out, _ = run_cli(capsys, "getid")
    assert out.strip() == "u1/d1/1"
    code, out, _ = run_cli(capsys, "command", "u1/d1/1")
    assert out.strip() == "run -d d1 -e quick -a lr=0.5"
    code, out, _ = run_cli(capsys, "status")
    assert "epoch 1" in out


def test_serve_and_infer_cli(env, capsys):
    run_cli(capsys, "run", "-d", "d1", "-e", "quick")
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "serve", "u1/d1/1")
    assert code == 0 and "serving" in out
    code, out, _ = run_cli(capsys, "infer", "u1/d1/1",
                           "--payload", '{"x": [1, 2]}')
    assert code == 0
    first = out.strip()
    code, out, _ = run_cli(capsys, "infer", "u1/d1/1",
                           "--payload", '{"x": [1, 2]}')
    assert out.strip() == first


def test_automl_spec_file(env, capsys, tmp_path):
    spec = {"strategy": "grid", "dataset_id": "d1", "image_id": "quick",
            "space": {"lr": [0.1, 0.01]}}
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run_cli(capsys, "automl", str(path))
    assert code == 0
    assert "sw-1: 2 sessions" in out
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "automl", "--info", "sw-1")
    assert code == 0
    assert json.loads(out)["status"] == "done"


def test_gpumonitor_views(env, capsys):
    run_cli(capsys, "run", "-d", "d1", "-e", "quick")
    run_cli(capsys, "advance", "--until-quiet")
    code, out, _ = run_cli(capsys, "gpumonitor")
    assert code == 0 and "n1" in out
    code, out, _ = run_cli(capsys, "gpumonitor", "--session", "u1/d1/1")
    assert code == 0
    assert "gpu" in out
