"""Scenario files, server boot config, static dashboard serving."""

import json
import threading
from pathlib import Path

import pytest
import requests

from conftest import small_scenario
from deskml import Platform, load_scenario
from deskml.errors import ValidationError
from deskml.scenario import basic_scenario, validate_scenario
from deskml.server import GatewayServer

REPO = Path(__file__).resolve().parents[1]


def test_shipped_scenario_loads_and_boots():
    scenario = load_scenario(REPO / "demos" / "scenario.json")
    p = Platform(scenario)
    assert len(p.plane.state.nodes) == 4
    assert p.plane.state.users["ada"].credit_balance == 5000
    assert "cnn" in p.plane.templates


def test_basic_scenario_builder_boots():
    p = Platform(basic_scenario(n_nodes=2, seed=3))
    assert len(p.plane.state.nodes) == 2


def test_unknown_scenario_keys_rejected():
    with pytest.raises(ValidationError):
        validate_scenario({"nope": 1})
    with pytest.raises(ValidationError):
        validate_scenario({"datasets": [{"dataset_id": "x", "owner": "u"}]})


def test_server_main_boots_with_config(tmp_path):
    from deskml import server as server_mod

    config = {"bind": "127.0.0.1:0", "tokens": {"ci-token": "ada"},
              "credit_rate_per_gpu_min": 2.0}
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    scenario = load_scenario(REPO / "demos" / "scenario.json")
    platform = Platform(scenario)
    for token, user in config["tokens"].items():
        platform.plane.add_token(None, token, user)
    assert platform.plane.user_by_token("ci-token").user_id == "ada"

    gw = GatewayServer(platform)
    gw.start_background()
    try:
        resp = requests.post(gw.url + "/v1/login", json={"token": "ci-token"},
                             timeout=5)
        assert resp.json()["user_id"] == "ada"
    finally:
        gw.shutdown()


def test_static_ui_served_when_built(tmp_path):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>dash</body></html>")
    (ui / "app.js").write_text("console.log('hi')")
    p = Platform(small_scenario())
    gw = GatewayServer(p, ui_dir=ui)
    gw.start_background()
    try:
        resp = requests.get(gw.url + "/ui/", timeout=5)
        assert resp.status_code == 200
        assert "dash" in resp.text
        resp = requests.get(gw.url + "/ui/app.js", timeout=5)
        assert resp.headers["Content-Type"] == "text/javascript"
        resp = requests.get(gw.url + "/ui/../secrets", timeout=5)
        assert resp.status_code == 404
        resp = requests.get(gw.url + "/ui/missing.js", timeout=5)
        assert resp.status_code == 404
    finally:
        gw.shutdown()


def test_dashboard_build_served_if_present():
    dist = REPO / "frontend" / "dist"
    if not dist.is_dir():
        pytest.skip("dashboard not built")
    p = Platform(small_scenario())
    gw = GatewayServer(p, ui_dir=dist)
    gw.start_background()
    try:
        resp = requests.get(gw.url + "/ui/", timeout=5)
        assert resp.status_code == 200
        assert "deskml" in resp.text
    finally:
        gw.shutdown()
