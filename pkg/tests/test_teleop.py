"""Teleoperation service tests: handshake schema, frame invariants,
command clamping and scheduling, pause/reset, point-of-interest
hand-off, scripted adversarial piloting with the governor on and off,
and paced-loop timing. Network tests run the loop unpaced so they are
wall-clock independent; one paced test checks the soft-real-time claim.
"""

import copy
import json
import time

import numpy as np
import pytest
from starlette.testclient import TestClient

from visgov.governor import InfeasibleError
from visgov.scenarios import load_config
from visgov.teleop import PROTOCOL_VERSION, TeleopService, create_app


@pytest.fixture(scope="module")
def parts(quad_coarse):
    s = quad_coarse
    cfg = load_config(overrides={"plant": {"Ts": 0.1}})
    stack = {"plant": s.plant, "cam": s.cam, "fov": s.fov, "approx": s.approx}
    return cfg, s, stack


def make_service(parts, rg=True, **overrides):
    cfg, s, stack = parts
    cfg = copy.deepcopy(cfg)
    cfg["rg"] = rg
    cfg.update(overrides)
    return TeleopService(cfg, s.moas, s.constraints, stack, paced=False)


def make_app(parts, rg=True, paced=False):
    cfg, s, stack = parts
    cfg = copy.deepcopy(cfg)
    cfg["rg"] = rg
    return create_app(cfg, moas=s.moas, constraints=s.constraints, stack=stack, paced=paced)


def recv(ws):
    return json.loads(ws.receive_text())


def frames_until(ws, stop, limit=20000):
    """Read telemetry frames until stop(frame) is true; returns all read."""
    out = []
    for _ in range(limit):
        msg = recv(ws)
        if msg["type"] != "telemetry":
            continue
        out.append(msg)
        if stop(msg):
            return out
    raise AssertionError("condition never reached")


# -- direct (synchronous) service tests ----------------------------------


def test_handshake_contents(parts):
    svc = make_service(parts)
    hs = svc.handshake()
    cfg, s, _ = parts
    assert hs["type"] == "handshake"
    assert hs["protocol"] == PROTOCOL_VERSION
    assert hs["dims"] == {"n": 8, "m": 4, "p": 4}
    assert hs["ts"] == pytest.approx(0.1)
    assert hs["rg_enabled"] is True
    assert hs["camera"]["alpha_h"] == pytest.approx(np.deg2rad(45))
    assert hs["camera"]["alpha_v"] == pytest.approx(np.deg2rad(35))
    assert hs["camera"]["eps_z"] == pytest.approx(0.1)
    assert hs["fov_reduced"]["alpha_h"] == pytest.approx(s.fov.alpha_h_eff)
    assert hs["fov_reduced"]["alpha_v"] == pytest.approx(s.fov.alpha_v_eff)
    assert hs["fov_reduced"]["alpha_h"] < hs["camera"]["alpha_h"]
    assert hs["moas_rows"] == s.moas.n_rows
    json.dumps(hs)  # transportable


def test_frame_schema_and_tick_progression(parts):
    svc = make_service(parts)
    fields = {
        "type", "tick", "t", "x", "v", "r", "lambda", "margin", "g1", "g2",
        "z_c", "poi", "poi_pending", "fov", "governed", "violation",
        "paused", "deadline_misses",
    }
    for k in range(5):
        frame = svc.step_once()
        assert set(frame) == fields
        assert frame["tick"] == k
        assert frame["t"] == pytest.approx(k * 0.1)
        assert len(frame["x"]) == 8 and len(frame["v"]) == 4 and len(frame["r"]) == 4
        json.dumps(frame)


def test_no_input_holds_initial_reference(parts):
    svc = make_service(parts)
    first = svc.step_once()
    for _ in range(30):
        frame = svc.step_once()
    assert frame["v"] == first["v"]
    assert frame["r"] == first["r"]
    assert frame["lambda"] == 1.0  # desired equals applied, nothing to cut


def test_reference_clamped_to_box_and_yaw_domain(parts):
    svc = make_service(parts)
    err = svc.submit(json.dumps({
        "kind": "set_reference",
        "payload": {"position": [99.0, -99.0, 2.0], "yaw": 3.0},
    }))
    assert err is None
    frame = svc.step_once()
    box = svc.position_box
    assert frame["r"][:3] == [box, -box, 2.0]
    assert frame["r"][3] == pytest.approx(np.pi / 2)


def test_partial_reference_update(parts):
    svc = make_service(parts)
    r0 = svc.step_once()["r"]
    svc.submit(json.dumps({"kind": "set_reference", "payload": {"yaw": 0.3}}))
    frame = svc.step_once()
    assert frame["r"][:3] == r0[:3]
    assert frame["r"][3] == pytest.approx(0.3)


def test_latest_reference_wins(parts):
    svc = make_service(parts)
    for yaw in (0.5, -0.2, 0.1):
        svc.submit(json.dumps({
            "kind": "set_reference", "payload": {"yaw": yaw}, "apply_at_tick": 3,
        }))
    for _ in range(4):
        frame = svc.step_once()
    assert frame["r"][3] == pytest.approx(0.1)


def test_malformed_messages_rejected(parts):
    svc = make_service(parts)
    bad = [
        "not json at all",
        json.dumps(["kind", "set_reference"]),
        json.dumps({"kind": "warp_drive"}),
        json.dumps({"kind": "set_reference", "payload": {"position": [1.0, 2.0]}}),
        json.dumps({"kind": "set_reference", "payload": {"yaw": float("nan")}}),
        json.dumps({"kind": "set_reference", "payload": {}}),
        json.dumps({"kind": "set_poi", "payload": {"position": "origin"}}),
        json.dumps({"kind": "set_reference", "payload": {"yaw": 0}, "apply_at_tick": -1}),
        json.dumps({"kind": "pause", "payload": {"paused": "yes"}}),
    ]
    for raw in bad:
        err = svc.submit(raw)
        assert err is not None and err["type"] == "error", raw
    assert svc.stats.rejected_messages == len(bad)
    # the loop is unaffected and clean input still lands
    assert svc.submit(json.dumps({"kind": "set_reference", "payload": {"yaw": 0.2}})) is None
    assert svc.step_once()["r"][3] == pytest.approx(0.2)


def test_pause_freezes_and_reset_restores(parts):
    svc = make_service(parts)
    start = svc.step_once()
    svc.submit(json.dumps({"kind": "set_reference", "payload": {"yaw": 0.4}}))
    for _ in range(10):
        svc.step_once()
    svc.submit(json.dumps({"kind": "pause"}))
    frozen = svc.step_once()
    assert frozen["paused"] is True
    for _ in range(5):
        frame = svc.step_once()
    assert frame["tick"] == frozen["tick"]
    assert frame["x"] == frozen["x"]
    svc.submit(json.dumps({"kind": "pause", "payload": {"paused": False}}))
    svc.step_once()  # unpauses and advances past the frozen tick
    resumed = svc.step_once()
    assert resumed["paused"] is False
    assert resumed["tick"] == frozen["tick"] + 1
    svc.submit(json.dumps({"kind": "reset"}))
    after = svc.step_once()
    assert after["tick"] == 0
    assert after["x"] == start["x"]
    assert after["r"] == start["r"]


def test_poi_handoff_feasible(parts):
    svc = make_service(parts)
    svc.step_once()
    svc.submit(json.dumps({"kind": "set_poi", "payload": {"position": [0.5, 0.2, 0.0]}}))
    frame = svc.step_once()
    assert frame["poi"] == [0.5, 0.2, 0.0]
    assert frame["poi_pending"] is False


def test_poi_handoff_infeasible_stays_pending(parts):
    svc = make_service(parts)
    svc.step_once()
    svc.submit(json.dumps({"kind": "set_poi", "payload": {"position": [-9.0, 0.0, 0.0]}}))
    for _ in range(20):
        frame = svc.step_once()
    # the point behind the vehicle can never enter the cone from here
    assert frame["poi"] == [0.0, 0.0, 0.0]
    assert frame["poi_pending"] is True
    assert svc.stats.violation_frames == 0


def adversary_script():
    """Pilot commands that would push the landmark out of view: yaw hard
    away, then drag the reference through and past the landmark."""
    return [
        {"kind": "set_reference", "payload": {"yaw": 1.5}, "apply_at_tick": 5},
        {"kind": "set_reference", "payload": {"position": [2.5, 0.0, 0.0], "yaw": 1.5}, "apply_at_tick": 30},
        {"kind": "set_reference", "payload": {"position": [2.5, 0.0, 0.0], "yaw": -1.5}, "apply_at_tick": 60},
    ]


def run_scripted(svc, n_ticks):
    for msg in adversary_script():
        assert svc.submit(json.dumps(msg)) is None
    return [svc.step_once() for _ in range(n_ticks)]


def test_scripted_adversary_rg_on_never_violates(parts):
    svc = make_service(parts)
    frames = run_scripted(svc, 100)
    assert svc.stats.violation_frames == 0
    assert all(not f["violation"] for f in frames)
    eps_z = parts[1].cam.eps_z
    for f in frames:
        assert f["g1"] <= 1e-9 and f["g2"] <= 1e-9 and f["z_c"] >= eps_z - 1e-9
    assert svc.stats.governed_frames >= 1
    assert any(f["governed"] for f in frames)


def test_scripted_adversary_rg_off_violates(parts):
    svc = make_service(parts, rg=False)
    frames = run_scripted(svc, 100)
    assert svc.stats.violation_frames >= 1
    assert any(f["violation"] for f in frames)
    assert all(f["lambda"] == 1.0 for f in frames)


def test_scripted_run_deterministic(parts):
    a = [json.dumps(f) for f in run_scripted(make_service(parts), 80)]
    b = [json.dumps(f) for f in run_scripted(make_service(parts), 80)]
    assert a == b


def test_infeasible_start_raises(parts):
    # hover past the landmark looking away from it: no admissible reference
    with pytest.raises(InfeasibleError):
        make_service(parts, x0=[3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])


# -- websocket transport tests -------------------------------------------


def test_ws_handshake_then_frames(parts):
    app = make_app(parts)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            hs = recv(ws)
            assert hs["type"] == "handshake"
            assert hs["protocol"] == PROTOCOL_VERSION
            frames = frames_until(ws, lambda f: f["tick"] >= 3)
            ticks = [f["tick"] for f in frames]
            assert ticks == sorted(ticks)
            assert all(not f["violation"] for f in frames)


def test_ws_error_frame_keeps_connection(parts):
    app = make_app(parts)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            ws.send_text("garbage {")
            saw_error = False
            for _ in range(2000):
                msg = recv(ws)
                if msg["type"] == "error":
                    saw_error = True
                    break
            assert saw_error
            ws.send_text(json.dumps({"kind": "set_reference", "payload": {"yaw": 0.4}}))
            frames = frames_until(ws, lambda f: abs(f["r"][3] - 0.4) < 1e-12)
            assert frames[-1]["r"][3] == pytest.approx(0.4)


def test_ws_adversary_rg_on_and_stats(parts):
    app = make_app(parts)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            for msg in adversary_script():
                ws.send_text(json.dumps(msg))
            frames_until(ws, lambda f: f["tick"] >= 100)
        stats = client.get("/stats").json()
        assert stats["violation_frames"] == 0
        assert stats["governed_frames"] >= 1
        assert stats["rejected_messages"] == 0
        assert stats["tick"] >= 100


def test_ws_adversary_rg_off_flags_violations(parts):
    app = make_app(parts, rg=False)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            for msg in adversary_script():
                ws.send_text(json.dumps(msg))
            frames_until(ws, lambda f: f["tick"] >= 100)
        stats = client.get("/stats").json()
        assert stats["violation_frames"] >= 1


def test_ws_disconnect_holds_reference(parts):
    app = make_app(parts)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            ws.send_text(json.dumps({"kind": "set_reference", "payload": {"yaw": 0.35}}))
            frames_until(ws, lambda f: abs(f["r"][3] - 0.35) < 1e-12)
        # first client gone; its last command must survive
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            frame = frames_until(ws, lambda f: True)[-1]
            assert frame["r"][3] == pytest.approx(0.35)


def test_paced_loop_timing(parts):
    app = make_app(parts, paced=True)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv(ws)
            t0 = time.perf_counter()
            frames = frames_until(ws, lambda f: f["tick"] >= 24)
            wall = time.perf_counter() - t0
        stats = client.get("/stats").json()
    ts = 0.1
    # 25 periods of 0.1 s must take roughly 2.5 s of wall time
    assert wall >= 20 * ts
    # soft-real-time claim: p99 period deviation within one period
    assert stats["p99_jitter"] <= ts
    assert stats["deadline_misses"] <= 2
    assert frames[-1]["deadline_misses"] == stats["deadline_misses"]
