"""Live teleoperation service: a governed control loop driven over WebSocket.

One asyncio task owns the simulator and governor state and advances them
at the control period, wall-clock paced by default or flat out for
headless tests. Clients connect over a WebSocket, receive a versioned
handshake and then one telemetry frame per control period, and steer by
sending commands; the latest reference always wins, there is no queue of
stale pilot input. Each frame is a single JSON document terminated by a
newline.

Client commands (kind field):
    set_reference  payload: position [x,y,z] and/or yaw, partial updates
                   hold the previous desired value; clamped server-side
                   to the compactness box and the yaw domain
    set_poi        payload: position [x,y,z]; the switch is retried each
                   tick until the current state is admissible in the new
                   landmark frame (poi_pending flags the wait)
    pause / reset  toggle the simulation freeze (payload {"paused": bool}
                   sets it explicitly) / restore the initial state

Commands may carry apply_at_tick for deterministic scripted runs; they
apply when the loop reaches that tick. Malformed input gets an error
frame back and the connection stays open. A disconnect simply stops the
client's stream; the loop holds the last applied reference.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from collections import deque
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .geometry import true_constraint_eval
from .governor import (
    GovernorState,
    InfeasibleError,
    RgConfig,
    find_initial_reference,
    from_landmark_frame,
    rg_step,
    to_landmark_frame,
)
from .moas import contains
from .plant import attitude_from_flat, step

log = logging.getLogger("visgov.teleop")

PROTOCOL_VERSION = 1
COMMAND_KINDS = ("set_reference", "set_poi", "pause", "reset")
# non-finite true-constraint values (landmark behind the camera) capped
# for JSON transport; the violation flag carries the semantics
_CAP = 1e9


def _finite(value: float) -> float:
    return float(np.clip(value, -_CAP, _CAP)) if np.isfinite(value) else (_CAP if value > 0 else -_CAP)


def _vec(a) -> list:
    return [float(u) for u in np.asarray(a).ravel()]


@dataclass
class ServiceStats:
    frames: int = 0
    deadline_misses: int = 0
    dropped_frames: int = 0
    rejected_messages: int = 0
    violation_frames: int = 0
    governed_frames: int = 0
    intervals: deque = field(default_factory=lambda: deque(maxlen=4096))

    def p99_jitter(self, ts: float) -> float:
        """99th percentile absolute deviation of the frame interval from Ts."""
        if not self.intervals:
            return 0.0
        dev = np.abs(np.asarray(self.intervals) - ts)
        return float(np.percentile(dev, 99))


class TeleopService:
    """Simulator + governor owned by a single control-loop task."""

    def __init__(self, cfg, moas, constraints, stack, paced: bool = True):
        from .scenarios import ReferencePlan

        self.cfg = cfg
        self.moas = moas
        self.constraints = constraints
        self.plant = stack["plant"]
        self.cam = stack["cam"]
        self.fov = stack["fov"]
        self.paced = paced
        self.rg_enabled = bool(cfg["rg"])
        self.rg_cfg = RgConfig(
            bisection_iters=cfg["bisection_iters"],
            control_period=self.plant.Ts,
            grace_horizon=cfg["grace_horizon"],
        )
        self.position_box = float(cfg["position_box"])
        self.yaw_domain = np.pi / 2

        plan = ReferencePlan(cfg["reference"], cfg["pois"], cfg["duration"])
        r0 = plan.sample(0.0)
        poi0 = plan.poi_at(0.0)
        if cfg["x0"] is not None:
            x0 = np.asarray(cfg["x0"], dtype=float)
        else:
            x0 = np.zeros(8)
            x0[:4] = r0
        self._x0 = x0.copy()
        self._r0 = np.asarray(r0, dtype=float).copy()
        self._poi0 = np.asarray(poi0, dtype=float).copy()

        x_l, _ = to_landmark_frame(x0, self._r0, self._poi0)
        v0 = find_initial_reference(self.moas, x_l)
        if v0 is None:
            raise InfeasibleError("no admissible initial reference at x0")
        self._v0 = v0

        self.x = x0.copy()
        self.desired = self._r0.copy()
        self.poi = self._poi0.copy()
        self.pending_poi = None
        self.gov = GovernorState()
        self.gov.initialize(v0)
        self.tick = 0
        self.paused = False
        self.stats = ServiceStats()
        self._commands: list = []  # (apply_at_tick, seq, kind, payload)
        self._seq = 0
        self._clients: dict[int, asyncio.Queue] = {}
        self._client_id = 0
        self._task = None

    # -- client registry -------------------------------------------------

    def attach(self, queue_size: int = 256):
        self._client_id += 1
        q = asyncio.Queue(maxsize=queue_size)
        self._clients[self._client_id] = q
        return self._client_id, q

    def detach(self, cid: int):
        self._clients.pop(cid, None)

    def handshake(self) -> dict:
        return {
            "type": "handshake",
            "protocol": PROTOCOL_VERSION,
            "dims": {"n": self.plant.Ad.shape[0], "m": 4, "p": self.moas.lifted_dims[2]},
            "ts": self.plant.Ts,
            "rg_enabled": self.rg_enabled,
            "camera": {
                "alpha_h": float(self.cam.alpha_h),
                "alpha_v": float(self.cam.alpha_v),
                "eps_z": float(self.cam.eps_z),
            },
            "fov_reduced": {
                "alpha_h": float(self.fov.alpha_h_eff),
                "alpha_v": float(self.fov.alpha_v_eff),
            },
            "position_box": self.position_box,
            "yaw_domain": float(self.yaw_domain),
            "k_star": int(self.moas.k_star),
            "moas_rows": int(self.moas.n_rows),
        }

    # -- command ingestion (runs on WS receive handlers) ------------------

    def submit(self, raw: str):
        """Parse and schedule one client message; returns an error frame
        to send back, or None when accepted."""
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            self.stats.rejected_messages += 1
            return {"type": "error", "detail": f"not valid JSON: {exc.msg}"}
        if not isinstance(msg, dict) or msg.get("kind") not in COMMAND_KINDS:
            self.stats.rejected_messages += 1
            return {"type": "error", "detail": f"kind must be one of {list(COMMAND_KINDS)}"}
        kind = msg["kind"]
        payload = msg.get("payload") or {}
        if not isinstance(payload, dict):
            self.stats.rejected_messages += 1
            return {"type": "error", "detail": "payload must be an object"}
        at = msg.get("apply_at_tick")
        if at is not None and (not isinstance(at, int) or at < 0):
            self.stats.rejected_messages += 1
            return {"type": "error", "detail": "apply_at_tick must be a nonnegative integer"}
        try:
            payload = self._validate(kind, payload)
        except (TypeError, ValueError) as exc:
            self.stats.rejected_messages += 1
            return {"type": "error", "detail": str(exc)}
        self._seq += 1
        self._commands.append((self.tick if at is None else at, self._seq, kind, payload))
        return None

    def _validate(self, kind: str, payload: dict) -> dict:
        if kind == "set_reference":
            out = {}
            if "position" in payload:
                pos = np.asarray(payload["position"], dtype=float)
                if pos.shape != (3,) or not np.all(np.isfinite(pos)):
                    raise ValueError("position must be three finite numbers")
                out["position"] = np.clip(pos, -self.position_box, self.position_box)
            if "yaw" in payload:
                yaw = float(payload["yaw"])
                if not np.isfinite(yaw):
                    raise ValueError("yaw must be finite")
                out["yaw"] = float(np.clip(yaw, -self.yaw_domain, self.yaw_domain))
            if not out:
                raise ValueError("set_reference needs position and/or yaw")
            return out
        if kind == "set_poi":
            pos = np.asarray(payload.get("position"), dtype=float)
            if pos.shape != (3,) or not np.all(np.isfinite(pos)):
                raise ValueError("set_poi position must be three finite numbers")
            return {"position": pos}
        if kind == "pause" and "paused" in payload:
            if not isinstance(payload["paused"], bool):
                raise ValueError("paused must be a boolean")
            return {"paused": payload["paused"]}
        return {}

    # -- control loop ------------------------------------------------------

    def _apply_due_commands(self):
        due = [c for c in self._commands if c[0] <= self.tick]
        if not due:
            return
        self._commands = [c for c in self._commands if c[0] > self.tick]
        for _, _, kind, payload in sorted(due):
            if kind == "set_reference":
                if "position" in payload:
                    self.desired[:3] = payload["position"]
                if "yaw" in payload:
                    self.desired[3] = payload["yaw"]
            elif kind == "set_poi":
                self.pending_poi = payload["position"]
            elif kind == "pause":
                self.paused = payload.get("paused", not self.paused)
            elif kind == "reset":
                self.x = self._x0.copy()
                self.desired = self._r0.copy()
                self.poi = self._poi0.copy()
                self.pending_poi = None
                self.gov = GovernorState()
                self.gov.initialize(self._v0)
                self.tick = 0
                self.paused = False
                self._commands = []

    def _try_poi_handoff(self):
        if self.pending_poi is None or np.array_equal(self.pending_poi, self.poi):
            self.pending_poi = None
            return
        v_inertial = from_landmark_frame(self.gov.v_prev, self.poi)
        x_try, v_try = to_landmark_frame(self.x, v_inertial, self.pending_poi)
        ok, _ = contains(self.moas, x_try, v_try)
        if ok:
            self.poi = self.pending_poi
            self.gov.v_prev = v_try
            self.pending_poi = None

    def step_once(self) -> dict:
        """Advance one control period and return the telemetry frame."""
        self._apply_due_commands()
        if not self.paused:
            self._try_poi_handoff()
            x_l, r_l = to_landmark_frame(self.x, self.desired, self.poi)
            if self.rg_enabled:
                v_l = rg_step(self.moas, x_l, r_l, self.gov, self.rg_cfg)
            else:
                v_l = r_l
                self.gov.v_prev = v_l
                self.gov.last_lambda = 1.0
                _, self.gov.last_margin = contains(self.moas, x_l, v_l)
        v = from_landmark_frame(self.gov.v_prev, self.poi)
        roll, pitch = attitude_from_flat(self.x, v, self.plant)
        g1, g2, z_c = true_constraint_eval(self.x, (roll, pitch), self.cam, self.poi)
        lam = self.gov.last_lambda
        frame = {
            "type": "telemetry",
            "tick": self.tick,
            "t": self.tick * self.plant.Ts,
            "x": _vec(self.x),
            "v": _vec(v),
            "r": _vec(self.desired),
            "lambda": float(lam),
            "margin": _finite(self.gov.last_margin),
            "g1": _finite(g1),
            "g2": _finite(g2),
            "z_c": _finite(z_c),
            "poi": _vec(self.poi),
            "poi_pending": self.pending_poi is not None,
            "fov": {
                "alpha_h": float(self.fov.alpha_h_eff),
                "alpha_v": float(self.fov.alpha_v_eff),
            },
            "governed": bool(lam < 1.0),
            "violation": bool(
                g1 > 1e-9 or g2 > 1e-9 or z_c < self.cam.eps_z - 1e-9
            ),
            "paused": self.paused,
            "deadline_misses": self.stats.deadline_misses,
        }
        if frame["violation"]:
            self.stats.violation_frames += 1
        if frame["governed"]:
            self.stats.governed_frames += 1
        if not self.paused:
            self.x = step(self.plant, self.x, v)
            self.tick += 1
        return frame

    def broadcast(self, frame: dict):
        text = json.dumps(frame) + "\n"
        for q in self._clients.values():
            try:
                q.put_nowait(text)
            except asyncio.QueueFull:
                # slow client: drop its oldest frame, never block the loop
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
                q.put_nowait(text)
                self.stats.dropped_frames += 1

    async def run(self):
        ts = self.plant.Ts
        loop = asyncio.get_running_loop()
        deadline = loop.time() + ts
        last_emit = None
        while True:
            frame = self.step_once()
            now = loop.time()
            if last_emit is not None:
                self.stats.intervals.append(now - last_emit)
            last_emit = now
            self.stats.frames += 1
            self.broadcast(frame)
            if self.paced:
                now = loop.time()
                if now > deadline + ts:
                    # a full period late: count it and resync rather than
                    # racing to catch up with a burst
                    self.stats.deadline_misses += 1
                    deadline = now + ts
                else:
                    await asyncio.sleep(max(0.0, deadline - now))
                    deadline += ts
            else:
                await asyncio.sleep(0)

    def stats_dict(self) -> dict:
        return {
            "frames": self.stats.frames,
            "deadline_misses": self.stats.deadline_misses,
            "dropped_frames": self.stats.dropped_frames,
            "rejected_messages": self.stats.rejected_messages,
            "violation_frames": self.stats.violation_frames,
            "governed_frames": self.stats.governed_frames,
            "p99_jitter": self.stats.p99_jitter(self.plant.Ts),
            "ts": self.plant.Ts,
            "paced": self.paced,
            "clients": len(self._clients),
            "tick": self.tick,
        }


def create_app(
    cfg=None,
    *,
    moas=None,
    constraints=None,
    stack=None,
    paced: bool = True,
    cache_dir=None,
) -> FastAPI:
    """Build the FastAPI app; pass moas/constraints/stack to skip the cache."""
    from .scenarios import build_or_load_moas, load_config

    if cfg is None:
        cfg = load_config()
    if moas is None:
        cache_dir = Path(cache_dir) if cache_dir else Path.cwd() / ".visgov_cache"
        moas, constraints, stack = build_or_load_moas(cfg, cache_dir)
    service = TeleopService(cfg, moas, constraints, stack, paced=paced)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service._task = asyncio.create_task(service.run())
        try:
            yield
        finally:
            service._task.cancel()
            try:
                await service._task
            except asyncio.CancelledError:
                pass

    app = FastAPI(lifespan=lifespan)
    app.state.service = service

    @app.get("/stats")
    async def stats():
        return service.stats_dict()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps(service.handshake()) + "\n")
        cid, queue = service.attach()

        async def sender():
            try:
                while True:
                    await ws.send_text(await queue.get())
            except Exception:
                return  # socket went away; the receive side cleans up

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                error = service.submit(raw)
                if error is not None:
                    await ws.send_text(json.dumps(error) + "\n")
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            service.detach(cid)

    return app


def serve(cfg, cache_dir=None, host: str = "127.0.0.1", port: int = 8700, paced: bool = True):
    """Blocking entry point used by the CLI."""
    import uvicorn

    app = create_app(cfg, paced=paced, cache_dir=cache_dir)
    log.info("teleop service on %s:%d (paced=%s)", host, port, paced)
    uvicorn.run(app, host=host, port=port, log_level="warning")
