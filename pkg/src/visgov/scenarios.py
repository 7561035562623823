"""Configuration-driven scenario definitions and the offline runner.

A scenario is a plain JSON-serializable dict with every default filled
in, so a bare invocation reproduces the circular-tracking benchmark.
Two presets are built in: a circle around a fixed point of interest and
a waypoint route that hands visibility off between three points of
interest. Waypoint pieces are minimum-jerk (rest to rest per segment);
at each waypoint the route dwells while the yaw reference slews from
the old point of interest to the new one, and the enforced point of
interest switches partway through the dwell (the governor's grace
retry absorbs the exact moment feasibility is reached).
"""

from __future__ import annotations

import copy
import json
import logging
from pathlib import Path

import numpy as np

from .constraints import PolyConstraintSet, build_poly_constraints
from .geometry import CameraModel, tighten_fov_sound
from .governor import RgConfig, run_closed_loop
from .lifting import eta
from .moas import Moas, MoasConfig, load_or_construct
from .plant import build_closed_loop
from .trig import trig_approx

log = logging.getLogger("visgov")


def circle_config() -> dict:
    """Circular reference around one point of interest; all defaults."""
    return {
        "plant": {"kP": 4.0, "kD": 2.0, "Ts": 0.01, "v_max": 1.5, "a_max": 1.0},
        "camera": {"alpha_h_deg": 45.0, "alpha_v_deg": 35.0, "eps_z": 0.1},
        "trig_source": "table",
        "attitude_box_deg": 4.0,
        "epsilon": 0.01,
        "position_box": 10.0,
        "reference": {
            "kind": "circle",
            "radius": 1.5,
            "omega": 2.0 * np.pi / 25.0,
            "phase": np.pi / 2.0,
            "center": [-2.25, 0.0, 0.0],
            "yaw": 0.0,
        },
        "pois": [{"t": 0.0, "position": [0.0, 0.0, 0.0]}],
        "duration": 25.0,
        "rg": True,
        "x0": None,
        "bisection_iters": 20,
        "grace_horizon": 300,
    }


def waypoint_config() -> dict:
    """Three-segment waypoint route with one point of interest per segment."""
    cfg = circle_config()
    cfg["reference"] = {
        "kind": "waypoints",
        "points": [[0.0, 0.0, 0.0], [1.2, 0.8, 0.0], [3.0, -2.0, 0.0], [5.0, -1.0, 0.0]],
        "pois": [[2.5, 1.5, 0.0], [4.5, -3.0, 0.0], [5.5, -1.0, 0.0]],
        "travel_time": 25.0,
        "dwell": 4.0,
        "durations": None,
    }
    cfg["pois"] = "auto"
    cfg["duration"] = 28.0
    return cfg


PRESETS = {"circle": circle_config, "waypoints": waypoint_config}


def load_config(path=None, preset: str = "circle", overrides: dict | None = None) -> dict:
    """Preset defaults, deep-merged with an optional JSON file and overrides."""
    if preset not in PRESETS:
        raise ValueError(f"unknown scenario preset {preset!r}")
    cfg = PRESETS[preset]()

    def merge(base, extra):
        for key, val in extra.items():
            if isinstance(val, dict) and isinstance(base.get(key), dict):
                merge(base[key], val)
            else:
                base[key] = copy.deepcopy(val)

    if path is not None:
        with open(path) as f:
            merge(cfg, json.load(f))
    if overrides:
        merge(cfg, overrides)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: dict) -> None:
    if cfg["duration"] <= 0:
        raise ValueError("duration must be positive")
    ref = cfg["reference"]
    if ref["kind"] == "waypoints":
        pts = np.asarray(ref["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 3:
            raise ValueError("waypoints need at least two 3d points")
        if len(ref["pois"]) != pts.shape[0] - 1:
            raise ValueError("one point of interest per segment required")
        if ref.get("durations") is not None:
            durs = np.asarray(ref["durations"], dtype=float)
            if durs.size != pts.shape[0] - 1 or np.any(durs <= 0):
                raise ValueError("segment durations must be positive, one per segment")
    elif ref["kind"] == "circle":
        if ref["radius"] <= 0:
            raise ValueError("radius must be positive")
    elif ref["kind"] not in ("file",):
        raise ValueError(f"unknown reference kind {ref['kind']!r}")


def _min_jerk(tau):
    """Rest-to-rest fifth-order time scaling on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _bearing(p_from, p_to):
    d = np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)
    return float(np.clip(np.arctan2(d[1], d[0]), -np.pi / 2, np.pi / 2))


class ReferencePlan:
    """Precomputed reference trajectory plus point-of-interest schedule.

    sample(t) gives the 4d flat reference; poi_at(t) the point of
    interest whose visibility is enforced at that time.
    """

    def __init__(self, ref_spec: dict, pois_spec, duration: float):
        self.spec = ref_spec
        self.duration = float(duration)
        kind = ref_spec["kind"]
        if kind == "circle":
            if pois_spec == "auto":
                raise ValueError("circle scenarios need an explicit poi schedule")
            self._events = [
                (float(e["t"]), np.asarray(e["position"], dtype=float)) for e in pois_spec
            ]
            self._events.sort(key=lambda e: e[0])
        elif kind == "waypoints":
            self._build_waypoint_plan(ref_spec)
            if pois_spec != "auto":
                self._events = [
                    (float(e["t"]), np.asarray(e["position"], dtype=float))
                    for e in pois_spec
                ]
                self._events.sort(key=lambda e: e[0])
        elif kind == "file":
            data = np.loadtxt(ref_spec["path"], delimiter=",", ndmin=2)
            if data.shape[1] != 4:
                raise ValueError("reference file must have 4 columns")
            self._file_refs = data
            self._file_ts = float(ref_spec.get("Ts", 0.01))
            if pois_spec == "auto":
                raise ValueError("file scenarios need an explicit poi schedule")
            self._events = [
                (float(e["t"]), np.asarray(e["position"], dtype=float)) for e in pois_spec
            ]
            self._events.sort(key=lambda e: e[0])
        else:
            raise ValueError(f"unknown reference kind {kind!r}")

    def _build_waypoint_plan(self, spec):
        pts = np.asarray(spec["points"], dtype=float)
        pois = [np.asarray(p, dtype=float) for p in spec["pois"]]
        n_seg = pts.shape[0] - 1
        dwell = float(spec.get("dwell", 4.0))
        if spec.get("durations") is not None:
            seg_durs = np.asarray(spec["durations"], dtype=float)
        else:
            dists = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            move_total = float(spec.get("travel_time", 25.0)) - dwell * (n_seg - 1)
            if move_total <= 0:
                raise ValueError("travel_time too short for the dwells")
            if dists.sum() > 0:
                seg_durs = move_total * dists / dists.sum()
            else:
                # coincident waypoints: hold in place, split time evenly
                seg_durs = np.full(n_seg, move_total / n_seg)
        # timeline: seg0, dwell0, seg1, dwell1, ..., seg_last
        self._segments = []  # (t0, t1, p0, p1, poi_idx)
        self._dwells = []  # (t0, t1, point, yaw0, yaw1, poi_switch_t)
        t = 0.0
        for i in range(n_seg):
            self._segments.append((t, t + seg_durs[i], pts[i], pts[i + 1], i))
            t += seg_durs[i]
            if i < n_seg - 1:
                yaw0 = _bearing(pts[i + 1], pois[i])
                yaw1 = _bearing(pts[i + 1], pois[i + 1])
                switch_t = t + 0.3 * dwell
                self._dwells.append((t, t + dwell, pts[i + 1], yaw0, yaw1, switch_t))
                t += dwell
        self._plan_end = t
        self._pois = pois
        self._events = [(0.0, pois[0])]
        for idx, dw in enumerate(self._dwells):
            self._events.append((dw[5], pois[idx + 1]))

    def sample(self, t: float) -> np.ndarray:
        """Flat reference [x, y, z, yaw] at time t."""
        if t < 0.0 or t > self.duration + 1e-9:
            raise ValueError(f"t={t} outside the run duration {self.duration}")
        kind = self.spec["kind"]
        if kind == "circle":
            s = self.spec
            ang = s["omega"] * t + s["phase"]
            c = np.asarray(s["center"], dtype=float)
            return np.array(
                [
                    s["radius"] * np.cos(ang) + c[0],
                    s["radius"] * np.sin(ang) + c[1],
                    c[2],
                    s["yaw"],
                ]
            )
        if kind == "file":
            idx = min(int(t / self._file_ts), self._file_refs.shape[0] - 1)
            return self._file_refs[idx].copy()
        return self._sample_waypoints(t)

    def _sample_waypoints(self, t):
        if t >= self._plan_end:
            # past the plan: hold the goal, look at the last point of interest
            goal = self._segments[-1][3]
            return np.array([goal[0], goal[1], goal[2], _bearing(goal, self._pois[-1])])
        for t0, t1, dw_pt, yaw0, yaw1, _ in self._dwells:
            if t0 <= t < t1:
                slew_span = 0.6 * (t1 - t0)
                frac = np.clip((t - t0) / slew_span, 0.0, 1.0)
                yaw = yaw0 + frac * (yaw1 - yaw0)
                return np.array([dw_pt[0], dw_pt[1], dw_pt[2], yaw])
        for t0, t1, p0, p1, poi_idx in self._segments:
            if t0 <= t < t1:
                s = _min_jerk((t - t0) / (t1 - t0))
                pos = p0 + s * (p1 - p0)
                yaw = _bearing(pos, self._pois[poi_idx])
                return np.array([pos[0], pos[1], pos[2], yaw])
        raise AssertionError("unreachable: plan timeline has a gap")

    def poi_at(self, t: float) -> np.ndarray:
        active = self._events[0][1]
        for t_k, p_k in self._events:
            if t >= t_k - 1e-12:
                active = p_k
        return active

    def series(self, ts: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-step (refs, pois) arrays over the whole run."""
        n = int(round(self.duration / ts))
        refs = np.empty((n, 4))
        pois = np.empty((n, 3))
        for k in range(n):
            refs[k] = self.sample(k * ts)
            pois[k] = self.poi_at(k * ts)
        return refs, pois


def gen_reference(ref_spec: dict, t: float, pois="auto", duration: float = np.inf):
    """One reference sample; convenience wrapper over ReferencePlan."""
    if pois == "auto" and ref_spec["kind"] != "waypoints":
        pois = [{"t": 0.0, "position": [0.0, 0.0, 0.0]}]
    dur = duration if np.isfinite(duration) else 1e12
    return ReferencePlan(ref_spec, pois, dur).sample(t)


def build_stack(cfg: dict):
    """Camera, approximation, tightened cone, plant, and constraint set."""
    cam = CameraModel(
        alpha_h=np.deg2rad(cfg["camera"]["alpha_h_deg"]),
        alpha_v=np.deg2rad(cfg["camera"]["alpha_v_deg"]),
        eps_z=cfg["camera"]["eps_z"],
    )
    approx = trig_approx(source=cfg["trig_source"])
    box = np.deg2rad(cfg["attitude_box_deg"])
    fov = tighten_fov_sound(cam, approx, box, box)
    plant = build_closed_loop(**cfg["plant"])
    constraints = build_poly_constraints(
        fov, approx, plant, eps_z=cam.eps_z, box=cfg["position_box"], tilt_max=box
    )
    return cam, approx, fov, plant, constraints


def build_or_load_moas(cfg: dict, cache_dir) -> tuple[Moas, PolyConstraintSet, dict]:
    """Provenance-keyed cache front end for the admissible set."""
    cam, approx, fov, plant, constraints = build_stack(cfg)
    moas = load_or_construct(
        cache_dir,
        constraints.lifted,
        constraints,
        MoasConfig(epsilon=cfg["epsilon"]),
    )
    return moas, constraints, {"cam": cam, "approx": approx, "fov": fov, "plant": plant}


def _enforced_violation(constraints: PolyConstraintSet, log_run) -> float:
    """Worst polynomial-constraint value along a logged run.

    Evaluated in the landmark frame of the point of interest that was
    actually enforced at each step (which can lag the planned schedule
    while a hand-off is deferred)."""
    x_l = log_run.x.copy()
    v_l = log_run.v.copy()
    x_l[:, :3] -= log_run.active_poi
    v_l[:, :3] -= log_run.active_poi
    zs = np.concatenate([x_l, v_l], axis=1)
    vals = constraints.C @ eta(zs, constraints.lifted).T - constraints.c0[:, None]
    return float(vals.max())


def run_scenario(cfg: dict, out_dir=None, cache_dir=None, tag: str = "scenario"):
    """Execute a configured run; returns (log, summary, exit_code).

    Artifacts: <tag>_log.csv and <tag>_summary.json under out_dir when
    given. Exit code 2 flags an infeasible start, 3 a failed set build,
    0 success. The log CSV is deterministic for a fixed config.
    """
    from .governor import InfeasibleError
    from .moas import MoasBuildError

    cache_dir = Path(cache_dir) if cache_dir else Path.cwd() / ".visgov_cache"
    try:
        moas, constraints, stack = build_or_load_moas(cfg, cache_dir)
    except MoasBuildError as exc:
        log.error("admissible-set build failed: %s", exc)
        return None, {"error": str(exc)}, 3

    plan = ReferencePlan(cfg["reference"], cfg["pois"], cfg["duration"])
    refs, pois = plan.series(stack["plant"].Ts)

    if cfg["x0"] is not None:
        x0 = np.asarray(cfg["x0"], dtype=float)
    else:
        x0 = np.zeros(8)
        x0[:4] = refs[0]

    rg_cfg = RgConfig(
        bisection_iters=cfg["bisection_iters"],
        control_period=stack["plant"].Ts,
        grace_horizon=cfg["grace_horizon"],
    )
    try:
        run_log = run_closed_loop(
            moas,
            stack["plant"],
            stack["cam"],
            refs,
            pois,
            x0,
            cfg=rg_cfg,
            rg_enabled=bool(cfg["rg"]),
            attitude_box=np.deg2rad(cfg["attitude_box_deg"]),
        )
    except InfeasibleError as exc:
        log.error("infeasible start: %s", exc)
        return None, {"error": str(exc)}, 2

    accel = (
        cfg["plant"]["kP"] * (run_log.v[:, :3] - run_log.x[:, :3])
        - cfg["plant"]["kD"] * run_log.x[:, 4:7]
    )
    summary = dict(run_log.summary)
    summary.update(
        {
            "scenario": tag,
            "rg": bool(cfg["rg"]),
            "k_star": moas.k_star,
            "moas_rows": moas.n_rows,
            "epsilon": moas.epsilon,
            "enforced_max_violation": _enforced_violation(constraints, run_log),
            "max_abs_velocity": float(np.abs(run_log.x[:, 4:7]).max()),
            "max_abs_accel": float(np.abs(accel).max()),
            "final_position": run_log.x[-1, :3].tolist() if len(run_log) else None,
        }
    )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        run_log.to_csv(out_dir / f"{tag}_log.csv")
        with open(out_dir / f"{tag}_summary.json", "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
    return run_log, summary, 0
