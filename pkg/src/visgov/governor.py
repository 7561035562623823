"""Online reference governor over the lifted admissible set.

The governor holds the last applied reference v_prev and, each control
period, moves it toward the desired reference r along the segment
v(lam) = v_prev + lam (r - v_prev), keeping (x, v(lam)) inside the
precomputed admissible set. Membership along the segment is a
polynomial of degree <= p in lam for every constraint row, so the whole
line search costs one batched lift plus one sparse product; bisection
then only re-evaluates the interpolation.

All governing happens in the landmark frame (origin at the point of
interest, axes aligned with the inertial frame); the transforms are
pure translations of the positional components.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .lifting import eta
from .moas import Moas, contains
from .plant import ClosedLoopModel, attitude_from_flat, step
from .geometry import CameraModel, true_constraint_eval


class InfeasibleError(RuntimeError):
    """No admissible reference exists for the given state."""


@dataclass
class RgConfig:
    """Line-search settings for the governor.

    bisection_iters halvings give a lam resolution of 2**-iters; the
    default 20 is far below any meaningful constraint tolerance.
    grace_horizon bounds how many steps the governor may keep enforcing
    the previous landmark frame after a point-of-interest switch whose
    immediate hand-off is infeasible.
    """

    bisection_iters: int = 20
    control_period: float = 0.01
    grace_horizon: int = 100

    def __post_init__(self):
        if self.bisection_iters < 1:
            raise ValueError("bisection_iters must be >= 1")
        if self.control_period <= 0.0:
            raise ValueError("control_period must be positive")
        if self.grace_horizon < 0:
            raise ValueError("grace_horizon must be >= 0")


@dataclass
class GovernorState:
    """Mutable per-loop state; owned by a single control loop.

    v_prev is kept in the landmark frame. last_lambda and last_margin
    mirror the most recent rg_step for logging.
    """

    v_prev: np.ndarray | None = None
    initialized: bool = False
    last_lambda: float = float("nan")
    last_margin: float = float("nan")

    def initialize(self, v0) -> None:
        self.v_prev = np.asarray(v0, dtype=float).copy()
        self.initialized = True


# Interpolation nodes for the margin polynomial in lam. Degree p = 4
# needs 5 nodes; equally spaced on [0, 1] keeps the weights tame.
_LAM_NODES = np.linspace(0.0, 1.0, 5)
# Barycentric weights for those nodes: w_j = 1 / prod_{i!=j} (t_j - t_i).
_BARY_W = np.array(
    [1.0 / np.prod([t - s for s in _LAM_NODES if s != t]) for t in _LAM_NODES]
)


def segment_margins(moas: Moas, x, v_from, v_to) -> np.ndarray:
    """Constraint margins at the interpolation nodes of a reference segment.

    Returns an (n_rows, 5) matrix M with M[i, j] the margin of row i at
    lam = j/4. Because every lifted coordinate has total degree <= p in
    (x, v) and v is affine in lam, each row of M determines the margin
    polynomial exactly; margin_at reconstructs it at any lam.
    """
    x = np.asarray(x, dtype=float)
    v_from = np.asarray(v_from, dtype=float)
    v_to = np.asarray(v_to, dtype=float)
    if moas.lifted.p + 1 > _LAM_NODES.size:
        raise ValueError("interpolation nodes only cover degree <= 4 lifts")
    zs = np.empty((_LAM_NODES.size, x.size + v_from.size))
    zs[:, : x.size] = x
    zs[:, x.size :] = v_from + _LAM_NODES[:, None] * (v_to - v_from)
    return moas.A @ eta(zs, moas.lifted).T - moas.b[:, None]


def margin_at(node_margins: np.ndarray, lam: float) -> float:
    """Worst-row margin at lam from the node matrix (exact, barycentric)."""
    hit = np.isclose(lam, _LAM_NODES, rtol=0.0, atol=1e-14)
    if hit.any():
        return float(node_margins[:, int(np.argmax(hit))].max())
    w = _BARY_W / (lam - _LAM_NODES)
    w /= w.sum()
    return float((node_margins @ w).max())


def max_admissible_lambda(
    moas: Moas, x, v_prev, r, iters: int = 20
) -> tuple[float, float]:
    """Largest admissible lam on [0, 1] reachable from 0, by bisection.

    lam = 1 is tested first to short-circuit the unconstrained case.
    The admissible set along the segment need not be convex, so the
    search keeps the admissible lower endpoint and returns a maximal
    point of the connected component of 0, not a global maximum.
    Returns (lam, margin at lam).
    """
    M = segment_margins(moas, x, v_prev, r)
    m1 = margin_at(M, 1.0)
    if m1 <= 0.0:
        return 1.0, m1
    lo, m_lo = 0.0, margin_at(M, 0.0)
    hi = 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        m_mid = margin_at(M, mid)
        if m_mid <= 0.0:
            lo, m_lo = mid, m_mid
        else:
            hi = mid
    return lo, m_lo


def rg_step(moas: Moas, x, r, gov: GovernorState, cfg: RgConfig) -> np.ndarray:
    """One governor update; returns the applied reference.

    All quantities in the landmark frame. lam = 0 (keep v_prev) is
    admissible whenever the loop was started from an admissible pair,
    by positive invariance of the set, so the step always succeeds.
    Desired yaw is clamped to the trig approximation domain first.
    """
    if not gov.initialized:
        raise InfeasibleError("governor not initialized; call find_initial_reference")
    r = np.asarray(r, dtype=float).copy()
    if r.size == 4:
        # yaw outside the approximation domain is never admissible anyway
        r[3] = np.clip(r[3], -np.pi / 2, np.pi / 2)
    lam, margin = max_admissible_lambda(moas, x, gov.v_prev, r, cfg.bisection_iters)
    v = gov.v_prev + lam * (r - gov.v_prev)
    gov.v_prev = v
    gov.last_lambda = lam
    gov.last_margin = margin
    return v


def find_initial_reference(
    moas: Moas,
    x0,
    v_guess=None,
    pitch: float = 0.25,
    yaw_pitch: float = 0.2,
    steps: int = 2,
):
    """Search for an admissible held reference at x0 (landmark frame).

    Tries the state's own leading components first (position and yaw
    for the tracking plant), then a coarse grid around that guess,
    nearest candidates first. Returns the reference or None when the
    grid contains no admissible point; callers must treat None as a
    refusal to start the loop.
    """
    x0 = np.asarray(x0, dtype=float)
    m = moas.lifted.m
    if v_guess is None:
        v_guess = x0[:m]
    v_guess = np.asarray(v_guess, dtype=float)

    offsets = pitch * np.arange(-steps, steps + 1)
    axes = [offsets] * m
    if m == 4:
        axes[3] = yaw_pitch * np.arange(-steps, steps + 1)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    order = np.lexsort(tuple(grid.T) + ((grid**2).sum(axis=1),))
    cands = v_guess + grid[order]
    if m == 4:
        cands[:, 3] = np.clip(cands[:, 3], -np.pi / 2, np.pi / 2)

    zs = np.empty((cands.shape[0], x0.size + m))
    zs[:, : x0.size] = x0
    zs[:, x0.size :] = cands
    margins = (moas.A @ eta(zs, moas.lifted).T - moas.b[:, None]).max(axis=0)
    ok = np.flatnonzero(margins <= 0.0)
    if ok.size == 0:
        return None
    return cands[ok[0]].copy()


def to_landmark_frame(x, r, poi) -> tuple[np.ndarray, np.ndarray]:
    """Translate state and reference so the point of interest is the origin.

    Pure translation of the positional components; yaw and velocities
    are unchanged because the frame keeps the inertial orientation.
    """
    x_l = np.asarray(x, dtype=float).copy()
    r_l = np.asarray(r, dtype=float).copy()
    p = np.asarray(poi, dtype=float)
    x_l[:3] -= p
    r_l[:3] -= p
    return x_l, r_l


def from_landmark_frame(v_l, poi) -> np.ndarray:
    """Inverse of to_landmark_frame for a reference vector."""
    v = np.asarray(v_l, dtype=float).copy()
    v[:3] += np.asarray(poi, dtype=float)
    return v


@dataclass
class TrajectoryLog:
    """Per-step record of a governed run plus run-level summary.

    Columns follow the CSV layout: t, x[8], r[4], v[4], lambda, margin,
    g1, g2, zC. g1/g2/zC are exact camera-cone values at the commanded
    attitude, not the polynomial surrogates.
    """

    t: np.ndarray
    x: np.ndarray
    r: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    margin: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    z_c: np.ndarray
    active_poi: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    summary: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    def to_csv(self, path) -> None:
        header = (
            ["t"]
            + [f"x{i}" for i in range(self.x.shape[1])]
            + [f"r{i}" for i in range(self.r.shape[1])]
            + [f"v{i}" for i in range(self.v.shape[1])]
            + ["lambda", "margin", "g1", "g2", "zC"]
        )
        data = np.column_stack(
            [
                self.t,
                self.x,
                self.r,
                self.v,
                self.lam,
                self.margin,
                self.g1,
                self.g2,
                self.z_c,
            ]
        )
        np.savetxt(path, data, delimiter=",", header=",".join(header), comments="")


def _summarize(log, step_times, aborted, reason, switches, att_flags):
    times = np.asarray(step_times, dtype=float)
    lam = log.lam[np.isfinite(log.lam)]
    n = len(log)
    return {
        "steps": n,
        "max_violation": float(np.maximum(log.g1, log.g2).max()) if n else None,
        "min_depth": float(log.z_c.min()) if n else None,
        "mean_step_ms": float(times.mean() * 1e3) if times.size else 0.0,
        "max_step_ms": float(times.max() * 1e3) if times.size else 0.0,
        "lambda_mean": float(lam.mean()) if lam.size else None,
        "lambda_min": float(lam.min()) if lam.size else None,
        "lambda_unity_frac": float(np.mean(lam >= 1.0)) if lam.size else None,
        "aborted": aborted,
        "abort_reason": reason,
        "poi_switches": switches,
        "attitude_box_exceeded": att_flags,
    }


def run_closed_loop(
    moas: Moas,
    plant: ClosedLoopModel,
    cam: CameraModel,
    refs,
    pois,
    x0,
    cfg: RgConfig | None = None,
    rg_enabled: bool = True,
    attitude_box: float = np.deg2rad(4.0),
) -> TrajectoryLog:
    """Run the governed tracking loop over a reference stream.

    refs is (T, 4) desired references and pois (T, 3) the active point
    of interest per step, both in the inertial frame. When the point of
    interest changes, v_prev is re-expressed in the new landmark frame
    and re-checked; an infeasible hand-off keeps governing in the old
    frame for up to cfg.grace_horizon steps while retrying, after which
    the run is aborted with the partial log returned.

    With rg_enabled False the desired reference is applied unmodified
    (lam = 1 always); margins are still logged for comparison.
    """
    cfg = cfg or RgConfig()
    refs = np.asarray(refs, dtype=float)
    pois = np.asarray(pois, dtype=float)
    if refs.ndim != 2 or refs.shape[1] != 4:
        raise ValueError("refs must be (T, 4)")
    if pois.shape != (refs.shape[0], 3):
        raise ValueError("pois must be (T, 3)")
    x = np.asarray(x0, dtype=float).copy()
    n_steps = refs.shape[0]

    active_poi = pois[0]
    x_l, _ = to_landmark_frame(x, refs[0], active_poi)
    gov = GovernorState()
    v0 = find_initial_reference(moas, x_l)
    if v0 is None:
        raise InfeasibleError("no admissible initial reference at x0")
    gov.initialize(v0)

    rows = []
    step_times = []
    switches = []
    att_flags = 0
    grace_left = 0
    aborted = False
    reason = None

    for k in range(n_steps):
        # hand off to a new landmark frame, or keep burning grace steps
        if not np.array_equal(pois[k], active_poi) or grace_left > 0:
            target_poi = pois[k]
            v_inertial = from_landmark_frame(gov.v_prev, active_poi)
            x_try, v_try = to_landmark_frame(x, v_inertial, target_poi)
            ok, _ = contains(moas, x_try, v_try)
            if ok:
                if grace_left > 0 or not np.array_equal(target_poi, active_poi):
                    switches.append({"step": k, "status": "switched"})
                active_poi = target_poi
                gov.v_prev = v_try
                grace_left = 0
            elif grace_left == 0 and not np.array_equal(target_poi, active_poi):
                grace_left = cfg.grace_horizon
                switches.append({"step": k, "status": "deferred"})
            elif grace_left > 0:
                grace_left -= 1
                if grace_left == 0:
                    aborted = True
                    reason = f"poi switch infeasible after grace horizon at step {k}"
                    switches.append({"step": k, "status": "aborted"})
                    break

        x_l, r_l = to_landmark_frame(x, refs[k], active_poi)
        t0 = time.perf_counter()
        if rg_enabled:
            v_l = rg_step(moas, x_l, r_l, gov, cfg)
        else:
            v_l = r_l
            gov.v_prev = v_l
            gov.last_lambda = 1.0
            _, gov.last_margin = contains(moas, x_l, v_l)
        step_times.append(time.perf_counter() - t0)
        v = from_landmark_frame(v_l, active_poi)

        roll, pitch = attitude_from_flat(x, v, plant)
        if max(abs(roll), abs(pitch)) > attitude_box + 1e-12:
            att_flags += 1
        g1, g2, z_c = true_constraint_eval(x, (roll, pitch), cam, active_poi)
        rows.append(
            np.concatenate(
                [
                    [k * plant.Ts],
                    x,
                    refs[k],
                    v,
                    [gov.last_lambda, gov.last_margin, g1, g2, z_c],
                    active_poi,
                ]
            )
        )
        x = step(plant, x, v)

    data = np.asarray(rows) if rows else np.zeros((0, 25))
    log = TrajectoryLog(
        t=data[:, 0],
        x=data[:, 1:9],
        r=data[:, 9:13],
        v=data[:, 13:17],
        lam=data[:, 17],
        margin=data[:, 18],
        g1=data[:, 19],
        g2=data[:, 20],
        z_c=data[:, 21],
        active_poi=data[:, 22:25],
    )
    log.summary = _summarize(log, step_times, aborted, reason, switches, att_flags)
    return log
