"""Closed-loop multirotor model in flat outputs.

Each flat output (three position axes and yaw) is a double integrator
under PD tracking of a piecewise-constant reference, which is what a
feedback-linearizing inner loop leaves behind. Discretization is exact
zero-order hold. Attitude never appears in the state; it is
reconstructed from the commanded acceleration when the true camera
constraints need it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .geometry import camera_projection  # noqa: F401  (re-export, used with SimState)

GRAVITY = 9.81


@dataclass(frozen=True)
class ClosedLoopModel:
    """x = [p, psi, dp, dpsi] in R^8, reference v = [p_ref, psi_ref] in R^4."""

    Ac: np.ndarray
    Bc: np.ndarray
    Ad: np.ndarray
    Bd: np.ndarray
    Ts: float
    kP: float
    kD: float
    v_max: float
    a_max: float

    @property
    def n(self) -> int:
        return self.Ac.shape[0]

    @property
    def m(self) -> int:
        return self.Bc.shape[1]


@dataclass
class SimState:
    x: np.ndarray
    t: float
    attitude: tuple


def build_closed_loop(
    kP: float = 4.0,
    kD: float = 2.0,
    Ts: float = 0.01,
    v_max: float = 1.5,
    a_max: float = 1.0,
) -> ClosedLoopModel:
    """Assemble the continuous closed loop and its exact ZOH discretization.

    Per axis: pddot = kP (v - p) - kD pdot, so the continuous blocks are
    [[0, I], [-kP I, -kD I]] with input matrix [[0], [kP I]].
    """
    if kP <= 0 or kD <= 0:
        raise ValueError("gains must be positive")
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    I4 = np.eye(4)
    Ac = np.block([[np.zeros((4, 4)), I4], [-kP * I4, -kD * I4]])
    Bc = np.vstack([np.zeros((4, 4)), kP * I4])
    aug = np.zeros((12, 12))
    aug[:8, :8] = Ac
    aug[:8, 8:] = Bc
    M = expm(aug * Ts)
    return ClosedLoopModel(
        Ac=Ac, Bc=Bc, Ad=M[:8, :8].copy(), Bd=M[:8, 8:].copy(),
        Ts=Ts, kP=kP, kD=kD, v_max=v_max, a_max=a_max,
    )


def step(model: ClosedLoopModel, x, v) -> np.ndarray:
    """One control period: x_next = Ad x + Bd v."""
    return model.Ad @ np.asarray(x, dtype=float) + model.Bd @ np.asarray(v, dtype=float)


def commanded_acceleration(model: ClosedLoopModel, x, v) -> np.ndarray:
    """Translational acceleration the controller is applying (3,)."""
    dx = model.Ac @ np.asarray(x, dtype=float) + model.Bc @ np.asarray(v, dtype=float)
    return dx[4:7]


def attitude_from_flat(x, v, model: ClosedLoopModel) -> tuple:
    """Roll and pitch implied by the commanded acceleration and yaw.

    The thrust axis must point along a + g e3; roll and pitch are read
    off the rotation built from that axis and the yaw heading.

    Raises
    ------
    ValueError
        If the thrust direction is undefined (free fall); unreachable
        while the acceleration bound stays below g.
    """
    a = commanded_acceleration(model, x, v)
    t = a + np.array([0.0, 0.0, GRAVITY])
    nt = np.linalg.norm(t)
    if nt < 1e-9:
        raise ValueError("free-fall commanded acceleration, attitude undefined")
    z_b = t / nt
    psi = float(np.asarray(x, dtype=float)[3])
    x_head = np.array([np.cos(psi), np.sin(psi), 0.0])
    y_b = np.cross(z_b, x_head)
    ny = np.linalg.norm(y_b)
    if ny < 1e-9:
        raise ValueError("thrust axis parallel to heading, attitude undefined")
    y_b /= ny
    x_b = np.cross(y_b, z_b)
    # ZYX Euler angles of R = [x_b | y_b | z_b]
    pitch = float(-np.arcsin(x_b[2]))
    roll = float(np.arctan2(y_b[2], z_b[2]))
    return roll, pitch
