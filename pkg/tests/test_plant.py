"""Closed-loop model tests: discretization against an ODE oracle,
steady-state behavior, attitude reconstruction."""

import numpy as np
import pytest

from visgov.geometry import virtual_frame
from visgov.plant import (
    attitude_from_flat,
    build_closed_loop,
    camera_projection,
    commanded_acceleration,
    step,
)
from visgov.geometry import CameraModel


@pytest.fixture(scope="module")
def model():
    return build_closed_loop()


def rk4_step(Ac, Bc, x, v, dt, substeps):
    def f(x_):
        return Ac @ x_ + Bc @ v

    h = dt / substeps
    for _ in range(substeps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def test_poles(model):
    # s^2 + kD s + kP = 0 per axis: -1 +/- i sqrt(3)
    eig = np.linalg.eigvals(model.Ac)
    expected = np.array([-1 + 1j * np.sqrt(3), -1 - 1j * np.sqrt(3)])
    for lam in eig:
        assert min(abs(lam - expected)) < 1e-12
    assert np.all(eig.real < 0)


def test_validation():
    with pytest.raises(ValueError):
        build_closed_loop(kP=0.0)
    with pytest.raises(ValueError):
        build_closed_loop(Ts=-0.01)


def test_discretization_small_ts_expansion(model):
    approx = np.eye(8) + model.Ac * model.Ts
    assert np.max(np.abs(model.Ad - approx)) < 0.5 * np.max(np.abs(model.Ac @ model.Ac)) * model.Ts**2 * 1.1


def test_discretization_matches_rk4_oracle(model):
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.uniform(-2, 2, 8)
        v = rng.uniform(-2, 2, 4)
        oracle = rk4_step(model.Ac, model.Bc, x, v, model.Ts, 1000)
        np.testing.assert_allclose(step(model, x, v), oracle, atol=1e-9)


def test_equilibrium_fixed_point(model):
    v = np.array([1.0, -2.0, 0.5, 0.3])
    x_eq = np.concatenate([v, np.zeros(4)])
    np.testing.assert_allclose(step(model, x_eq, v), x_eq, atol=1e-14)
    np.testing.assert_allclose(step(model, np.zeros(8), np.zeros(4)), np.zeros(8))


def test_converges_to_constant_reference(model):
    v = np.array([0.7, -0.4, 0.2, 1.0])
    x = np.zeros(8)
    for _ in range(2000):  # 20 s
        x = step(model, x, v)
    x_eq = np.concatenate([v, np.zeros(4)])
    assert np.linalg.norm(x - x_eq) < 1e-6


def test_multi_step_matches_ode(model):
    # piecewise-constant reference over 2 s, discrete map vs dense integration
    rng = np.random.default_rng(11)
    x = rng.uniform(-1, 1, 8)
    x_ode = x.copy()
    for k in range(200):
        v = np.array([np.cos(0.05 * k), np.sin(0.05 * k), 0.1, 0.0])
        x = step(model, x, v)
        x_ode = rk4_step(model.Ac, model.Bc, x_ode, v, model.Ts, 50)
    np.testing.assert_allclose(x, x_ode, atol=1e-6)


def test_frequency_gain_at_circle_rate(model):
    # |kP / ((jw)^2 + kD jw + kP)| at w = 2*pi/25
    w = 2 * np.pi / 25
    H = model.kP / ((1j * w) ** 2 + model.kD * 1j * w + model.kP)
    assert abs(H) == pytest.approx(1.00786, abs=1e-4)
    assert np.degrees(np.angle(H)) == pytest.approx(-7.276, abs=1e-2)


def test_attitude_zero_acceleration(model):
    v = np.array([1.0, 2.0, 0.5, 0.3])
    x_eq = np.concatenate([v, np.zeros(4)])
    roll, pitch = attitude_from_flat(x_eq, v, model)
    assert roll == pytest.approx(0.0, abs=1e-12)
    assert pitch == pytest.approx(0.0, abs=1e-12)


def test_attitude_pure_x_acceleration(model):
    # arrange state/reference so commanded acceleration is exactly [1,0,0]
    x = np.zeros(8)
    v = np.array([1.0 / model.kP, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(commanded_acceleration(model, x, v), [1, 0, 0], atol=1e-14)
    roll, pitch = attitude_from_flat(x, v, model)
    assert roll == pytest.approx(0.0, abs=1e-12)
    assert np.degrees(pitch) == pytest.approx(5.82, abs=0.01)
    assert pitch == pytest.approx(np.arctan(1.0 / 9.81), abs=1e-12)


def test_attitude_bound_under_acceleration_limit(model):
    # random commanded accelerations with |a|_inf <= a_max stay inside
    # the thrust-geometry envelope arctan(a_max * sqrt(2) / g)
    rng = np.random.default_rng(5)
    env = np.arctan(model.a_max * np.sqrt(2) / 9.81)
    for _ in range(200):
        a = rng.uniform(-model.a_max, model.a_max, 3)
        psi = rng.uniform(-np.pi, np.pi)
        x = np.zeros(8)
        x[3] = psi
        # v chosen so kP (v - p) - kD dp = a with p = dp = 0
        v = np.concatenate([a / model.kP, [psi]])
        roll, pitch = attitude_from_flat(x, v, model)
        assert abs(roll) <= env + 1e-9
        assert abs(pitch) <= env + 1e-9


def test_attitude_consistent_with_projection(model):
    # reconstructed zero attitude reproduces the virtual frame exactly
    cam = CameraModel(alpha_h=np.radians(45), alpha_v=np.radians(35))
    x = np.zeros(8)
    x[:3] = [-2.0, 1.0, -0.3]
    x[3] = 0.4
    v = np.array([-2.0, 1.0, -0.3, 0.4])
    att = attitude_from_flat(x, v, model)
    got = camera_projection(x, att, cam, [0, 0, 0])
    np.testing.assert_allclose(got, virtual_frame(x[:3], x[3], [0, 0, 0]), atol=1e-12)
