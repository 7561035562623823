"""Camera geometry and field-of-view tightening tests.

Pinned constants were computed with independent scripts (dense scans and
closed-form algebra) before this module existed.
"""

import numpy as np
import pytest

from visgov.geometry import (
    CameraModel,
    approx_virtual_frame,
    camera_projection,
    phase_and_magnitude_bounds,
    rot_x,
    rot_y,
    rot_z,
    tighten_fov,
    tighten_fov_sound,
    true_constraint_eval,
    violation_bounds,
    virtual_frame,
)
from visgov.trig import trig_approx

DEG = np.pi / 180.0


@pytest.fixture(scope="module")
def cam():
    return CameraModel(alpha_h=45 * DEG, alpha_v=35 * DEG, eps_z=0.1)


@pytest.fixture(scope="module")
def approx():
    return trig_approx(source="table")


def state(p, psi):
    x = np.zeros(8)
    x[:3] = p
    x[3] = psi
    return x


def test_rotations_orthonormal():
    rng = np.random.default_rng(0)
    for a in rng.uniform(-3, 3, 20):
        for R in (rot_x(a), rot_y(a), rot_z(a)):
            np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-14)
            assert np.linalg.det(R) == pytest.approx(1.0)


def test_camera_model_validation():
    with pytest.raises(ValueError):
        CameraModel(alpha_h=0.0, alpha_v=0.5)
    with pytest.raises(ValueError):
        CameraModel(alpha_h=0.5, alpha_v=1.6)
    with pytest.raises(ValueError):
        CameraModel(alpha_h=0.5, alpha_v=0.5, eps_z=0.0)


def test_hover_poi_ahead(cam):
    # level hover at origin, point 1 m ahead: image center, depth 1
    g1, g2, zc = true_constraint_eval(state([0, 0, 0], 0.0), (0.0, 0.0), cam, [1, 0, 0])
    assert zc == pytest.approx(1.0)
    assert g1 == pytest.approx(-cam.tan_h)
    assert g2 == pytest.approx(-cam.tan_v)


def test_poi_behind_flagged(cam):
    g1, g2, zc = true_constraint_eval(state([0, 0, 0], 0.0), (0.0, 0.0), cam, [-1, 0, 0])
    assert zc == pytest.approx(-1.0)
    assert np.isinf(g1) and np.isinf(g2)


def test_yaw_faces_plus_y(cam):
    xc, yc, zc = camera_projection(state([0, 0, 0], np.pi / 2), (0.0, 0.0), cam, [0, 2, 0])
    assert zc == pytest.approx(2.0)
    assert abs(xc) < 1e-12 and abs(yc) < 1e-12


def test_camera_frame_example(cam):
    # worked example frozen from an independent rotation-matrix check
    xc, yc, zc = camera_projection(
        state([-2.0, 0.3, -0.4], 0.7), (0.0, 0.0), cam, [0, 0, 0]
    )
    assert xc == pytest.approx(1.51789, abs=1e-4)
    assert yc == pytest.approx(-0.4, abs=1e-12)
    assert zc == pytest.approx(1.33642, abs=1e-4)


def test_projection_matches_virtual_frame_at_level_attitude(cam):
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = rng.uniform(-5, 5, 3)
        psi = rng.uniform(-np.pi, np.pi)
        poi = rng.uniform(-5, 5, 3)
        got = camera_projection(state(p, psi), (0.0, 0.0), cam, poi)
        np.testing.assert_allclose(got, virtual_frame(p, psi, poi), atol=1e-12)


def test_approx_virtual_frame_definition(approx):
    p, psi, poi = np.array([1.0, -2.0, 0.5]), 0.9, np.array([3.0, 1.0, 0.0])
    d = poi - p
    fs, fc = approx.fs(psi), approx.fc(psi)
    xv, yv, zv = approx_virtual_frame(p, psi, poi, approx)
    assert xv == pytest.approx(fs * d[0] - fc * d[1])
    assert yv == pytest.approx(-d[2])
    assert zv == pytest.approx(fc * d[0] + fs * d[1])


def test_phase_and_magnitude_bounds(approx):
    d_psi, rho_min, rho_max = phase_and_magnitude_bounds(approx)
    assert d_psi == pytest.approx(0.04434, abs=2e-4)
    assert rho_min == pytest.approx(0.8798, abs=1e-3)
    assert rho_max == pytest.approx(1.00850, abs=1e-4)


def test_violation_bounds_zero_box(approx, cam):
    e1, e2 = violation_bounds(approx, 0.0, 0.0, cam, delta_max=0.0)
    assert abs(e1) < 1e-12 and abs(e2) < 1e-12


def test_violation_bounds_published_setup(approx, cam):
    e1, e2 = violation_bounds(approx, 4 * DEG, 4 * DEG, cam)
    assert e1 == pytest.approx(0.1097, abs=1e-3)
    assert e2 == pytest.approx(0.1754, abs=1e-3)
    fov = tighten_fov(cam, (e1, e2))
    assert fov.alpha_h_eff / DEG == pytest.approx(41.68, abs=0.05)
    assert fov.alpha_v_eff / DEG == pytest.approx(27.69, abs=0.05)
    assert np.tan(fov.alpha_h_eff) == pytest.approx(cam.tan_h - e1)


def test_violation_bounds_full_domain_defect_is_pessimistic(approx, cam):
    e1, _ = violation_bounds(approx, 4 * DEG, 4 * DEG, cam, delta_max=approx.delta_max)
    assert e1 > 0.13  # consumes far more of the cone than the edge defect


def test_violation_bounds_hypothesis_refusals(approx, cam):
    with pytest.raises(ValueError, match="pi/2"):
        violation_bounds(approx, 1.6, 0.1, cam)
    with pytest.raises(ValueError, match="tan\\(theta_max\\)"):
        violation_bounds(approx, 4 * DEG, 54 * DEG, cam)


def test_tighten_fov_refusal(cam):
    with pytest.raises(ValueError):
        tighten_fov(cam, (cam.tan_h + 0.01, 0.1))
    with pytest.raises(ValueError):
        tighten_fov(cam, (0.1, cam.tan_v))


def invert_approx_frame(x_t, y_t, z_t, psi, approx):
    # position whose approximate virtual coordinates equal the target
    fs, fc = approx.fs(psi), approx.fc(psi)
    rho2 = fs * fs + fc * fc
    d0 = (fs * x_t + fc * z_t) / rho2
    d1 = (-fc * x_t + fs * z_t) / rho2
    return np.array([-d0, -d1, y_t])


def test_closed_form_tightening_leaks(approx, cam):
    # A state on the boundary of the closed-form reduced cone that
    # violates the true cone: the closed forms ignore the phase error of
    # the trig pair, so they do not certify the polynomial constraints.
    fov = tighten_fov(cam, violation_bounds(approx, 4 * DEG, 4 * DEG, cam))
    psi = -0.5716
    z_t = 2.0
    p = invert_approx_frame(fov.tan_h_eff * z_t, -fov.tan_v_eff * z_t, z_t, psi, approx)
    xv, yv, zv = approx_virtual_frame(p, psi, [0, 0, 0], approx)
    assert abs(xv) <= fov.tan_h_eff * zv + 1e-9
    assert abs(yv) <= fov.tan_v_eff * zv + 1e-9
    assert zv >= cam.eps_z
    g1, g2, zc = true_constraint_eval(state(p, psi), (-4 * DEG, 4 * DEG), cam, [0, 0, 0])
    assert zc > 0
    assert max(g1, g2) > 0.04


def test_sound_tightening_values(approx, cam):
    fov = tighten_fov_sound(cam, approx, 4 * DEG, 4 * DEG)
    assert fov.tan_h_eff == pytest.approx(0.8409, abs=2e-3)
    assert fov.tan_v_eff == pytest.approx(0.5159, abs=2e-3)
    assert fov.alpha_h_eff / DEG == pytest.approx(40.06, abs=0.1)
    assert fov.alpha_v_eff / DEG == pytest.approx(27.29, abs=0.1)
    assert fov.depth_scale == pytest.approx(1.0925, abs=0.01)
    assert np.tan(fov.alpha_h_eff) == pytest.approx(cam.tan_h - fov.eps1_max)


def test_sound_tightening_scan(approx, cam):
    # every state on or inside the sound reduced cone satisfies the true
    # cone at every attitude corner of the box
    fov = tighten_fov_sound(cam, approx, 4 * DEG, 4 * DEG)
    a = 4 * DEG
    attitudes = [(0.0, 0.0), (a, a), (a, -a), (-a, a), (-a, -a)]
    z_floor = cam.eps_z * fov.depth_scale
    worst = -np.inf
    for psi in np.linspace(-np.pi / 2, np.pi / 2, 121):
        for sx in (-1.0, 0.0, 1.0):
            for sy in (-1.0, 0.0, 1.0):
                for z_t in (z_floor, 1.0, 5.0):
                    p = invert_approx_frame(
                        sx * fov.tan_h_eff * z_t, sy * fov.tan_v_eff * z_t, z_t, psi, approx
                    )
                    for att in attitudes:
                        g1, g2, zc = true_constraint_eval(
                            state(p, psi), att, cam, [0, 0, 0]
                        )
                        assert zc >= cam.eps_z * (1 - 1e-9)
                        worst = max(worst, g1, g2)
    assert worst <= 1e-9
    assert worst > -0.05  # reduction is not vacuously over-tight
