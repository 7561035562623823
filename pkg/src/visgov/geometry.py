"""Camera geometry: frames, projections, and field-of-view tightening.

The camera looks along the body x axis. Visibility is expressed in a
"virtual" frame that zeroes roll and pitch, so the constraints depend
only on position and yaw; the price is a bounded violation when the real
attitude is nonzero, which is removed by shrinking the enforced cone.

Two tightenings are provided. `tighten_fov` uses closed-form violation
bounds over the attitude box. `tighten_fov_sound` additionally accounts
for the phase and magnitude error of the polynomial trig approximation,
which the closed forms ignore; it is the default for enforcement since
without it boundary states can still violate the true cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .trig import TrigApprox


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# camera axes in body coordinates: x right = -body y, y down = -body z,
# z forward = body x
R_BC_FORWARD = np.array(
    [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]
)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera rigidly mounted at the body center, facing forward.

    alpha_h, alpha_v are the half field-of-view angles (rad); eps_z is the
    minimum admissible depth (m).
    """

    alpha_h: float
    alpha_v: float
    R_BC: np.ndarray = None
    eps_z: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.alpha_h < np.pi / 2 and 0.0 < self.alpha_v < np.pi / 2):
            raise ValueError("half FoV angles must lie in (0, pi/2)")
        if self.eps_z <= 0:
            raise ValueError("eps_z must be positive")
        if self.R_BC is None:
            object.__setattr__(self, "R_BC", R_BC_FORWARD.copy())

    @property
    def tan_h(self) -> float:
        return float(np.tan(self.alpha_h))

    @property
    def tan_v(self) -> float:
        return float(np.tan(self.alpha_v))


@dataclass(frozen=True)
class TightenedFov:
    """Reduced field of view enforcing the true cone under attitude error.

    tan(alpha_eff) = tan(alpha) - eps_max per axis. depth_scale multiplies
    the enforced minimum depth so the true depth floor survives the
    frame approximations (1.0 when no correction is applied).
    """

    eps1_max: float
    eps2_max: float
    alpha_h_eff: float
    alpha_v_eff: float
    depth_scale: float = 1.0

    @property
    def tan_h_eff(self) -> float:
        return float(np.tan(self.alpha_h_eff))

    @property
    def tan_v_eff(self) -> float:
        return float(np.tan(self.alpha_v_eff))


def camera_projection(x, attitude, cam: CameraModel, poi) -> tuple:
    """Coordinates of the point of interest in the camera frame.

    Parameters
    ----------
    x : array_like
        Flat state; x[:3] position, x[3] yaw.
    attitude : tuple
        (roll, pitch) in rad.
    cam : CameraModel
    poi : array_like
        Point of interest, inertial frame.

    Returns
    -------
    (x_C, y_C, z_C) : floats
    """
    x = np.asarray(x, dtype=float)
    roll, pitch = attitude
    R = rot_z(x[3]) @ rot_y(pitch) @ rot_x(roll)
    d = np.asarray(poi, dtype=float) - x[:3]
    p_c = cam.R_BC.T @ (R.T @ d)
    return float(p_c[0]), float(p_c[1]), float(p_c[2])


def true_constraint_eval(x, attitude, cam: CameraModel, poi) -> tuple:
    """Exact violation values of the camera cone at a state.

    Returns (g1, g2, z_C) with g1 = |x_C/z_C| - tan(alpha_h) and
    g2 = |y_C/z_C| - tan(alpha_v). Nonpositive g means satisfied. A
    nonpositive depth is flagged by returning inf for both g values
    rather than raising.
    """
    xc, yc, zc = camera_projection(x, attitude, cam, poi)
    if zc <= 0.0:
        return np.inf, np.inf, zc
    return abs(xc / zc) - cam.tan_h, abs(yc / zc) - cam.tan_v, zc


def virtual_frame(p, psi: float, poi) -> tuple:
    """Exact virtual-camera coordinates (roll and pitch zeroed)."""
    d = np.asarray(poi, dtype=float) - np.asarray(p, dtype=float)
    s, c = np.sin(psi), np.cos(psi)
    x_v = s * d[0] - c * d[1]
    z_v = c * d[0] + s * d[1]
    y_v = -d[2]
    return float(x_v), float(y_v), float(z_v)


def approx_virtual_frame(p, psi, poi, approx: TrigApprox) -> tuple:
    """Virtual-camera coordinates with the polynomial trig substituted."""
    d = np.asarray(poi, dtype=float) - np.asarray(p, dtype=float)
    fs, fc = approx.fs(psi), approx.fc(psi)
    return (
        float(fs * d[0] - fc * d[1]),
        float(-d[2]),
        float(fc * d[0] + fs * d[1]),
    )


def _refine_max(fun, lo, hi):
    res = minimize_scalar(
        lambda s: -fun(s), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
    )
    return -res.fun


def phase_and_magnitude_bounds(approx: TrigApprox, n: int = 200_001) -> tuple:
    """Worst-case phase error and magnitude range of the trig pair.

    Returns (delta_psi_max, rho_min, rho_max) where delta_psi is the
    angle error atan2(f_s, f_c) - psi and rho = sqrt(f_s^2 + f_c^2).
    """
    a, b = approx.domain
    psi = np.linspace(a, b, n)
    fs, fc = approx.fs(psi), approx.fc(psi)
    dphi = np.arctan2(fs, fc) - psi
    rho = np.hypot(fs, fc)
    j = int(np.argmax(np.abs(dphi)))
    h = psi[1] - psi[0]
    dmax = _refine_max(
        lambda s: abs(float(np.arctan2(approx.fs(s), approx.fc(s))) - s),
        max(a, psi[j] - h),
        min(b, psi[j] + h),
    )
    return float(max(abs(dphi[j]), dmax)), float(rho.min()), float(rho.max())


def violation_bounds(
    approx: TrigApprox,
    phi_max: float,
    theta_max: float,
    cam: CameraModel,
    delta_max: float | None = None,
    grid: int = 500,
) -> tuple:
    """Closed-form worst-case cone violations over the attitude box.

    The violation of the horizontal (eps1) and vertical (eps2) bearing
    constraints on the boundary of the virtual-frame cone is bounded in
    closed form as a function of roll and pitch; this returns the maxima
    of those surfaces over |roll| <= phi_max, |pitch| <= theta_max.

    Parameters
    ----------
    delta_max : float, optional
        Bound on the Pythagorean defect |f_s^2 + f_c^2 - 1| used by the
        closed forms. Defaults to the defect at the domain edge; pass
        approx.delta_max for the conservative full-domain supremum (the
        closed forms grow far more pessimistic with it).

    Returns
    -------
    (eps1_max, eps2_max) : floats, in tangent units.

    Raises
    ------
    ValueError
        If the small-attitude hypotheses fail (each check reports the
        inequality that failed).
    """
    if delta_max is None:
        delta_max = approx.edge_defect()
    th, tv = cam.tan_h, cam.tan_v
    tt = np.tan(theta_max)
    if not (phi_max < np.pi / 2 and theta_max < np.pi / 2):
        raise ValueError("attitude box must satisfy phi_max, theta_max < pi/2")
    lim = min(tv / (1.0 - delta_max), (1.0 - delta_max) / tv)
    if not tt < lim:
        raise ValueError(
            f"tan(theta_max)={tt:.4f} must be < min(tan(a_v)/(1-d), (1-d)/tan(a_v))={lim:.4f}"
        )
    k_min = (1.0 - delta_max) * np.cos(theta_max) - np.sin(theta_max) * tv
    if k_min <= 0:
        raise ValueError(f"k_min={k_min:.4f} must be positive")

    phis = np.linspace(-phi_max, phi_max, grid) if phi_max > 0 else np.zeros(1)
    thetas = np.linspace(-theta_max, theta_max, grid) if theta_max > 0 else np.zeros(1)
    P, T = np.meshgrid(phis, thetas, indexing="ij")
    sT, cT, sP, cP = np.sin(T), np.cos(T), np.sin(P), np.cos(P)
    km = (1.0 - delta_max) * cT - sT * tv
    e1 = ((1.0 + delta_max) * (sT * sP + cP * th - cT * th) + cT * sP * tv + sT * tv * th) / km
    e2 = ((1.0 + delta_max) * (sT * cP - sP * th - cT * tv) + sT * tv**2 + cT * cP * tv) / km

    def refine(E, surf):
        i, j = np.unravel_index(np.argmax(E), E.shape)
        best = E[i, j]
        if phi_max == 0 and theta_max == 0:
            return float(best)
        # coordinate-wise bounded refinement around the grid argmax
        phi0, th0 = float(P[i, j]), float(T[i, j])
        for _ in range(3):
            if phi_max > 0:
                r = minimize_scalar(
                    lambda s: -surf(s, th0),
                    bounds=(max(-phi_max, phi0 - 2e-2), min(phi_max, phi0 + 2e-2)),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                phi0, best = float(r.x), max(best, -r.fun)
            if theta_max > 0:
                r = minimize_scalar(
                    lambda s: -surf(phi0, s),
                    bounds=(max(-theta_max, th0 - 2e-2), min(theta_max, th0 + 2e-2)),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                th0, best = float(r.x), max(best, -r.fun)
        return float(best)

    def s1(phi, th_):
        km_ = (1.0 - delta_max) * np.cos(th_) - np.sin(th_) * tv
        return (
            (1.0 + delta_max) * (np.sin(th_) * np.sin(phi) + np.cos(phi) * th - np.cos(th_) * th)
            + np.cos(th_) * np.sin(phi) * tv
            + np.sin(th_) * tv * th
        ) / km_

    def s2(phi, th_):
        km_ = (1.0 - delta_max) * np.cos(th_) - np.sin(th_) * tv
        return (
            (1.0 + delta_max) * (np.sin(th_) * np.cos(phi) - np.sin(phi) * th - np.cos(th_) * tv)
            + np.sin(th_) * tv**2
            + np.cos(th_) * np.cos(phi) * tv
        ) / km_

    return refine(e1, s1), refine(e2, s2)


def tighten_fov(cam: CameraModel, bounds: tuple) -> TightenedFov:
    """Shrink the cone by the closed-form violation bounds.

    alpha_eff = arctan(tan(alpha) - eps_max) per axis.

    Raises
    ------
    ValueError
        If a bound consumes the whole cone (camera too narrow for the
        requested attitude box).
    """
    eps1, eps2 = float(bounds[0]), float(bounds[1])
    t_h = cam.tan_h - eps1
    t_v = cam.tan_v - eps2
    if t_h <= 0 or t_v <= 0:
        raise ValueError(
            f"violation bounds ({eps1:.4f}, {eps2:.4f}) exceed the cone "
            f"tangents ({cam.tan_h:.4f}, {cam.tan_v:.4f})"
        )
    return TightenedFov(
        eps1_max=eps1,
        eps2_max=eps2,
        alpha_h_eff=float(np.arctan(t_h)),
        alpha_v_eff=float(np.arctan(t_v)),
    )


def _attitude_box_cone(t_h, t_v, phi_max, theta_max, grid=401, iters=80):
    # Largest virtual-frame box (tau_h', tau_v') such that the camera cone
    # holds for every roll/pitch in the box. The two bounds are linear in
    # the other axis' extreme, so iterate the pair to its fixed point.
    phis = np.linspace(-phi_max, phi_max, grid) if phi_max > 0 else np.zeros(1)
    thetas = np.linspace(-theta_max, theta_max, grid) if theta_max > 0 else np.zeros(1)
    P, T = np.meshgrid(phis, thetas, indexing="ij")
    sP, cP, sT, cT = np.sin(P), np.cos(P), np.sin(T), np.cos(T)
    den_w = cP * cT - t_v * sT
    if np.any(den_w <= 0):
        raise ValueError("attitude box too large for the vertical cone")
    th_p, tv_p = t_h, t_v
    for _ in range(iters):
        ub = np.inf
        for w in (-tv_p, tv_p):
            ub = min(ub, float(np.min((t_h * (cT + sT * w) + sP * (sT - cT * w)) / cP)))
        wb = np.inf
        for u in (-th_p, th_p):
            wb = min(wb, float(np.min((t_v * cT + sP * u + cP * sT) / den_w)))
        if abs(ub - th_p) < 1e-14 and abs(wb - tv_p) < 1e-14:
            break
        th_p, tv_p = ub, wb
    if th_p <= 0 or tv_p <= 0:
        raise ValueError("attitude box consumes the whole cone")
    return th_p, tv_p


def tighten_fov_sound(
    cam: CameraModel, approx: TrigApprox, phi_max: float, theta_max: float
) -> TightenedFov:
    """Reduced cone that provably implies the true cone.

    Stage 1 shrinks the cone so it survives every roll/pitch in the box
    (exact rotation algebra). Stage 2 shrinks it further so it survives
    the trig approximation: the approximate frame is the true virtual
    frame rotated by the phase error and scaled by the magnitude of
    (f_s, f_c), so the horizontal bound loses the worst phase angle and
    the vertical bound a magnitude/projection factor. The returned
    depth_scale restores the true depth floor through the same factors.
    """
    th_p, tv_p = _attitude_box_cone(cam.tan_h, cam.tan_v, phi_max, theta_max)
    d_psi, _, rho_max = phase_and_magnitude_bounds(approx)

    chi_p = np.arctan(th_p) - d_psi
    if chi_p <= 0:
        raise ValueError("phase error consumes the whole horizontal cone")
    tau_h = float(np.tan(chi_p))
    # worst-case ratio of approximate to true virtual depth
    chi_max = np.arctan(tau_h)
    mu = rho_max * np.cos(chi_max) / np.cos(chi_max + d_psi)
    tau_v = float(tv_p / mu)
    depth_scale = float(mu / (np.cos(theta_max) - np.sin(theta_max) * tv_p))
    return TightenedFov(
        eps1_max=cam.tan_h - tau_h,
        eps2_max=cam.tan_v - tau_v,
        alpha_h_eff=float(np.arctan(tau_h)),
        alpha_v_eff=float(np.arctan(tau_v)),
        depth_scale=depth_scale,
    )
