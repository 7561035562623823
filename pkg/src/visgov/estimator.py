"""Thin scikit-learn style wrapper around the offline/online pipeline.

fit() performs the offline work (tightening, constraint assembly, the
admissible-set construction, cache-aware) and predict() governs a stream
of desired references through the closed loop. The wrapper exists so the
toolkit can sit in sklearn-style pipelines and parameter searches; all
real logic lives in the plain modules.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .constraints import build_poly_constraints
from .geometry import CameraModel, tighten_fov_sound
from .governor import RgConfig, run_closed_loop
from .moas import MoasConfig, contains, load_or_construct
from .plant import build_closed_loop
from .trig import trig_approx


class VisibilityGovernor(BaseEstimator):
    """Field-of-view constraint enforcement as an estimator.

    Parameters mirror the scenario configuration defaults. fit() ignores
    X and y (the offline build depends only on the parameters); predict
    maps desired references to admissible applied references.
    """

    def __init__(
        self,
        ts: float = 0.01,
        epsilon: float = 0.01,
        alpha_h_deg: float = 45.0,
        alpha_v_deg: float = 35.0,
        eps_z: float = 0.1,
        attitude_box_deg: float = 4.0,
        trig_source: str = "table",
        bisection_iters: int = 20,
        cache_dir=None,
    ):
        self.ts = ts
        self.epsilon = epsilon
        self.alpha_h_deg = alpha_h_deg
        self.alpha_v_deg = alpha_v_deg
        self.eps_z = eps_z
        self.attitude_box_deg = attitude_box_deg
        self.trig_source = trig_source
        self.bisection_iters = bisection_iters
        self.cache_dir = cache_dir

    def fit(self, X=None, y=None):
        """Offline construction; X and y are ignored."""
        cam = CameraModel(
            alpha_h=np.deg2rad(self.alpha_h_deg),
            alpha_v=np.deg2rad(self.alpha_v_deg),
            eps_z=self.eps_z,
        )
        approx = trig_approx(source=self.trig_source)
        box = np.deg2rad(self.attitude_box_deg)
        fov = tighten_fov_sound(cam, approx, box, box)
        plant = build_closed_loop(Ts=self.ts)
        constraints = build_poly_constraints(
            fov, approx, plant, eps_z=cam.eps_z, tilt_max=box
        )
        cache = Path(self.cache_dir) if self.cache_dir else Path.cwd() / ".visgov_cache"
        self.moas_ = load_or_construct(
            cache, constraints.lifted, constraints, MoasConfig(epsilon=self.epsilon)
        )
        self.cam_ = cam
        self.fov_ = fov
        self.plant_ = plant
        self.constraints_ = constraints
        self.k_star_ = self.moas_.k_star
        self.n_rows_ = self.moas_.n_rows
        return self

    def predict(self, X, x0=None, poi=(0.0, 0.0, 0.0)):
        """Govern a (T, 4) stream of desired references sequentially.

        Starts from x0 (default: hover at the first reference) watching a
        fixed point of interest; returns the (T, 4) applied references.
        """
        check_is_fitted(self, "moas_")
        refs = np.asarray(X, dtype=float)
        if refs.ndim != 2 or refs.shape[1] != 4:
            raise ValueError("X must be (T, 4) reference rows [x, y, z, yaw]")
        if x0 is None:
            x0 = np.zeros(8)
            x0[:4] = refs[0]
        pois = np.tile(np.asarray(poi, dtype=float), (refs.shape[0], 1))
        log = run_closed_loop(
            self.moas_,
            self.plant_,
            self.cam_,
            refs,
            pois,
            np.asarray(x0, dtype=float),
            cfg=RgConfig(
                bisection_iters=self.bisection_iters, control_period=self.ts
            ),
        )
        self.log_ = log
        return log.v

    def margin(self, x, v):
        """Admissibility margin of extended state (x, v); <= 0 is inside."""
        check_is_fitted(self, "moas_")
        _, m = contains(self.moas_, np.asarray(x, float), np.asarray(v, float))
        return m
