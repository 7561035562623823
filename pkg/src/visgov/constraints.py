"""Visibility, actuation, and compactness constraints as polynomials.

Everything is expressed in the landmark frame (point of interest at the
origin) over the extended state z = [x, v] with 12 variables:
p (0..2), psi (3), dp (4..6), dpsi (7), v_pos (8..10), v_psi (11).

Each inequality is c_i(z) = sum_a coeff_a z^a - offset <= 0. The same
rows are also materialized over the lifted monomial vector Z so the
admissible-set machinery sees plain linear inequalities C Z <= c0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .geometry import TightenedFov
from .lifting import LiftedSystem, build_lifted_system, eta, lift_no_rep, monomial_basis
from .plant import GRAVITY, ClosedLoopModel
from .trig import TrigApprox

NUM_VARS = 12
P_X, P_Y, P_Z, PSI = 0, 1, 2, 3
DP = 4
V_POS = 8
V_PSI = 11


@dataclass(frozen=True)
class PolyConstraint:
    """One inequality sum(coeffs[t] * prod(z[i] for i in t)) - offset <= 0.

    Keys are non-decreasing variable-index tuples, the same convention
    as the monomial basis.
    """

    name: str
    coeffs: dict
    offset: float

    @property
    def degree(self) -> int:
        return max(len(t) for t in self.coeffs)

    def __call__(self, z) -> float:
        z = np.asarray(z, dtype=float)
        acc = -self.offset
        for t, a in self.coeffs.items():
            acc += a * np.prod(z[list(t)])
        return float(acc)


@dataclass(frozen=True)
class PolyConstraintSet:
    polys: list
    C: sparse.csr_matrix
    c0: np.ndarray
    p: int
    lifted: LiftedSystem = field(repr=False)

    def __len__(self) -> int:
        return len(self.polys)

    @property
    def names(self) -> list:
        return [q.name for q in self.polys]

    def evaluate(self, z) -> np.ndarray:
        """All constraint values at an extended state (via the lift)."""
        return self.C @ eta(np.asarray(z, dtype=float), self.lifted) - self.c0

    def evaluate_lifted(self, Z) -> np.ndarray:
        return self.C @ np.asarray(Z, dtype=float) - self.c0


def _trig_terms(approx: TrigApprox):
    # coefficient list of f_s and f_c as {psi exponent: coeff}
    fs = {2 * i + 1: k for i, k in enumerate(approx.ks) if k != 0.0}
    fc = {2 * i: k for i, k in enumerate(approx.kc) if k != 0.0}
    return fs, fc


def _mul_var(pows: dict, var: int) -> dict:
    # multiply a psi-power coefficient map by one extra variable
    out = {}
    for e, a in pows.items():
        t = tuple(sorted((PSI,) * e + (var,)))
        out[t] = out.get(t, 0.0) + a
    return out


def _combine(*term_maps) -> dict:
    out = {}
    for m in term_maps:
        for t, a in m.items():
            out[t] = out.get(t, 0.0) + a
            if out[t] == 0.0:
                del out[t]
    return out


def _scaled(m: dict, s: float) -> dict:
    return {t: s * a for t, a in m.items()} if s != 0.0 else {}


def _square_linear(lin: dict) -> dict:
    # square of a linear form sum(c_u z_u) as degree-2 term tuples
    out = {}
    items = list(lin.items())
    for u, cu in items:
        for w, cw in items:
            t = tuple(sorted(u + w))
            out[t] = out.get(t, 0.0) + cu * cw
    return out


def build_poly_constraints(
    cam_eff: TightenedFov,
    approx: TrigApprox,
    plant: ClosedLoopModel,
    v_max: float | None = None,
    a_max: float | None = None,
    eps_z: float = 0.1,
    box: float = 10.0,
    psi_max: float = np.pi / 2,
    psi_rate_max: float = 2 * np.pi,
    tilt_max: float | None = np.deg2rad(4.0),
    lifted: LiftedSystem | None = None,
) -> PolyConstraintSet:
    """Assemble the polynomial constraint set and its lifted rows.

    Bearing and depth constraints substitute the trig approximation into
    the virtual camera frame; with a degree-3 sine each becomes a
    degree-4 polynomial. Velocity, acceleration, yaw-domain, and box
    constraints are linear. The box rows (position, reference, yaw rate)
    are fictitious: they only make the admissible set compact so the
    admissible-set recursion can terminate.

    Raises
    ------
    ValueError
        If a row's degree exceeds the lift degree p.
    """
    if v_max is None:
        v_max = plant.v_max
    if a_max is None:
        a_max = plant.a_max
    fs, fc = _trig_terms(approx)
    tau_h, tau_v = cam_eff.tan_h_eff, cam_eff.tan_v_eff

    # virtual frame with the landmark at the origin: d = -p
    x_t = _combine(_scaled(_mul_var(fs, P_X), -1.0), _mul_var(fc, P_Y))
    z_t = _combine(_scaled(_mul_var(fc, P_X), -1.0), _scaled(_mul_var(fs, P_Y), -1.0))
    y_t = {(P_Z,): 1.0}

    polys = []

    def add(name, terms, offset):
        polys.append(PolyConstraint(name=name, coeffs=dict(terms), offset=float(offset)))

    add("bearing_h+", _combine(x_t, _scaled(z_t, -tau_h)), 0.0)
    add("bearing_h-", _combine(_scaled(x_t, -1.0), _scaled(z_t, -tau_h)), 0.0)
    add("bearing_v+", _combine(y_t, _scaled(z_t, -tau_v)), 0.0)
    add("bearing_v-", _combine(_scaled(y_t, -1.0), _scaled(z_t, -tau_v)), 0.0)
    add("depth", _scaled(z_t, -1.0), -eps_z * cam_eff.depth_scale)

    for i, ax in enumerate("xyz"):
        add(f"vel_{ax}+", {(DP + i,): 1.0}, v_max)
        add(f"vel_{ax}-", {(DP + i,): -1.0}, v_max)
    for i, ax in enumerate("xyz"):
        acc = {(V_POS + i,): plant.kP, (i,): -plant.kP, (DP + i,): -plant.kD}
        add(f"acc_{ax}+", acc, a_max)
        add(f"acc_{ax}-", {t: -a for t, a in acc.items()}, a_max)
    add("yaw+", {(PSI,): 1.0}, psi_max)
    add("yaw-", {(PSI,): -1.0}, psi_max)
    for i, ax in enumerate("xyz"):
        add(f"pos_{ax}+", {(i,): 1.0}, box)
        add(f"pos_{ax}-", {(i,): -1.0}, box)
    for i, ax in enumerate("xyz"):
        add(f"ref_{ax}+", {(V_POS + i,): 1.0}, box)
        add(f"ref_{ax}-", {(V_POS + i,): -1.0}, box)
    add("ref_yaw+", {(V_PSI,): 1.0}, psi_max)
    add("ref_yaw-", {(V_PSI,): -1.0}, psi_max)
    add("yaw_rate+", {(PSI + 4,): 1.0}, psi_rate_max)
    add("yaw_rate-", {(PSI + 4,): -1.0}, psi_rate_max)

    if tilt_max is not None:
        # thrust-axis cone: ax^2 + ay^2 <= tan(tilt_max)^2 (g + az)^2.
        # roll and pitch never exceed the thrust tilt angle, so this row
        # turns the attitude box the cone reduction assumes into a
        # guarantee instead of a hope. Degree 2.
        kappa = float(np.tan(tilt_max) ** 2)
        a_lin = [
            {(V_POS + i,): plant.kP, (i,): -plant.kP, (DP + i,): -plant.kD}
            for i in range(3)
        ]
        tilt = _combine(
            _square_linear(a_lin[0]),
            _square_linear(a_lin[1]),
            _scaled(_square_linear(a_lin[2]), -kappa),
            _scaled(a_lin[2], -2.0 * kappa * GRAVITY),
        )
        add("tilt", tilt, kappa * GRAVITY**2)

    if lifted is None:
        phi = np.block(
            [
                [plant.Ad, plant.Bd],
                [np.zeros((plant.m, plant.n)), np.eye(plant.m)],
            ]
        )
        lifted = build_lifted_system(phi, p=4, m=plant.m)
    return assemble_constraint_set(polys, lifted)


def assemble_constraint_set(polys: list, lifted: LiftedSystem) -> PolyConstraintSet:
    """Materialize polynomial inequalities as linear rows over lifted Z."""
    deg = max(q.degree for q in polys)
    if deg > lifted.p:
        raise ValueError(f"constraint degree {deg} exceeds lift degree {lifted.p}")
    rows, cols, vals = [], [], []
    for i, q in enumerate(polys):
        for t, a in q.coeffs.items():
            rows.append(i)
            cols.append(lifted.z_index[t])
            vals.append(a)
    C = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(polys), lifted.total_dim)
    )
    c0 = np.array([q.offset for q in polys])
    return PolyConstraintSet(polys=polys, C=C, c0=c0, p=lifted.p, lifted=lifted)


def to_json(cs: PolyConstraintSet) -> str:
    """Inspection-friendly JSON: multi-index -> coefficient maps."""
    doc = {
        "num_vars": NUM_VARS,
        "degree": cs.p,
        "polys": [
            {
                "name": q.name,
                "offset": q.offset,
                "terms": {",".join(map(str, t)): a for t, a in q.coeffs.items()},
            }
            for q in cs.polys
        ],
    }
    return json.dumps(doc, indent=1)


def polys_from_json(text: str) -> list:
    doc = json.loads(text)
    out = []
    for entry in doc["polys"]:
        coeffs = {
            tuple(int(s) for s in key.split(",")): a
            for key, a in entry["terms"].items()
        }
        out.append(PolyConstraint(name=entry["name"], coeffs=coeffs, offset=entry["offset"]))
    return out
