"""Minimax polynomial approximations of sine and cosine.

The yaw rotation inside the visibility constraints is replaced by low
degree polynomials so the constraints stay polynomial in the state. The
fits minimize the worst-case RELATIVE error on the yaw domain, which is
what reproduces the tabulated default coefficients; for the cosine that
forces an exact zero at the domain edge where the target vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

# 4-decimal tabulated defaults for the quadratic/cubic pair on [-pi/2, pi/2];
# remez_minimax reproduces them to ~3e-5.
TABULATED_KC = (0.8798, -0.3566)
TABULATED_KS = (0.9928, -0.1462)

_GRID = 200_001


@dataclass(frozen=True)
class TrigApprox:
    """Polynomial sine/cosine pair on a symmetric domain.

    Attributes
    ----------
    ks : tuple
        Sine coefficients for odd powers: f_s = ks[0] psi + ks[1] psi^3 + ...
    kc : tuple
        Cosine coefficients for even powers: f_c = kc[0] + kc[1] psi^2 + ...
    domain : tuple
        (a, b) with a = -b.
    delta_max : float
        max |f_s^2 + f_c^2 - 1| over the domain.
    """

    ks: tuple
    kc: tuple
    domain: tuple
    delta_max: float

    def fs(self, psi):
        psi = np.asarray(psi, dtype=float)
        u = psi * psi
        acc = np.zeros_like(u)
        for c in reversed(self.ks):
            acc = acc * u + c
        return acc * psi

    def fc(self, psi):
        psi = np.asarray(psi, dtype=float)
        u = psi * psi
        acc = np.zeros_like(u)
        for c in reversed(self.kc):
            acc = acc * u + c
        return acc

    def defect(self, psi):
        """Pythagorean defect f_s^2 + f_c^2 - 1 at psi."""
        return self.fs(psi) ** 2 + self.fc(psi) ** 2 - 1.0

    def edge_defect(self) -> float:
        """|defect| at the domain edge."""
        return float(abs(self.defect(self.domain[1])))


def _targets(name: str):
    # g(u) with u = psi^2 such that the fit is p(u) (even) or psi*p(u) (odd)
    if name == "cos":
        return lambda u: np.cos(np.sqrt(u))
    if name == "sin":
        return lambda u: np.sinc(np.sqrt(u) / np.pi)
    raise ValueError(f"unknown target {name!r}; expected 'sin' or 'cos'")


def remez_minimax(target: str, degree: int, parity: str, interval=(-np.pi / 2, np.pi / 2)):
    """Minimax relative-error fit of sin or cos by an odd or even polynomial.

    Parameters
    ----------
    target : {'sin', 'cos'}
    degree : int
        Highest power of psi in the fit, >= 1.
    parity : {'odd', 'even'}
        Must match the target's symmetry.
    interval : tuple
        Symmetric domain (-b, b).

    Returns
    -------
    coeffs : tuple
        Coefficients on psi^1, psi^3, ... (odd) or psi^0, psi^2, ... (even).
    max_err : float
        Achieved maximum relative error on the interval.

    Raises
    ------
    ValueError
        On parity mismatch, asymmetric interval, or bad degree.
    RuntimeError
        If the exchange iteration fails to settle.
    """
    a, b = float(interval[0]), float(interval[1])
    if not np.isclose(a, -b) or b <= 0:
        raise ValueError("interval must be symmetric about 0")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if (target, parity) not in (("sin", "odd"), ("cos", "even")):
        raise ValueError(f"parity {parity!r} does not match target {target!r}")

    g = _targets(target)
    # work in u = psi^2; the fit is a degree-q polynomial in u
    q = (degree - 1) // 2 if parity == "odd" else degree // 2
    B = b * b
    grid = np.linspace(0.0, B, _GRID)
    gv = g(grid)

    # a vanishing target at the edge forces interpolation there and
    # consumes one alternation point
    pinned = abs(gv[-1]) < 1e-12
    n_alt = q + 1 if pinned else q + 2
    refs = np.linspace(0.0, B * (1 - 1e-4) if pinned else B, n_alt)

    coeffs = np.zeros(q + 1)
    E = 0.0
    for _ in range(60):
        # solve for coefficients and signed level E on the reference set
        rows, rhs = [], []
        for j, u in enumerate(refs):
            s = (-1.0) ** j
            rows.append([u**i for i in range(q + 1)] + [-s * g(u)])
            rhs.append(g(u))
        if pinned:
            rows.append([B**i for i in range(q + 1)] + [0.0])
            rhs.append(0.0)
        sol = np.linalg.solve(np.array(rows), np.array(rhs))
        coeffs, E = sol[:-1], sol[-1]

        pv = np.zeros_like(grid)
        for c in coeffs[::-1]:
            pv = pv * grid + c
        with np.errstate(divide="ignore", invalid="ignore"):
            err = pv / gv - 1.0
        # ignore points where the target vanishes; the fit interpolates there
        err[(~np.isfinite(err)) | (np.abs(gv) < 1e-12)] = 0.0

        # local extrema of the error curve
        d = np.diff(err)
        idx = [0]
        idx += [j for j in range(1, len(d)) if d[j - 1] * d[j] <= 0.0]
        idx.append(len(grid) - 1)
        if pinned:
            idx = [j for j in idx if j < len(grid) - 1]
        idx = sorted(set(idx), key=lambda j: -abs(err[j]))[: n_alt]
        new_refs = np.sort(grid[idx])
        if len(new_refs) < n_alt:
            raise RuntimeError(
                f"exchange found only {len(new_refs)} extrema; last level {E:.3e}"
            )
        if np.allclose(new_refs, refs, atol=(grid[1] - grid[0]) / 2):
            refs = new_refs
            break
        refs = new_refs
    else:
        raise RuntimeError(f"exchange did not settle in 60 iterations; last level {E:.3e}")

    max_err = float(np.max(np.abs(err)))
    return tuple(float(c) for c in coeffs), max_err


def compute_delta_max(approx: TrigApprox) -> float:
    """Tight maximum of |f_s^2 + f_c^2 - 1| over the approximation domain.

    Dense grid followed by bounded local refinement around the argmax.
    """
    a, b = approx.domain
    psi = np.linspace(a, b, 1_000_001)
    vals = np.abs(approx.defect(psi))
    j = int(np.argmax(vals))
    lo = psi[max(j - 1, 0)]
    hi = psi[min(j + 1, len(psi) - 1)]
    res = minimize_scalar(
        lambda s: -abs(approx.defect(s)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(max(vals[j], -res.fun))


def trig_approx(source: str = "remez", domain=(-np.pi / 2, np.pi / 2)) -> TrigApprox:
    """Build the default quadratic-cosine / cubic-sine approximation pair.

    Parameters
    ----------
    source : {'remez', 'table'}
        'remez' fits the coefficients; 'table' uses the 4-decimal
        tabulated defaults (only valid on the default domain).
    """
    if source == "table":
        if not np.isclose(domain[1], np.pi / 2):
            raise ValueError("tabulated coefficients are for [-pi/2, pi/2] only")
        ks, kc = TABULATED_KS, TABULATED_KC
    elif source == "remez":
        kc, _ = remez_minimax("cos", 2, "even", domain)
        ks, _ = remez_minimax("sin", 3, "odd", domain)
    else:
        raise ValueError(f"unknown source {source!r}")
    probe = TrigApprox(ks=tuple(ks), kc=tuple(kc), domain=tuple(domain), delta_max=0.0)
    return TrigApprox(
        ks=tuple(ks),
        kc=tuple(kc),
        domain=tuple(domain),
        delta_max=compute_delta_max(probe),
    )
