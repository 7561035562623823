import numpy as np
import pytest

from visgov.trig import (
    TABULATED_KC,
    TABULATED_KS,
    TrigApprox,
    compute_delta_max,
    remez_minimax,
    trig_approx,
)


def relative_error_extrema(coeffs, target_fn, b, parity, n=400_001):
    """Alternation points of the relative error on [0, b], by direct scan."""
    psi = np.linspace(0.0, b, n)[1:-1]
    fit = np.zeros_like(psi)
    powers = range(1, 2 * len(coeffs) + 1, 2) if parity == "odd" else range(0, 2 * len(coeffs), 2)
    for c, p in zip(coeffs, powers):
        fit += c * psi**p
    err = fit / target_fn(psi) - 1.0
    m = np.max(np.abs(err))
    d = np.diff(err)
    idx = [0] + [j for j in range(1, len(d)) if d[j - 1] * d[j] <= 0] + [len(err) - 1]
    pts = [(psi[j], err[j]) for j in sorted(set(idx)) if abs(err[j]) >= 0.995 * m]
    return m, pts


def test_cos_reproduces_tabulated_coefficients():
    kc, err = remez_minimax("cos", 2, "even")
    assert kc == pytest.approx(TABULATED_KC, abs=1e-4)
    # closed form of the relative minimax level for this fit
    assert err == pytest.approx((4 - np.pi) / (4 + np.pi), abs=1e-6)


def test_sin_reproduces_tabulated_coefficients():
    ks, err = remez_minimax("sin", 3, "odd")
    assert ks == pytest.approx(TABULATED_KS, abs=1e-4)
    assert 0.005 < err < 0.01


def test_linear_sin_fit_tends_to_taylor():
    ks, err = remez_minimax("sin", 1, "odd", interval=(-1e-3, 1e-3))
    assert ks[0] == pytest.approx(1.0, abs=1e-6)
    assert err < 1e-6


def test_equioscillation_counts():
    # sin fit: 3 alternating extrema of the relative error on the half domain
    ks, E = remez_minimax("sin", 3, "odd")
    m, pts = relative_error_extrema(ks, np.sin, np.pi / 2, "odd")
    assert m == pytest.approx(E, rel=1e-6)
    signs = [np.sign(e) for _, e in pts]
    assert len(signs) >= 3
    assert all(signs[i] != signs[i + 1] for i in range(len(signs) - 1))

    # cos fit: the edge is an interpolation point (fit vanishes with the
    # target), so the error attains its level at 2 interior-side extrema
    # and as a limit at the edge
    kc, E = remez_minimax("cos", 2, "even")
    assert kc[0] + kc[1] * (np.pi / 2) ** 2 == pytest.approx(0.0, abs=1e-9)
    m, pts = relative_error_extrema(kc, np.cos, np.pi / 2, "even")
    assert m == pytest.approx(E, rel=1e-4)
    signs = [np.sign(e) for _, e in pts]
    assert len(signs) >= 2
    assert all(signs[i] != signs[i + 1] for i in range(len(signs) - 1))


def test_remez_input_validation():
    with pytest.raises(ValueError):
        remez_minimax("cos", 2, "even", interval=(-1.0, 2.0))
    with pytest.raises(ValueError):
        remez_minimax("sin", 0, "odd")
    with pytest.raises(ValueError):
        remez_minimax("sin", 3, "even")
    with pytest.raises(ValueError):
        remez_minimax("tan", 2, "even")


def test_delta_max_degenerate_and_exact_cases():
    zero = TrigApprox(ks=(0.0,), kc=(0.0,), domain=(-np.pi / 2, np.pi / 2), delta_max=1.0)
    assert compute_delta_max(zero) == pytest.approx(1.0, abs=1e-12)

    # truncated power series of sin (deg 9) and cos (deg 8): the defect is
    # dominated by the series tails, far below any low-degree fit
    taylor = TrigApprox(
        ks=(1.0, -1 / 6, 1 / 120, -1 / 5040, 1 / 362880),
        kc=(1.0, -1 / 2, 1 / 24, -1 / 720, 1 / 40320),
        domain=(-np.pi / 2, np.pi / 2),
        delta_max=0.0,
    )
    d = compute_delta_max(taylor)
    assert 0.0 < d < 1e-3


def test_delta_max_of_default_pair():
    ap = trig_approx("table")
    # the defect is largest at psi=0 where fc alone carries the magnitude:
    # |0.8798^2 - 1| = 0.22595; the edge defect is two orders smaller
    assert ap.delta_max == pytest.approx(0.2259519, abs=1e-6)
    assert abs(ap.defect(0.0)) == pytest.approx(ap.delta_max, abs=1e-12)
    assert ap.edge_defect() == pytest.approx(0.014255, abs=1e-5)
    assert ap.delta_max < 1.0


def test_trig_approx_sources_agree():
    tab = trig_approx("table")
    fit = trig_approx("remez")
    assert np.allclose(tab.ks, fit.ks, atol=1e-4)
    assert np.allclose(tab.kc, fit.kc, atol=1e-4)
    psi = np.linspace(-np.pi / 2, np.pi / 2, 101)
    assert np.allclose(tab.fs(psi), np.sin(psi), atol=0.012)
    assert np.allclose(tab.fc(psi), np.cos(psi), atol=0.13)
    with pytest.raises(ValueError):
        trig_approx("exact")


def test_eval_shapes():
    ap = trig_approx("table")
    assert np.isscalar(float(ap.fs(0.3)))
    out = ap.fc(np.zeros((2, 3)))
    assert out.shape == (2, 3)
    assert np.allclose(out, TABULATED_KC[0])
