"""Tableau container, order-condition residuals, and JSON round trips."""

import numpy as np
import pytest

from imexglm.catalogue import dimsim2, theta_method
from imexglm.glm import (
    GlmTableau,
    build_B,
    glm_stability_matrix,
    order_residual,
    stage_order_residual,
    tableau_from_json,
    tableau_to_json,
)


def _euler_tableau():
    """Forward Euler in one-stage, one-value form (order 1)."""
    return GlmTableau(
        c=np.array([0.0]),
        A=np.array([[0.0]]),
        U=np.ones((1, 1)),
        B=np.ones((1, 1)),
        V=np.ones((1, 1)),
        qvecs=np.array([[1.0], [0.0]]),
        p=1,
        q=1,
        name="euler",
    )


def test_tableau_shape_validation():
    with pytest.raises(ValueError):
        GlmTableau(
            c=np.array([0.0, 1.0]),
            A=np.zeros((2, 2)),
            U=np.eye(2),
            B=np.zeros((3, 2)),
            V=np.eye(2),
            qvecs=np.zeros((2, 2)),
            p=1,
            q=1,
        )


def test_tableau_rejects_upper_triangular_A():
    with pytest.raises(ValueError):
        GlmTableau(
            c=np.array([0.0, 1.0]),
            A=np.array([[0.5, 0.1], [0.0, 0.5]]),
            U=np.eye(2),
            B=np.zeros((2, 2)),
            V=np.eye(2),
            qvecs=np.zeros((2, 2)),
            p=1,
            q=1,
        )


def test_euler_order_conditions():
    tab = _euler_tableau()
    for k in range(tab.q + 1):
        assert np.max(np.abs(stage_order_residual(tab, k))) < 1e-14
    for k in range(tab.p + 1):
        assert np.max(np.abs(order_residual(tab, k))) < 1e-14


def test_residuals_detect_broken_tableau():
    tab = _euler_tableau()
    bad = GlmTableau(
        c=tab.c,
        A=tab.A + 1e-3,
        U=tab.U,
        B=tab.B,
        V=tab.V,
        qvecs=tab.qvecs,
        p=tab.p,
        q=tab.q,
    )
    assert np.max(np.abs(stage_order_residual(bad, 1))) > 5e-4


@pytest.mark.parametrize("lam", [0.25, 0.3, 0.5])
def test_build_B_matches_closed_form(lam):
    """B reproduces the closed-form weights of the two-stage family."""
    A = np.array([[lam, 0.0], [2.0 / (1.0 + 2.0 * lam), lam]])
    v = np.array([0.5 + lam, 0.5 - lam])
    V = np.outer(np.ones(2), v)
    c = np.array([0.0, 1.0])
    B = build_B(A, V, c)
    den = 4.0 * (2.0 * lam + 1.0)
    expected = np.array(
        [
            [(8 * lam**3 + 12 * lam**2 - 2 * lam + 5) / den, (1 - 4 * lam**2) / 4.0],
            [
                (8 * lam**3 + 20 * lam**2 - 2 * lam + 3) / den,
                (-8 * lam**3 - 12 * lam**2 + 10 * lam - 1) / den,
            ],
        ]
    )
    assert np.max(np.abs(B - expected)) < 1e-13


def test_build_B_quadrature_oracle():
    """The update weights integrate exactly through degree p.

    For y' = q(t) with polynomial q of degree <= p-1 the one-step
    update from exact inputs must produce the exact solution values;
    this pins B independently of any printed coefficients.
    """
    rng = np.random.default_rng(3)
    lam = 0.31
    tab = dimsim2(lam)
    for _ in range(5):
        coeffs = rng.standard_normal(tab.p)  # derivative polynomial

        def deriv(t):
            return sum(cc * t**k for k, cc in enumerate(coeffs))

        def soln(t):
            return sum(cc * t ** (k + 1) / (k + 1) for k, cc in enumerate(coeffs))

        h = 0.7
        # external inputs: y_i = sum_k qvecs[k, i] h^k y^(k)(0)
        derivs = [soln(0.0), deriv(0.0)]
        d = coeffs.copy()
        d = d[1:] * np.arange(1, d.size)
        derivs.append(sum(cc * 0.0**k for k, cc in enumerate(d)) if d.size else 0.0)
        y_in = np.array(
            [sum(tab.qvecs[k, i] * h**k * derivs[k] for k in range(tab.p + 1))
             for i in range(tab.r)]
        )
        f_stages = np.array([deriv(h * ci) for ci in tab.c])
        y_out = h * (tab.B @ f_stages) + tab.V @ y_in
        expected = np.array(
            [sum(tab.qvecs[k, i] * h**k * nd for k, nd in enumerate(
                [soln(h), deriv(h), (d @ h ** np.arange(d.size)) if d.size else 0.0]))
             for i in range(tab.r)]
        )
        assert np.max(np.abs(y_out - expected)) < 1e-12


def test_stability_matrix_theta():
    """One linear step equals multiplication by the stability matrix."""
    tab = theta_method(0.6)
    z = -0.8 + 0.3j
    S = glm_stability_matrix(tab, z)
    # theta method: y_{n+1} = y_n (1 + z) / (1 - theta z) ... via stage elimination
    stage = 1.0 / (1.0 - 0.6 * z)
    expected = 1.0 + z * stage
    assert S.shape == (1, 1)
    assert abs(S[0, 0] - expected) < 1e-14


def test_stability_matrix_spectral_radius_at_origin():
    tab = dimsim2(0.3)
    S = glm_stability_matrix(tab, 0.0)
    # at z=0 the stability matrix is V, whose spectrum is {1, 0}
    vals = np.sort(np.abs(np.linalg.eigvals(S)))
    assert np.allclose(vals, [0.0, 1.0], atol=1e-12)


def test_json_round_trip():
    tab = dimsim2(0.29)
    text = tableau_to_json(tab)
    back = tableau_from_json(text)
    for name in ("c", "A", "U", "B", "V", "qvecs"):
        assert np.array_equal(getattr(tab, name), getattr(back, name))
    assert back.p == tab.p and back.q == tab.q and back.name == tab.name


def test_json_rejects_garbage():
    with pytest.raises(ValueError):
        tableau_from_json("{\"c\": [0.0]}")
