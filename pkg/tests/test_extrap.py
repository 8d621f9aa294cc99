"""Extrapolation coefficients and the paired implicit-explicit scheme."""

import numpy as np
import pytest

from imexglm.catalogue import dimsim2, dimsim3, dimsim4, theta_method
from imexglm.extrap import (
    ImexScheme,
    beta_entries,
    beta_matrix,
    explicit_two_step_glm,
    interpolation_residual,
    make_coeffs,
    scheme_from_beta,
    solve_alpha,
)
from imexglm.glm import order_residual, stage_order_residual

RNG = np.random.default_rng(19)


def test_beta_matrix_layout():
    b = beta_matrix(3, [1.0, 2.0, 3.0])
    assert np.allclose(b, [[0, 0, 0], [1, 0, 0], [2, 3, 0]])
    assert np.allclose(beta_entries(b), [1.0, 2.0, 3.0])
    assert np.allclose(beta_matrix(2), np.zeros((2, 2)))


def test_beta_matrix_count_validation():
    with pytest.raises(ValueError):
        beta_matrix(3, [1.0, 2.0])


@pytest.mark.parametrize("make,n_beta", [
    (lambda: theta_method(0.8), 0),
    (lambda: dimsim2(0.3), 1),
    (dimsim3, 3),
    (dimsim4, 6),
])
def test_prediction_exact_on_polynomials(make, n_beta):
    """alpha solves make the stage prediction exact for degree < p.

    The defining property: values of any polynomial of degree <= p-1
    at the previous-step abscissae c-1 (weights alpha) plus the known
    current stages (weights beta) reproduce the remaining current
    values exactly, for every beta.
    """
    tab = make()
    for _ in range(10):
        beta = RNG.uniform(-2, 2, n_beta)
        coeffs = make_coeffs(beta, tab.c, tab.p)
        assert interpolation_residual(coeffs, tab.c) < 1e-12
        for deg in range(tab.p):
            poly = RNG.standard_normal(deg + 1)
            prev = np.array([np.polyval(poly[::-1], ci - 1.0) for ci in tab.c])
            cur = np.array([np.polyval(poly[::-1], ci) for ci in tab.c])
            pred = coeffs.alpha @ prev + coeffs.beta @ cur
            assert np.max(np.abs(pred - cur)) < 1e-10 * max(1.0, np.max(np.abs(cur)))


def test_alpha_row_sums():
    """Row sums of alpha plus beta equal one (consistency weights)."""
    for make, n_beta in ((lambda: dimsim2(0.4), 1), (dimsim3, 3), (dimsim4, 6)):
        tab = make()
        for _ in range(20):
            beta = RNG.uniform(-3, 3, n_beta)
            coeffs = make_coeffs(beta, tab.c, tab.p)
            sums = coeffs.alpha @ np.ones(tab.s) + coeffs.beta @ np.ones(tab.s)
            assert np.max(np.abs(sums - 1.0)) < 1e-11


def test_solve_alpha_closed_form_two_stage():
    tab = dimsim2(0.3)
    for _ in range(10):
        b21 = float(RNG.uniform(-4, 8))
        alpha = solve_alpha(beta_matrix(2, [b21]), tab.c, tab.p)
        assert np.allclose(alpha, [[0.0, 1.0], [-1.0, 2.0 - b21]], atol=1e-12)


def test_scheme_assembly_shapes_and_triangularity():
    tab = dimsim3()
    scheme = scheme_from_beta(tab, np.array([1.39, -0.146, 1.24]))
    assert scheme.abar.shape == (3, 3)
    assert np.allclose(scheme.astar, np.tril(scheme.astar, -1))
    assert np.allclose(scheme.bstar[:, -1], 0.0)
    assert np.allclose(scheme.beta_flat, [1.39, -0.146, 1.24])


def test_scheme_zero_beta_default():
    tab = dimsim2(0.3)
    scheme = scheme_from_beta(tab, None)
    assert np.allclose(scheme.astar, 0.0)
    assert np.allclose(scheme.bstar, 0.0)
    assert np.allclose(scheme.abar, tab.A @ scheme.coeffs.alpha)


def test_scheme_rejects_mismatched_coeffs():
    tab = dimsim2(0.3)
    good = make_coeffs(np.array([1.0]), tab.c, tab.p)
    other = dimsim3()
    with pytest.raises(ValueError):
        ImexScheme(base=other, coeffs=good)


def test_explicit_partner_order():
    """The explicit partner is itself a method of the same order.

    Its tableau must satisfy the stage-order and order conditions up
    to p with the doubled external space.
    """
    for make, beta in (
        (lambda: dimsim2((2 - np.sqrt(2)) / 2), np.array([4.64])),
        (dimsim3, np.array([1.13, 1.45, -0.158])),
    ):
        scheme = scheme_from_beta(make(), beta)
        two = explicit_two_step_glm(scheme)
        assert two.s == scheme.s
        for k in range(two.q + 1):
            assert np.max(np.abs(stage_order_residual(two, k))) < 1e-9
        for k in range(two.p + 1):
            assert np.max(np.abs(order_residual(two, k))) < 1e-9


def test_explicit_partner_is_explicit():
    scheme = scheme_from_beta(dimsim2(0.3), np.array([2.0]))
    two = explicit_two_step_glm(scheme)
    assert np.allclose(two.A, np.tril(two.A, -1))
