"""Dense/banded linear algebra, polynomial tools, and stencil weights."""

import numpy as np
import pytest

from imexglm.matkit import (
    BandedMatrix,
    RootFindingError,
    SingularMatrixError,
    banded_lu,
    banded_solve,
    char_poly,
    determinant,
    fd_weights,
    lu_solve,
    poly_eval,
    poly_mul,
    poly_roots,
    poly_trim,
)


def test_lu_solve_matches_reference():
    rng = np.random.default_rng(11)
    for n in (1, 2, 5, 9):
        a = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        x = lu_solve(a, b)
        assert np.allclose(a @ x, b, atol=1e-12)


def test_lu_solve_complex():
    a = np.array([[1.0 + 1j, 2.0], [0.5, -1.0j]])
    b = np.array([1.0, 1.0j])
    x = lu_solve(a, b)
    assert np.allclose(a @ x, b, atol=1e-13)


def test_lu_solve_singular_raises():
    with pytest.raises(SingularMatrixError):
        lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_lu_solve_shape_errors():
    with pytest.raises(ValueError):
        lu_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        lu_solve(np.eye(2), np.ones(3))


def test_determinant_known_values():
    assert determinant(np.array([[3.0]])) == pytest.approx(3.0)
    assert determinant(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(-2.0)
    assert determinant(np.eye(6)) == pytest.approx(1.0)


def test_determinant_multiplicative():
    """det(AB) = det(A) det(B) on random matrices."""
    rng = np.random.default_rng(5)
    for n in (2, 3, 5):
        for _ in range(20):
            a = rng.standard_normal((n, n))
            b = rng.standard_normal((n, n))
            lhs = determinant(a @ b)
            rhs = determinant(a) * determinant(b)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_determinant_complex_multiplicative():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert determinant(a @ b) == pytest.approx(determinant(a) * determinant(b), rel=1e-9)


def test_char_poly_identity():
    # det(wI - I) = (w - 1)^2
    assert np.allclose(char_poly(np.eye(2)), [1.0, -2.0, 1.0])


def test_char_poly_vanishes_at_eigenvalues():
    rng = np.random.default_rng(13)
    m = rng.standard_normal((5, 5))
    coeffs = char_poly(m)
    assert coeffs[-1] == pytest.approx(1.0)
    for lam in np.linalg.eigvals(m):
        assert abs(poly_eval(coeffs.astype(complex), lam)) < 1e-8 * max(
            1.0, np.max(np.abs(coeffs))
        )


def test_char_poly_constant_term_is_det_sign():
    rng = np.random.default_rng(14)
    m = rng.standard_normal((4, 4))
    coeffs = char_poly(m)
    # det(wI - M) at w=0 equals det(-M) = (-1)^n det(M)
    assert coeffs[0] == pytest.approx(determinant(m), rel=1e-10)


def test_poly_mul_and_eval():
    a = np.array([1.0, 1.0])   # 1 + w
    b = np.array([-2.0, 0.0, 1.0])  # w^2 - 2
    prod = poly_mul(a, b)
    for w in (-1.5, 0.0, 2.0):
        assert poly_eval(prod, w) == pytest.approx(poly_eval(a, w) * poly_eval(b, w))


def test_poly_trim_drops_tiny_leading():
    out = poly_trim(np.array([1.0, 2.0, 1e-18]))
    assert out.size == 2


def test_poly_roots_quadratic():
    roots = np.sort_complex(poly_roots(np.array([2.0, -3.0, 1.0])))
    assert np.allclose(roots, [1.0, 2.0], atol=1e-12)


def test_poly_roots_random_reconstruction():
    """Roots reproduce the polynomial through its factorization."""
    rng = np.random.default_rng(21)
    for deg in (3, 6, 10):
        true = rng.standard_normal(deg) + 1j * rng.standard_normal(deg)
        coeffs = np.array([1.0 + 0j])
        for r in true:
            coeffs = poly_mul(coeffs, np.array([-r, 1.0]))
        got = poly_roots(coeffs)
        assert got.size == deg
        # match each true root to the closest computed one
        for r in true:
            assert np.min(np.abs(got - r)) < 1e-7


def test_poly_roots_rejects_degree_zero():
    with pytest.raises(ValueError):
        poly_roots(np.array([1.0]))


def test_banded_roundtrip_and_matvec():
    rng = np.random.default_rng(31)
    n, kl, ku = 12, 2, 3
    dense = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - kl), min(n, i + ku + 1)):
            dense[i, j] = rng.standard_normal()
    bm = BandedMatrix.from_dense(dense, kl, ku)
    assert np.allclose(bm.to_dense(), dense)
    x = rng.standard_normal(n)
    assert np.allclose(bm.matvec(x), dense @ x, atol=1e-12)


def test_banded_scaled_shifted():
    rng = np.random.default_rng(32)
    dense = np.diag(rng.standard_normal(6))
    dense += np.diag(rng.standard_normal(5), -1)
    bm = BandedMatrix.from_dense(dense, 1, 0)
    out = bm.scaled_shifted(-2.0, 1.0)
    assert np.allclose(out.to_dense(), np.eye(6) - 2.0 * dense)


def test_banded_lu_solves():
    rng = np.random.default_rng(33)
    n, kl, ku = 20, 3, 2
    dense = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - kl), min(n, i + ku + 1)):
            dense[i, j] = rng.standard_normal()
    dense += 8.0 * np.eye(n)
    fac = banded_lu(BandedMatrix.from_dense(dense, kl, ku))
    b = rng.standard_normal(n)
    x = banded_solve(fac, b)
    assert np.allclose(dense @ x, b, atol=1e-10)


def test_banded_lu_singular_raises():
    bm = BandedMatrix.zeros(4, 1, 1)
    with pytest.raises(SingularMatrixError):
        banded_lu(bm)


def test_banded_lu_type_errors():
    with pytest.raises(TypeError):
        banded_lu(np.eye(3))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_fd_weights_exact_on_polynomials(k):
    """A stencil of n nodes differentiates degree n-1 exactly at 0."""
    rng = np.random.default_rng(41)
    nodes = np.sort(rng.uniform(-2, 2, 7))
    nodes += np.linspace(0, 1e-3, 7)  # ensure distinct
    w = fd_weights(nodes, k)
    for deg in range(nodes.size):
        coeffs = rng.standard_normal(deg + 1)
        vals = np.array([poly_eval(coeffs, x) for x in nodes])
        # k-th derivative of the polynomial at 0
        d = coeffs.copy()
        for _ in range(k):
            d = d[1:] * np.arange(1, d.size)
        truth = poly_eval(d, 0.0) if d.size else 0.0
        assert w @ vals == pytest.approx(truth, rel=1e-8, abs=1e-8)


def test_fd_weights_second_derivative_central():
    w = fd_weights(np.array([-1.0, 0.0, 1.0]), 2)
    assert np.allclose(w, [1.0, -2.0, 1.0])


def test_fd_weights_errors():
    with pytest.raises(ValueError):
        fd_weights(np.array([0.0, 1.0]), 2)
    with pytest.raises(ValueError):
        fd_weights(np.array([0.0, 0.0, 1.0]), 1)
