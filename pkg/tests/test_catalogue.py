"""Built-in method families: structure, order, and damping checks."""

import time

import numpy as np
import pytest

from imexglm.catalogue import (
    FAMILIES,
    dimsim2,
    dimsim3,
    dimsim4,
    get_method,
    theta_method,
)
from imexglm.glm import glm_stability_matrix, order_residual, stage_order_residual
from imexglm.matkit import char_poly

ALL_TABS = [
    theta_method(0.5),
    theta_method(2.0 / 3.0),
    theta_method(0.75),
    theta_method(1.0),
    dimsim2(0.25),
    dimsim2((2.0 - np.sqrt(2.0)) / 2.0),
    dimsim2(0.3),
    dimsim3(),
    dimsim4(),
]


@pytest.mark.parametrize("tab", ALL_TABS, ids=lambda t: t.name)
def test_order_and_stage_order(tab):
    for k in range(tab.q + 1):
        assert np.max(np.abs(stage_order_residual(tab, k))) <= 1e-8
    for k in range(tab.p + 1):
        assert np.max(np.abs(order_residual(tab, k))) <= 1e-8


def test_structure_invariants():
    for tab in ALL_TABS:
        s = tab.s
        assert tab.p == tab.q == tab.r == s or tab.name.startswith("theta")
        # constant diagonal
        d = np.diag(tab.A)
        assert np.max(np.abs(d - d[0])) < 1e-14
        # strictly lower below the diagonal
        assert np.allclose(tab.A, np.tril(tab.A))
        # rank-one V with row sums one
        sv = np.linalg.svd(tab.V, compute_uv=False)
        if sv[0] > 0 and sv.size > 1:
            assert sv[1] / sv[0] < 1e-7
        assert np.allclose(tab.V @ np.ones(tab.r), np.ones(tab.r), atol=1e-13)


def test_dimsim2_closed_form_blocks():
    lam = 0.3
    tab = dimsim2(lam)
    assert np.allclose(tab.A, [[lam, 0.0], [2.0 / (1.0 + 2.0 * lam), lam]])
    assert np.allclose(tab.U, np.eye(2))
    assert np.allclose(tab.V[0], [0.5 + lam, 0.5 - lam])
    q1 = np.array([-lam, (-2 * lam**2 + lam - 1) / (2 * lam + 1)])
    q2 = np.array([0.0, (1 - 2 * lam) / 2.0])
    assert np.max(np.abs(tab.qvecs[1] - q1)) < 1e-13
    assert np.max(np.abs(tab.qvecs[2] - q2)) < 1e-13


@pytest.mark.parametrize("lam", [(2.0 - np.sqrt(2.0)) / 2.0, (2.0 + np.sqrt(2.0)) / 2.0])
def test_dimsim2_strong_damping(lam):
    """At the damping-optimal diagonal the stiff limit annihilates."""
    tab = dimsim2(lam)
    S = glm_stability_matrix(tab, -1e8)
    assert np.max(np.abs(np.linalg.eigvals(S))) <= 1e-6


@pytest.mark.parametrize("make", [dimsim3, dimsim4], ids=["dimsim3", "dimsim4"])
def test_high_order_stiff_damping(make):
    """Damping at z -> -inf for the refined three- and four-stage methods.

    The limit matrix has a single structurally nonzero eigenvalue (the
    rest form a defective zero cluster whose numerical eigenvalues
    scatter like eps**(1/s)), so the sharp probe is the trace plus the
    k-th power collapse, with a loose eigenvalue sanity cap.
    """
    tab = make()
    S = np.asarray(glm_stability_matrix(tab, -1e8))
    assert abs(np.trace(S)) <= 1e-6
    powered = np.linalg.matrix_power(S, tab.s)
    assert np.linalg.norm(powered, np.inf) <= 1e-5 * max(1.0, np.linalg.norm(S, np.inf) ** tab.s)
    assert np.max(np.abs(np.linalg.eigvals(S))) <= 5e-3


@pytest.mark.parametrize("make,lam_poly", [
    (dimsim3, None),
    (dimsim4, None),
], ids=["dimsim3", "dimsim4"])
def test_high_order_runge_kutta_structure(make, lam_poly):
    """det(wI - S(z))*(1-lam*z)^s has a single nonzero w-root for all z.

    Sampled as: the coefficients of w^k for k <= s-2 of the scaled
    characteristic polynomial vanish identically in z.  Checked on a
    z grid with a defect tolerance matching the construction guard.
    """
    tab = make()
    s = tab.s
    lam = tab.A[0, 0]
    worst = 0.0
    for z in np.linspace(-2.0, 0.0, 2 * s + 1):
        S = glm_stability_matrix(tab, z)
        coeffs = char_poly(S) * (1.0 - lam * z) ** s  # ascending in w
        worst = max(worst, float(np.max(np.abs(coeffs[: s - 1]))))
    assert worst <= 1e-9


def test_theta_validation():
    with pytest.raises(ValueError):
        theta_method(-0.1)
    with pytest.raises(ValueError):
        theta_method(1.5)


def test_dimsim2_validation():
    with pytest.raises(ValueError):
        dimsim2(0.0)
    with pytest.raises(ValueError):
        dimsim2(-1.0)


def test_get_method_dispatch():
    assert get_method("theta", 0.5).name == "theta(0.5)"
    assert get_method("dimsim3").p == 3
    with pytest.raises(ValueError):
        get_method("nope")
    with pytest.raises(ValueError):
        get_method("dimsim3", 0.5)


def test_family_metadata():
    assert FAMILIES["theta"].a_stable(0.5) and not FAMILIES["theta"].a_stable(0.4)
    assert FAMILIES["dimsim2"].a_stable(0.25) and not FAMILIES["dimsim2"].a_stable(0.2)
    assert FAMILIES["dimsim2"].l_stable((2.0 - np.sqrt(2.0)) / 2.0)
    assert not FAMILIES["dimsim2"].l_stable(0.3)
    for fid, fam in FAMILIES.items():
        assert fam.order == get_method(fid).p
        assert fam.n_beta == fam.stages * (fam.stages - 1) // 2


def test_construction_is_fast():
    t0 = time.time()
    dimsim3()
    dimsim4()
    assert time.time() - t0 < 2.0
