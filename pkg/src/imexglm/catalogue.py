"""Catalogue of built-in time-stepping methods.

Four families are provided: the one-stage theta method of order 1 and
diagonally implicit multistage methods with two, three, and four
stages of orders 2, 3, and 4.  For every family the stage count s,
the external vector count r, the order p, and the stage order q
coincide, the implicit coefficient matrix A is lower triangular with
a constant diagonal lam, U is the identity, V has rank one, and the
external vectors carry the solution and its scaled derivatives.

The two-stage family is closed form in lam.  The three- and
four-stage constructions start from eight-digit seed coefficients
stored below; the diagonal parameter is re-solved from its defining
polynomial by Newton iteration, and the off-diagonal entries of A
together with the rank-one generator v of V are then polished by a
Gauss-Newton pass that restores the single-nonzero-eigenvalue
structure of the stability matrix S(z).  That structure is what makes
the damping limit z -> -inf exact, and it is destroyed at the 1e-8
level by coefficient truncation, so the polish is required for the
strong-damping probes to be meaningful.  It moves every seed by less
than 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .glm import GlmTableau, build_B
from .matkit import char_poly, lu_solve, poly_eval

__all__ = [
    "MethodFamily",
    "FAMILIES",
    "theta_method",
    "dimsim2",
    "dimsim3",
    "dimsim4",
    "get_method",
]


def _stage_qvecs(c: np.ndarray, A: np.ndarray, p: int) -> np.ndarray:
    """q-vectors that satisfy the stage order conditions when U = I.

    Row k is (c^k - k A c^(k-1)) / k! with the convention c^0 = e.
    """
    s = c.size
    q = np.zeros((p + 1, s))
    q[0] = 1.0
    fact = 1.0
    for k in range(1, p + 1):
        fact *= k
        q[k] = (c**k - k * (A @ c ** (k - 1))) / fact
    return q


def theta_method(theta: float) -> GlmTableau:
    """One-stage, one-value method of order 1 with implicit weight theta.

    The single stage is Y = y_n + theta*h*F(Y) and the update is
    y_{n+1} = y_n + h*F(Y).  A-stable for theta >= 1/2, L-stable for
    theta > 1/2.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return GlmTableau(
        c=np.array([float(theta)]),
        A=np.array([[float(theta)]]),
        U=np.ones((1, 1)),
        B=np.ones((1, 1)),
        V=np.ones((1, 1)),
        qvecs=np.array([[1.0], [0.0]]),
        p=1,
        q=1,
        name=f"theta({theta:g})",
    )


def dimsim2(lam: float) -> GlmTableau:
    """Two-stage method of order and stage order 2, abscissae [0, 1].

    Closed form in the diagonal parameter lam > 0.  A-stable for
    lam >= 1/4; the damping at z -> -inf is exact for
    lam = (2 +- sqrt(2))/2.
    """
    lam = float(lam)
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    c = np.array([0.0, 1.0])
    A = np.array([[lam, 0.0], [2.0 / (1.0 + 2.0 * lam), lam]])
    v = np.array([0.5 + lam, 0.5 - lam])
    V = np.outer(np.ones(2), v)
    B = build_B(A, V, c)
    return GlmTableau(
        c=c,
        A=A,
        U=np.eye(2),
        B=B,
        V=V,
        qvecs=_stage_qvecs(c, A, 2),
        p=2,
        q=2,
        name=f"dimsim2({lam:.9g})",
    )


def _poly_newton_root(coeffs: np.ndarray, x0: float) -> float:
    """Newton refinement of a simple real root, seeded at x0."""
    dcoeffs = coeffs[1:] * np.arange(1, coeffs.size)
    x = float(x0)
    for _ in range(60):
        step = poly_eval(coeffs, x) / poly_eval(dcoeffs, x)
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def _strict_lower(s: int, flat: np.ndarray) -> np.ndarray:
    """Unpack row-major strictly lower triangular entries."""
    m = np.zeros((s, s))
    k = 0
    for i in range(1, s):
        for j in range(i):
            m[i, j] = flat[k]
            k += 1
    return m


def _rk_defect(x: np.ndarray, c: np.ndarray, lam: float) -> np.ndarray:
    """Residuals that vanish iff S(z) has one nonzero eigenvalue for all z.

    The characteristic polynomial of S(z), cleared of its resolvent
    denominator by the factor (1 - lam*z)^s, has w^k coefficients that
    are polynomials in z of degree at most 2s.  For a method whose
    stability matrix carries a single nonzero eigenvalue, those
    coefficients vanish identically for k = 0..s-2.  Sampling them at
    2s+1 distinct nodes therefore characterizes the property exactly.
    The first residual entry pins sum(v) = 1, which the update matrix
    V = e v^T needs in order to propagate the solution component
    without drift.
    """
    s = c.size
    noff = s * (s - 1) // 2
    A = lam * np.eye(s) + _strict_lower(s, x[:noff])
    v = x[noff:]
    V = np.outer(np.ones(s), v)
    B = build_B(A, V, c)
    eye = np.eye(s)
    out = [np.sum(v) - 1.0]
    kk = np.arange(2 * s + 1)
    nodes = -1.0 + np.cos(np.pi * (2 * kk + 1) / (2.0 * (2 * s + 1)))
    for z in nodes:
        S = V + z * (B @ lu_solve(eye - z * A, eye))
        coeffs = char_poly(S)
        out.extend(coeffs[: s - 1] * (1.0 - lam * z) ** s)
    return np.asarray(out)


def _gauss_newton(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                  iters: int = 20) -> Tuple[np.ndarray, float]:
    """Damped Gauss-Newton with a forward-difference Jacobian."""
    x = np.asarray(x0, dtype=float).copy()
    r = fun(x)
    best_x, best = x.copy(), float(np.linalg.norm(r))
    for _ in range(iters):
        jac = np.empty((r.size, x.size))
        for j in range(x.size):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (fun(xp) - r) / h
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        t = 1.0
        for _ in range(12):
            xn = x + t * step
            rn = fun(xn)
            if np.linalg.norm(rn) < np.linalg.norm(r):
                break
            t *= 0.5
        else:
            break
        x, r = xn, rn
        nr = float(np.linalg.norm(r))
        if nr < best:
            best_x, best = x.copy(), nr
        if nr <= 1e-14:
            break
    return best_x, best


def _refined_dimsim(c: np.ndarray, lam_poly: np.ndarray, lam_seed: float,
                    a_off_seed: np.ndarray, v_seed: np.ndarray,
                    name: str) -> GlmTableau:
    s = c.size
    lam = _poly_newton_root(lam_poly, lam_seed)
    x0 = np.concatenate([a_off_seed, v_seed / np.sum(v_seed)])
    x, defect = _gauss_newton(lambda x: _rk_defect(x, c, lam), x0)
    if defect > 1e-8:
        raise RuntimeError(
            f"{name}: stability-structure refinement stalled at {defect:.3e}")
    rel_drift = np.max(np.abs(x - x0) / np.maximum(1.0, np.abs(x0)))
    if rel_drift > 1e-5:
        raise RuntimeError(f"{name}: refinement drifted from seed values")
    noff = s * (s - 1) // 2
    A = lam * np.eye(s) + _strict_lower(s, x[:noff])
    v = x[noff:]
    v = v / np.sum(v)
    V = np.outer(np.ones(s), v)
    B = build_B(A, V, c)
    return GlmTableau(
        c=c,
        A=A,
        U=np.eye(s),
        B=B,
        V=V,
        qvecs=_stage_qvecs(c, A, s),
        p=s,
        q=s,
        name=name,
    )


_DIMSIM3_LAM_POLY = np.array([-1.0 / 6.0, 1.5, -3.0, 1.0])
_DIMSIM3_LAM_SEED = 0.43586652
_DIMSIM3_A_OFF = np.array([0.25051488, -1.2115943, 1.0012746])
_DIMSIM3_V = np.array([0.55209096, 0.73485666, -0.28694762])

_DIMSIM4_LAM_POLY = np.array([1.0 / 24.0, -2.0 / 3.0, 3.0, -4.0, 1.0])
_DIMSIM4_LAM_SEED = 0.57281606
_DIMSIM4_A_OFF = np.array([0.15022075,
                           0.59515808, -0.26632807,
                           1.7717286, -1.64234444, 0.39147320])
_DIMSIM4_V = np.array([15.615037, -46.967269, 41.290082, -8.9378502])

_CACHE: dict = {}


def dimsim3() -> GlmTableau:
    """Three-stage method of order and stage order 3, c = [0, 1/2, 1].

    The diagonal parameter is the root near 0.4359 of
    lam^3 - 3 lam^2 + (3/2) lam - 1/6, the unique choice in (0, 1/2)
    for which the method damps exactly at z -> -inf.
    """
    if "dimsim3" not in _CACHE:
        _CACHE["dimsim3"] = _refined_dimsim(
            np.array([0.0, 0.5, 1.0]),
            _DIMSIM3_LAM_POLY, _DIMSIM3_LAM_SEED,
            _DIMSIM3_A_OFF, _DIMSIM3_V, "dimsim3")
    return _CACHE["dimsim3"]


def dimsim4() -> GlmTableau:
    """Four-stage method of order and stage order 4, c = [0, 1/3, 2/3, 1].

    The diagonal parameter is the root near 0.5728 of
    lam^4 - 4 lam^3 + 3 lam^2 - (2/3) lam + 1/24, chosen so the
    method damps exactly at z -> -inf.
    """
    if "dimsim4" not in _CACHE:
        _CACHE["dimsim4"] = _refined_dimsim(
            np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]),
            _DIMSIM4_LAM_POLY, _DIMSIM4_LAM_SEED,
            _DIMSIM4_A_OFF, _DIMSIM4_V, "dimsim4")
    return _CACHE["dimsim4"]


_SQ2 = np.sqrt(2.0)


@dataclass(frozen=True)
class MethodFamily:
    """A named family of methods with one optional free parameter.

    a_stable and l_stable report the stability class at a given
    parameter value (pass None for parameter-free families); n_beta is
    the number of free extrapolation parameters s(s-1)/2 available
    when the family is paired with an explicit partner.
    """

    family_id: str
    order: int
    stages: int
    param_name: Optional[str]
    param_range: Tuple[float, float]
    param_default: Optional[float]
    n_beta: int
    make: Callable[..., GlmTableau]
    a_stable: Callable[[Optional[float]], bool]
    l_stable: Callable[[Optional[float]], bool]


FAMILIES = {
    "theta": MethodFamily(
        family_id="theta",
        order=1,
        stages=1,
        param_name="theta",
        param_range=(0.0, 1.0),
        param_default=1.0,
        n_beta=0,
        make=theta_method,
        a_stable=lambda t: t is not None and 0.5 <= t <= 1.0,
        l_stable=lambda t: t is not None and 0.5 < t <= 1.0,
    ),
    "dimsim2": MethodFamily(
        family_id="dimsim2",
        order=2,
        stages=2,
        param_name="lam",
        param_range=(0.0, np.inf),
        param_default=(2.0 - _SQ2) / 2.0,
        n_beta=1,
        make=dimsim2,
        a_stable=lambda l: l is not None and l >= 0.25,
        l_stable=lambda l: l is not None and (
            abs(l - (2.0 - _SQ2) / 2.0) <= 1e-9
            or abs(l - (2.0 + _SQ2) / 2.0) <= 1e-9),
    ),
    "dimsim3": MethodFamily(
        family_id="dimsim3",
        order=3,
        stages=3,
        param_name=None,
        param_range=(np.nan, np.nan),
        param_default=None,
        n_beta=3,
        make=dimsim3,
        a_stable=lambda _=None: True,
        l_stable=lambda _=None: True,
    ),
    "dimsim4": MethodFamily(
        family_id="dimsim4",
        order=4,
        stages=4,
        param_name=None,
        param_range=(np.nan, np.nan),
        param_default=None,
        n_beta=6,
        make=dimsim4,
        a_stable=lambda _=None: True,
        l_stable=lambda _=None: True,
    ),
}


def get_method(family_id: str, param: Optional[float] = None) -> GlmTableau:
    """Construct a catalogued method by family name.

    param is required to be None for the parameter-free families; the
    parametric families fall back to their default when it is omitted.
    """
    if family_id not in FAMILIES:
        known = ", ".join(sorted(FAMILIES))
        raise ValueError(f"unknown method family {family_id!r} (have: {known})")
    fam = FAMILIES[family_id]
    if fam.param_name is None:
        if param is not None:
            raise ValueError(f"{family_id} takes no free parameter")
        return fam.make()
    if param is None:
        param = fam.param_default
    return fam.make(param)
