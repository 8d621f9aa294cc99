"""Extrapolation weights and implicit-explicit scheme assembly.

An implicit method with abscissae c is paired with an explicit partner
by predicting the non-stiff stage derivatives at the current step from
previous-step stage values (weights alpha) and already-computed
current-step stage values (weights beta).  beta is strictly lower
triangular so the prediction never looks ahead; it is the free design
parameter, and alpha is always derived from it through polynomial
interpolation conditions of order p.  Multiplying the base tableau by
the weights yields the four coefficient blocks of the combined scheme,
and stacking two consecutive steps exhibits the explicit part as an
ordinary general linear method, which is how its stability and order
are analyzed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .glm import GlmTableau
from .matkit import lu_solve

__all__ = [
    "ExtrapCoeffs",
    "ImexScheme",
    "beta_matrix",
    "beta_entries",
    "solve_alpha",
    "make_coeffs",
    "interpolation_residual",
    "assemble_imex",
    "scheme_from_beta",
    "explicit_two_step_glm",
]


def beta_matrix(s: int, entries=None) -> np.ndarray:
    """Strictly lower triangular s x s matrix from row-major entries.

    entries holds [b21, b31, b32, b41, ...] and may be None or empty
    for the all-zero matrix.
    """
    m = np.zeros((s, s))
    if entries is None:
        return m
    entries = np.atleast_1d(np.asarray(entries, dtype=float))
    want = s * (s - 1) // 2
    if entries.size != want:
        raise ValueError(
            f"need {want} strictly lower entries for s={s}, got {entries.size}")
    k = 0
    for i in range(1, s):
        for j in range(i):
            m[i, j] = entries[k]
            k += 1
    return m


def beta_entries(beta: np.ndarray) -> np.ndarray:
    """Row-major strictly lower triangular entries of beta."""
    beta = np.asarray(beta, dtype=float)
    s = beta.shape[0]
    return beta[np.tril_indices(s, -1)]


def _check_strictly_lower(m: np.ndarray, what: str) -> None:
    if np.any(np.abs(np.triu(m)) > 0.0):
        raise ValueError(f"{what} must be strictly lower triangular")


@dataclass(frozen=True)
class ExtrapCoeffs:
    """Interpolation weight pair (alpha, beta) of a given order.

    alpha rows reconstruct values at c from samples at c - 1 and at
    the earlier entries of c; beta is strictly lower triangular.
    """

    alpha: np.ndarray
    beta: np.ndarray
    order: int

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 2:
            raise ValueError("alpha and beta must be equal square matrices")
        if self.alpha.shape[0] != self.alpha.shape[1]:
            raise ValueError("alpha must be square")
        _check_strictly_lower(self.beta, "beta")


def solve_alpha(beta: np.ndarray, c: np.ndarray, p: int) -> np.ndarray:
    """Interpolation weights alpha for a given beta.

    Row j solves sum_k alpha[j,k] (c_k - 1)^l = c_j^l - sum_{k<j}
    beta[j,k] c_k^l for l = 0..p-1.  The system matrix is the
    Vandermonde matrix of the shifted abscissae, so the solution is
    unique when p equals the stage count.
    """
    c = np.asarray(c, dtype=float)
    beta = np.asarray(beta, dtype=float)
    s = c.size
    if not 1 <= p <= s:
        raise ValueError(f"order p must lie in 1..{s}, got {p}")
    _check_strictly_lower(beta, "beta")
    shifted = c - 1.0
    if np.min(np.abs(shifted[:, None] - shifted[None, :])
              + np.eye(s)) == 0.0:
        raise ValueError("shifted abscissae c - 1 must be distinct")
    ell = np.arange(p)
    w = shifted[None, :] ** ell[:, None]          # p x s
    pc = c[None, :] ** ell[:, None]               # p x s
    rhs = pc - pc @ beta.T                        # p x s, column j
    if p == s:
        return lu_solve(w, rhs).T
    return np.linalg.lstsq(w, rhs, rcond=None)[0].T


def make_coeffs(beta, c: np.ndarray, p: int) -> ExtrapCoeffs:
    """Solve for alpha and bundle it with beta.

    beta may be a strictly lower triangular matrix or the flat
    row-major vector of its s(s-1)/2 free entries.
    """
    c = np.asarray(c, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if beta.ndim <= 1:
        beta = beta_matrix(c.size, None if beta.size == 0 else beta)
    return ExtrapCoeffs(solve_alpha(beta, c, p), beta, p)


def interpolation_residual(coeffs: ExtrapCoeffs, c: np.ndarray) -> float:
    """Max-norm defect of the order conditions on (alpha, beta)."""
    c = np.asarray(c, dtype=float)
    ell = np.arange(coeffs.order)
    w = (c[None, :] - 1.0) ** ell[:, None]
    pc = c[None, :] ** ell[:, None]
    res = w @ coeffs.alpha.T + pc @ coeffs.beta.T - pc
    return float(np.max(np.abs(res)))


@dataclass(frozen=True)
class ImexScheme:
    """An implicit base method paired with its extrapolation partner.

    abar/astar act on the non-stiff derivatives of previous and
    current stages; bbar/bstar are their output counterparts.  astar
    is strictly lower triangular and bstar has a zero last column, so
    one sweep over the stages needs only one implicit solve per stage.
    """

    base: GlmTableau
    coeffs: ExtrapCoeffs
    abar: np.ndarray = field(init=False, default=None)
    astar: np.ndarray = field(init=False, default=None)
    bbar: np.ndarray = field(init=False, default=None)
    bstar: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        tab, coeffs = self.base, self.coeffs
        if coeffs.alpha.shape[0] != tab.s:
            raise ValueError("coefficient size does not match stage count")
        if coeffs.order != tab.p:
            raise ValueError("extrapolation order must equal the method order")
        defect = interpolation_residual(coeffs, tab.c)
        if defect > 1e-12:
            raise ValueError(
                f"interpolation conditions violated (defect {defect:.3e})")
        object.__setattr__(self, "abar", tab.A @ coeffs.alpha)
        object.__setattr__(self, "astar", tab.A @ coeffs.beta)
        object.__setattr__(self, "bbar", tab.B @ coeffs.alpha)
        object.__setattr__(self, "bstar", tab.B @ coeffs.beta)
        _check_strictly_lower(self.astar, "astar")
        if np.any(self.bstar[:, -1] != 0.0):
            raise ValueError("bstar must have a zero last column")

    @property
    def s(self) -> int:
        return self.base.s

    @property
    def r(self) -> int:
        return self.base.r

    @property
    def beta_flat(self) -> np.ndarray:
        return beta_entries(self.coeffs.beta)


def assemble_imex(tab: GlmTableau, coeffs: ExtrapCoeffs) -> ImexScheme:
    """Pair a base tableau with extrapolation weights."""
    return ImexScheme(tab, coeffs)


def scheme_from_beta(tab: GlmTableau, beta=None) -> ImexScheme:
    """Convenience: beta entries (or matrix, or None for zero) to scheme."""
    if beta is None:
        beta = np.zeros(tab.s * (tab.s - 1) // 2)
    return assemble_imex(tab, make_coeffs(beta, tab.c, tab.p))


def explicit_two_step_glm(scheme: ImexScheme) -> GlmTableau:
    """The explicit partner written as one method over a double step.

    Stages are the previous-step stages (pure copies of stored
    values) followed by the current ones; the externals carry the
    previous stage values and the base method's external vectors.
    The result inherits order and stage order from the base method
    whenever the interpolation conditions hold, which makes its
    residual checks a useful self-test of the assembly.
    """
    tab = scheme.base
    s, r = tab.s, tab.r
    ctop = tab.c - 1.0
    A = np.zeros((2 * s, 2 * s))
    A[s:, :s] = scheme.abar
    A[s:, s:] = scheme.astar
    U = np.zeros((2 * s, s + r))
    U[:s, :s] = np.eye(s)
    U[s:, s:] = tab.U
    B = np.zeros((s + r, 2 * s))
    B[:s, :s] = scheme.abar
    B[:s, s:] = scheme.astar
    B[s:, :s] = scheme.bbar
    B[s:, s:] = scheme.bstar
    V = np.zeros((s + r, s + r))
    V[:s, s:] = tab.U
    V[s:, s:] = tab.V
    fact = 1.0
    qvecs = np.zeros((tab.p + 1, s + r))
    for k in range(tab.p + 1):
        if k > 0:
            fact *= k
        qvecs[k, :s] = ctop**k / fact
        qvecs[k, s:] = tab.qvecs[k]
    return GlmTableau(
        c=np.concatenate([ctop, tab.c]),
        A=A,
        U=U,
        B=B,
        V=V,
        qvecs=qvecs,
        p=tab.p,
        q=tab.q,
        name=f"explicit({tab.name})" if tab.name else "explicit",
    )
