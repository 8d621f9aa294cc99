"""Small dense/banded linear algebra and polynomial kernels.

Conventions used throughout the package:

* dense matrices are plain ``numpy.ndarray`` objects (2-d, real or complex),
* polynomials are 1-d coefficient arrays in ascending degree order
  (``c[k]`` multiplies ``x**k``),
* banded matrices use the ``BandedMatrix`` container below with LAPACK-style
  diagonal-row storage.

Everything here is deliberately small scale: characteristic polynomials are
limited to dimension 16, root finding to the degrees that produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor
from scipy.linalg import lu_solve as _scipy_lu_solve

__all__ = [
    "SingularMatrixError",
    "RootFindingError",
    "lu_solve",
    "determinant",
    "char_poly",
    "poly_trim",
    "poly_eval",
    "poly_mul",
    "poly_integrate",
    "poly_roots",
    "BandedMatrix",
    "BandedLU",
    "banded_lu",
    "banded_solve",
    "fd_weights",
]

PIVOT_RTOL = 1e-14
TRIM_ABS = 1e-300


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a pivot falls below the relative tolerance."""


class RootFindingError(RuntimeError):
    """Raised when the root finder exhausts its iteration budget."""


def _max_row_norm(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


def lu_solve(a, b):
    """Solve ``a @ x = b`` by LU factorization with partial pivoting.

    Raises SingularMatrixError when a pivot magnitude falls below
    1e-14 times the max row norm of ``a``.  ``b`` may be a vector or a
    matrix of right-hand sides.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square, got shape %r" % (a.shape,))
    if a.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch: %r vs %r" % (a.shape, b.shape))
    scale = _max_row_norm(a)
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    lu, piv = lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) <= PIVOT_RTOL * scale:
        raise SingularMatrixError(
            "pivot %.3e below %.1e * row norm %.3e"
            % (np.min(pivots), PIVOT_RTOL, scale)
        )
    return _scipy_lu_solve((lu, piv), b, check_finite=False)


def determinant(a):
    """Determinant as the signed product of LU pivots.

    Exact for triangular and permutation inputs; the usual LU rounding
    otherwise.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square, got shape %r" % (a.shape,))
    if a.shape[0] == 0:
        return 1.0
    lu, piv = lu_factor(a, check_finite=False)
    swaps = np.count_nonzero(piv != np.arange(a.shape[0]))
    det = np.prod(np.diag(lu))
    return det if swaps % 2 == 0 else -det


MAX_CHARPOLY_DIM = 16


def char_poly(m):
    """Characteristic polynomial det(wI - M) by the Faddeev-LeVerrier recursion.

    Returns ascending monic coefficients of length dim+1.  Division-free in
    spirit (only divisions by the integer step counter); restricted to
    dim <= 16 where the recursion is well behaved in double precision.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square, got shape %r" % (m.shape,))
    n = m.shape[0]
    if n > MAX_CHARPOLY_DIM:
        raise ValueError("dimension %d exceeds supported maximum %d" % (n, MAX_CHARPOLY_DIM))
    coeffs = np.zeros(n + 1, dtype=np.result_type(m.dtype, np.float64))
    coeffs[n] = 1.0
    if n == 0:
        return coeffs
    eye = np.eye(n, dtype=coeffs.dtype)
    mk = np.array(m, dtype=coeffs.dtype)
    ck = -np.trace(mk)
    coeffs[n - 1] = ck
    for k in range(2, n + 1):
        mk = m @ (mk + ck * eye)
        ck = -np.trace(mk) / k
        coeffs[n - k] = ck
    return coeffs


def poly_trim(c, tol=TRIM_ABS):
    """Drop trailing (highest-degree) coefficients with magnitude <= tol."""
    c = np.atleast_1d(np.asarray(c))
    nz = np.nonzero(np.abs(c) > tol)[0]
    if nz.size == 0:
        return c[:1] * 0
    return c[: nz[-1] + 1]


def poly_eval(c, x):
    """Horner evaluation of ascending coefficients at scalar or array x."""
    c = np.asarray(c)
    x = np.asarray(x)
    out = np.zeros(x.shape, dtype=np.result_type(c.dtype, x.dtype))
    for ck in c[::-1]:
        out = out * x + ck
    return out


def poly_mul(a, b):
    return np.convolve(np.asarray(a), np.asarray(b))


def poly_integrate(c):
    """Antiderivative with zero constant term, ascending coefficients."""
    c = np.asarray(c, dtype=float)
    out = np.zeros(c.size + 1, dtype=c.dtype)
    out[1:] = c / np.arange(1, c.size + 1)
    return out


def _aberth_initial(c):
    # annulus of classical root bounds, geometric spread with an angular
    # offset so no guess sits on a symmetry axis
    d = c.size - 1
    lead = np.abs(c[-1])
    upper = 1.0 + np.max(np.abs(c[:-1])) / lead
    c0 = np.abs(c[0])
    lower = c0 / (c0 + np.max(np.abs(c[1:]))) if c0 > 0 else upper * 1e-3
    radii = lower * (upper / lower) ** ((np.arange(d) + 0.5) / d)
    angles = 2.0 * np.pi * np.arange(d) / d + 0.4
    return radii * np.exp(1j * angles)


def poly_roots(coeffs, max_sweeps=500):
    """All complex roots by the Aberth-Ehrlich simultaneous iteration.

    Coefficients ascending; trailing (near-)zero high-order coefficients are
    trimmed first and exact zero low-order coefficients are deflated into
    roots at the origin.  After the sweeps each root gets two plain Newton
    polishing steps and must satisfy |p(root)| <= 1e-9 * max|coeff|,
    otherwise RootFindingError is raised.
    """
    c = poly_trim(np.asarray(coeffs, dtype=complex))
    if c.size < 2:
        raise ValueError("polynomial must have degree >= 1")
    zeros_at_origin = 0
    while c.size > 1 and c[0] == 0:
        zeros_at_origin += 1
        c = c[1:]
    roots = []
    if c.size > 1:
        cmax = np.max(np.abs(c))
        c = c / cmax
        d = c.size - 1
        dc = c[1:] * np.arange(1, d + 1)
        z = _aberth_initial(c)
        for _ in range(max_sweeps):
            pz = poly_eval(c, z)
            dpz = poly_eval(dc, z)
            # Newton step, guarded against p'(z) = 0
            w = np.where(dpz != 0, pz / np.where(dpz == 0, 1, dpz), 0.1 + 0.1j)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = np.sum(1.0 / diff, axis=1)
            denom = 1.0 - w * s
            denom = np.where(np.abs(denom) < 1e-30, 1e-30, denom)
            step = w / denom
            z = z - step
            if np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(z))):
                break
        for _ in range(2):
            pz = poly_eval(c, z)
            dpz = poly_eval(dc, z)
            ok = np.abs(dpz) > 0
            z = np.where(ok, z - pz / np.where(ok, dpz, 1), z)
        resid = np.abs(poly_eval(c, z))
        if np.max(resid) > 1e-9:
            raise RootFindingError(
                "root residual %.3e above 1e-9 after %d sweeps" % (np.max(resid), max_sweeps)
            )
        roots = list(z)
    out = np.array([0.0 + 0.0j] * zeros_at_origin + roots)
    return out[np.argsort(out.real + 1e-9 * out.imag)]


@dataclass
class BandedMatrix:
    """Square banded matrix in diagonal-row storage.

    ``data`` has shape (kl + ku + 1, n) with ``data[ku + i - j, j] = A[i, j]``
    for max(0, j-ku) <= i <= min(n-1, j+kl); entries outside the band are
    ignored.  This is the layout scipy.linalg.solve_banded uses.
    """

    n: int
    kl: int
    ku: int
    data: np.ndarray

    def __post_init__(self):
        expect = (self.kl + self.ku + 1, self.n)
        if self.data.shape != expect:
            raise ValueError("banded storage must have shape %r, got %r" % (expect, self.data.shape))

    @classmethod
    def zeros(cls, n, kl, ku, dtype=float):
        return cls(n, kl, ku, np.zeros((kl + ku + 1, n), dtype=dtype))

    @classmethod
    def from_dense(cls, a, kl, ku):
        a = np.asarray(a)
        n = a.shape[0]
        out = cls.zeros(n, kl, ku, dtype=a.dtype)
        for i in range(n):
            for j in range(max(0, i - kl), min(n, i + ku + 1)):
                out.data[ku + i - j, j] = a[i, j]
        return out

    def to_dense(self):
        a = np.zeros((self.n, self.n), dtype=self.data.dtype)
        for i in range(self.n):
            for j in range(max(0, i - self.kl), min(self.n, i + self.ku + 1)):
                a[i, j] = self.data[self.ku + i - j, j]
        return a

    def matvec(self, x):
        """Banded matrix-vector product, one vectorized pass per diagonal."""
        x = np.asarray(x)
        out = np.zeros(self.n, dtype=np.result_type(self.data.dtype, x.dtype))
        for off in range(-self.kl, self.ku + 1):
            # off = j - i; rows i in [max(0,-off), n-1-max(0,off)]
            i0 = max(0, -off)
            i1 = self.n - max(0, off)
            if i1 <= i0:
                continue
            rows = np.arange(i0, i1)
            cols = rows + off
            out[rows] += self.data[self.ku - off, cols] * x[cols]
        return out

    def scaled_shifted(self, scale, shift):
        """Return BandedMatrix for shift*I + scale*self (same bandwidths)."""
        data = self.data * scale
        data[self.ku, :] += shift
        return BandedMatrix(self.n, self.kl, self.ku, data)

    def max_row_norm(self):
        return float(np.max(np.sum(np.abs(self.to_dense()), axis=1))) if self.n <= 64 else float(
            np.max(np.abs(self.data)) * (self.kl + self.ku + 1)
        )


@dataclass
class BandedLU:
    n: int
    kl: int
    ku: int
    lu: np.ndarray
    piv: np.ndarray


def banded_lu(m):
    """LU factorization of a BandedMatrix with partial pivoting (LAPACK gbtrf).

    Pivot tolerance matches lu_solve: a factored diagonal entry below
    1e-14 * max-row-norm raises SingularMatrixError.
    """
    if not isinstance(m, BandedMatrix):
        raise TypeError("banded_lu expects a BandedMatrix")
    n, kl, ku = m.n, m.kl, m.ku
    ab = np.zeros((2 * kl + ku + 1, n), dtype=np.result_type(m.data.dtype, np.float64))
    ab[kl:, :] = m.data
    (gbtrf,) = get_lapack_funcs(("gbtrf",), (ab,))
    lu, piv, info = gbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError("illegal argument %d to gbtrf" % (-info))
    scale = _max_row_norm(m.to_dense()) if n <= 256 else float(np.max(np.abs(m.data)) * (kl + ku + 1))
    pivots = np.abs(lu[kl + ku, :])
    if info > 0 or (scale > 0 and np.min(pivots) <= PIVOT_RTOL * scale):
        raise SingularMatrixError("singular banded factorization (info=%d)" % info)
    return BandedLU(n, kl, ku, lu, piv)


def banded_solve(fac, b):
    """Solve with a BandedLU factorization (LAPACK gbtrs)."""
    if not isinstance(fac, BandedLU):
        raise TypeError("banded_solve expects a BandedLU")
    b = np.asarray(b)
    (gbtrs,) = get_lapack_funcs(("gbtrs",), (fac.lu, b))
    x, info = gbtrs(fac.lu, fac.kl, fac.ku, b, fac.piv)
    if info != 0:
        raise SingularMatrixError("gbtrs failed with info=%d" % info)
    return x


def fd_weights(nodes, k):
    """Finite difference weights for the k-th derivative at x = 0.

    ``nodes`` are distinct stencil offsets (physical units); the returned
    weights w satisfy sum_j w[j] * f(nodes[j]) ~= f^(k)(0), exactly for
    polynomials up to degree len(nodes)-1.  Fornberg's recursion.
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if k < 0 or k >= n:
        raise ValueError("derivative order %d needs more than %d nodes" % (k, n))
    if np.min(np.abs(x[:, None] - x[None, :]) + np.eye(n)) == 0.0:
        raise ValueError("stencil nodes must be distinct")
    # weights[m, j]: m-th derivative weight of node j, built incrementally
    w = np.zeros((k + 1, n))
    w[0, 0] = 1.0
    c1 = 1.0
    for j in range(1, n):
        c2 = 1.0
        mmax = min(j, k)
        for i in range(j):
            c3 = x[j] - x[i]
            c2 *= c3
            if i == j - 1:
                for m in range(mmax, 0, -1):
                    w[m, j] = c1 * (m * w[m - 1, j - 1] - x[j - 1] * w[m, j - 1]) / c2
                w[0, j] = -c1 * x[j - 1] * w[0, j - 1] / c2
            for m in range(mmax, 0, -1):
                w[m, i] = (x[j] * w[m, i] - m * w[m - 1, i]) / c3
            w[0, i] = x[j] * w[0, i] / c3
        c1 = c2
    return w[k]
