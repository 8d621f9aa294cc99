"""Linear stability analysis of implicit-explicit schemes.

Everything here reduces to the one-step transfer matrix M(z0, z1) of
the combined scheme on the split scalar test equation, where z0 and
z1 are the scaled eigenvalues of the explicit and implicit parts.
The spectral radius of M decides pointwise stability; regions are

  explicit region      : stable at z1 = 0,
  constrained region   : stable at one z1 on a sector boundary,
  sector region        : stable for every z1 on the sector boundary,

with the sector boundary parameterized by the imaginary part y as
z1 = -|y|/tan(alpha) + i y.  The module provides pointwise tests, a
boundary locus, ray bisection for sector-region boundaries, cell
counting areas with progressive masking over y, and a derivative-free
simplex search over the free extrapolation parameters.

Two structural facts keep the scans cheap.  First, for fixed z1 the
characteristic polynomial of M is a polynomial in z0 of degree at
most s + r (eliminating the stage unknowns writes it as an
(2s+r)-size determinant with only s + r rows depending on z0), so its
coefficients are recovered exactly from s + r + 1 samples.  Second,
membership of a whole z0 grid is then a vectorized Schur-Cohn test on
the sampled coefficients, with no per-point eigenvalue work.

Grid scans honor the IMEXGLM_WORKERS environment variable for thread
parallelism; the default of one worker keeps runs bit-deterministic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .extrap import ImexScheme
from .glm import glm_stability_matrix
from .matkit import char_poly, lu_solve, poly_roots, RootFindingError

__all__ = [
    "StabilityVerdict",
    "RegionScan",
    "RegionResult",
    "OptimizeResult",
    "imex_stability_matrix",
    "imex_stability_poly",
    "is_stable",
    "sector_z1",
    "stiff_limit_matrix",
    "stiff_limit_radius",
    "wpoly_z0_coeffs",
    "stable_mask",
    "boundary_locus",
    "ray_intersection",
    "ray_exit",
    "s_alpha_boundary",
    "region_area",
    "nelder_mead",
    "optimize_beta",
]


def _workers() -> int:
    try:
        n = int(os.environ.get("IMEXGLM_WORKERS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map, threaded when IMEXGLM_WORKERS > 1."""
    items = list(items)
    n = _workers()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def sector_z1(alpha: float, y: float) -> complex:
    """Point on the sector boundary with imaginary part y.

    The sector of half-angle alpha in (0, pi/2] opens into the left
    half-plane; its upper and lower boundary rays are swept by y of
    either sign, with y = 0 giving the origin.
    """
    if not 0.0 < alpha <= np.pi / 2 + 1e-12:
        raise ValueError(f"alpha must lie in (0, pi/2], got {alpha}")
    y = float(y)
    if abs(alpha - np.pi / 2) <= 1e-12:
        return complex(0.0, y)
    return complex(-abs(y) / np.tan(alpha), y)


def _resolvent_matrix(scheme: ImexScheme, z0: complex, z1: complex) -> np.ndarray:
    tab = scheme.base
    return np.eye(tab.s) - z0 * scheme.astar - z1 * tab.A


def imex_stability_matrix(scheme: ImexScheme, z0: complex, z1: complex) -> np.ndarray:
    """Transfer matrix of one step on the split scalar test equation.

    Acts on the stacked vector of previous stage values and external
    vectors, size s + r.  Raises on a singular stage resolvent, which
    for the catalogued methods happens only at z1 = 1/lam.
    """
    tab = scheme.base
    s, r = tab.s, tab.r
    res = _resolvent_matrix(scheme, z0, z1)
    rhs = np.zeros((s, s + r), dtype=complex)
    rhs[:, :s] = z0 * scheme.abar
    rhs[:, s:] = tab.U
    e = lu_solve(res, rhs)          # [z0 E abar | E U]
    zb = z0 * scheme.bstar + z1 * tab.B
    m = np.zeros((s + r, s + r), dtype=complex)
    m[:s] = e
    m[s:, :s] = z0 * scheme.bbar + zb @ e[:, :s]
    m[s:, s:] = tab.V + zb @ e[:, s:]
    return m


def imex_stability_poly(scheme: ImexScheme, z0: complex, z1: complex) -> np.ndarray:
    """Ascending coefficients of det(wI - M(z0, z1)), monic, degree s+r."""
    return char_poly(imex_stability_matrix(scheme, z0, z1))


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    max_modulus: float
    resolvent_singular: bool = False


def is_stable(scheme: ImexScheme, z0: complex, z1: complex) -> StabilityVerdict:
    """Strict spectral-radius test of M(z0, z1).

    A singular stage resolvent is reported as unstable with the flag
    set rather than raising, so region scans can sweep freely.
    """
    lam = scheme.base.A[0, 0]
    if abs(1.0 - lam * z1) <= 1e-13 * max(1.0, abs(lam * z1)):
        return StabilityVerdict(False, np.inf, True)
    m = imex_stability_matrix(scheme, z0, z1)
    mod = float(np.max(np.abs(np.linalg.eigvals(m))))
    return StabilityVerdict(mod < 1.0, mod)


def stiff_limit_matrix(scheme: ImexScheme) -> np.ndarray:
    """Limit of the lower-right block of M as z1 -> -inf.

    M becomes block lower triangular in the limit with s zero
    eigenvalues and the spectrum of V - B A^(-1) U, independently of
    z0, so one spectral radius decides the stiff limit for a whole
    region scan.
    """
    tab = scheme.base
    return tab.V - tab.B @ lu_solve(tab.A, tab.U)


def stiff_limit_radius(scheme: ImexScheme) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(stiff_limit_matrix(scheme)))))


_Z0_FIT_HALFWIDTH = 5.0


def wpoly_z0_coeffs(scheme: ImexScheme, z1: complex) -> np.ndarray:
    """Coefficient matrix C of det(wI - M(z0, z1)) for fixed z1.

    C[k, m] is the coefficient of w^k z0^m, with k, m = 0..s+r.  The
    z0 degree bound s + r makes interpolation at s + r + 1 Chebyshev
    nodes exact; the stage resolvent is lower triangular with
    z0-independent diagonal, so no node can be singular.  A residual
    check at an off-node point guards the degree assumption.
    """
    d = scheme.s + scheme.r
    n = d + 1
    t = np.cos(np.pi * (2 * np.arange(n) + 1) / (2.0 * n))
    nodes = _Z0_FIT_HALFWIDTH * t
    samples = np.empty((n, n), dtype=complex)
    for j, z0 in enumerate(nodes):
        samples[:, j] = char_poly(imex_stability_matrix(scheme, z0, z1))
    vand = t[:, None] ** np.arange(n)[None, :]
    coeffs_t = lu_solve(vand, samples.T).T
    coeffs = coeffs_t / (_Z0_FIT_HALFWIDTH ** np.arange(n))[None, :]
    z_extra = 0.37 * _Z0_FIT_HALFWIDTH
    predicted = coeffs @ (z_extra ** np.arange(n))
    actual = char_poly(imex_stability_matrix(scheme, z_extra, z1))
    scale = max(1.0, float(np.max(np.abs(samples))))
    if np.max(np.abs(predicted - actual)) > 1e-6 * scale:
        raise RootFindingError(
            "stability polynomial exceeded its z0 degree bound")
    return coeffs


def _schur_cohn_mask(coeffs: np.ndarray) -> np.ndarray:
    """Vectorized all-roots-strictly-inside-unit-disk test.

    coeffs has shape (d+1, N), ascending in the variable, one
    polynomial per column, nonzero leading row.  Each reduction step
    requires |c_0| < |c_d| strictly and produces a polynomial of one
    degree less; surviving all steps is equivalent to root moduli
    below one.  Columns are renormalized every step so the quadratic
    coefficient growth cannot overflow.
    """
    a = np.array(coeffs, dtype=complex)
    alive = np.ones(a.shape[1], dtype=bool)
    d = a.shape[0] - 1
    for _ in range(d):
        c0 = a[0]
        cd = a[-1]
        alive &= np.abs(c0) < np.abs(cd)
        q = np.conj(cd)[None, :] * a - c0[None, :] * np.conj(a[::-1])
        a = q[1:]
        norm = np.max(np.abs(a), axis=0)
        norm[norm == 0.0] = 1.0
        with np.errstate(invalid="ignore"):
            a = a / norm[None, :]
        a[:, ~np.isfinite(norm)] = 0.0
    return alive


def stable_mask(scheme: ImexScheme, z0_points: np.ndarray, z1: complex,
                coeffs: Optional[np.ndarray] = None) -> np.ndarray:
    """Strict stability of M(z0, z1) over an array of z0 points."""
    z0_points = np.asarray(z0_points, dtype=complex).ravel()
    if coeffs is None:
        coeffs = wpoly_z0_coeffs(scheme, z1)
    n = coeffs.shape[1]
    powers = np.empty((n, z0_points.size), dtype=complex)
    powers[0] = 1.0
    for m in range(1, n):
        powers[m] = powers[m - 1] * z0_points
    wpolys = coeffs @ powers
    return _schur_cohn_mask(wpolys)


def boundary_locus(scheme: ImexScheme, alpha: float = np.pi / 2,
                   y: float = 0.0, theta_samples: int = 256,
                   k: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Root locus of the stability polynomial with |w| = 1.

    For each angle theta the z0 roots of det(w I - M(z0, z1)) with
    w = exp(i theta) are collected; z1 is the sector boundary point
    for (alpha, y).  Returns (points, thetas), one theta tag per
    point.  The cloud contains every candidate boundary arc of the
    constrained region, including spurious sheets that a region scan
    disambiguates.
    """
    if theta_samples < 64:
        raise ValueError("theta_samples must be at least 64")
    if k < 1:
        raise ValueError("k must be at least 1")
    z1 = sector_z1(alpha, y)
    coeffs = wpoly_z0_coeffs(scheme, z1)
    n = coeffs.shape[0]
    thetas = np.linspace(0.0, 2.0 * np.pi * k, theta_samples, endpoint=False)

    def roots_at(theta: float):
        w = np.exp(1j * theta)
        wpow = w ** np.arange(n)
        z0poly = wpow @ coeffs
        # interpolation noise can leave a tiny spurious leading
        # coefficient when the true z0 degree is lower
        scale = np.max(np.abs(z0poly))
        if scale == 0.0:
            return np.empty(0, dtype=complex)
        deg = int(np.max(np.flatnonzero(np.abs(z0poly) > 1e-10 * scale)))
        if deg == 0:
            return np.empty(0, dtype=complex)
        try:
            return poly_roots(z0poly[:deg + 1])
        except RootFindingError:
            return np.empty(0, dtype=complex)

    all_roots = parallel_map(roots_at, thetas)
    pts = np.concatenate([r for r in all_roots]) if all_roots else np.empty(0)
    tags = np.concatenate([np.full(r.size, th)
                           for r, th in zip(all_roots, thetas)])
    return pts, tags


def _max_modulus(scheme: ImexScheme, z0: complex, z1: complex) -> float:
    lam = scheme.base.A[0, 0]
    if abs(1.0 - lam * z1) <= 1e-13 * max(1.0, abs(lam * z1)):
        return np.inf
    m = imex_stability_matrix(scheme, z0, z1)
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def ray_exit(scheme: ImexScheme, psi: float, z1: complex,
             tol: float = 1e-8, t_max: float = 50.0) -> float:
    """Distance along the ray z0 = t e^{i psi} to the stability boundary.

    Bisection on the spectral radius of M(t e^{i psi}, z1); terminates
    when the radius at the midpoint is within tol of one.  The ray
    must already be unstable at t_max; a ray that never leaves the
    region is reported instead of silently truncated.
    """
    if _max_modulus(scheme, t_max * np.exp(1j * psi), z1) <= 1.0:
        raise RootFindingError(
            f"ray psi={psi:.4f} still stable at t={t_max}; enlarge t_max")
    lo, hi = 0.0, t_max
    direction = np.exp(1j * psi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mod = _max_modulus(scheme, mid * direction, z1)
        if abs(mod - 1.0) <= tol:
            return mid
        if mod < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * t_max:
            break
    return 0.5 * (lo + hi)


def ray_intersection(scheme: ImexScheme, m: float, alpha: float, y: float,
                     tol: float = 1e-8, x_bar: float = -50.0) -> float:
    """Leftmost x0 with z0 = x0 (1 + i m) still inside the constrained region.

    The ray of slope m through the origin into the left half-plane is
    parameterized by angle internally; the returned value is the x0
    coordinate of the boundary crossing, negative by construction.
    """
    psi = np.pi + np.arctan(float(m))
    t_max = abs(x_bar) * np.hypot(1.0, float(m))
    t = ray_exit(scheme, psi, sector_z1(alpha, y), tol=tol, t_max=t_max)
    return t * np.cos(psi)


def s_alpha_boundary(scheme: ImexScheme, alpha: float,
                     rays: Optional[np.ndarray] = None,
                     y_max: float = 8.0, n_y: int = 33,
                     tol: float = 1e-8, t_max: float = 50.0,
                     golden_iters: int = 24) -> np.ndarray:
    """Boundary points of the sector region, one per ray.

    Along each ray angle the exit distance is minimized over the
    sector boundary parameter y: a symmetric seed grid is scanned and
    the best bracket is refined by golden-section search.  rays
    defaults to 64 angles spanning the left half-plane.
    """
    if rays is None:
        rays = np.linspace(np.pi / 2, 3 * np.pi / 2, 65)[1:-1]
    ys = np.linspace(-y_max, y_max, n_y)

    gr = 0.5 * (np.sqrt(5.0) - 1.0)

    def point_for(psi: float) -> complex:
        def exit_at(y: float) -> float:
            try:
                return ray_exit(scheme, psi, sector_z1(alpha, y),
                                tol=tol, t_max=t_max)
            except RootFindingError:
                return np.inf
        vals = np.array([exit_at(y) for y in ys])
        j = int(np.argmin(vals))
        lo = ys[max(j - 1, 0)]
        hi = ys[min(j + 1, n_y - 1)]
        a, b = lo, hi
        x1 = b - gr * (b - a)
        x2 = a + gr * (b - a)
        f1, f2 = exit_at(x1), exit_at(x2)
        for _ in range(golden_iters):
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - gr * (b - a)
                f1 = exit_at(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + gr * (b - a)
                f2 = exit_at(x2)
        t_best = min(vals[j], f1, f2)
        return t_best * np.exp(1j * psi)

    return np.asarray(parallel_map(point_for, rays), dtype=complex)


@dataclass(frozen=True)
class RegionScan:
    """Cell-counting scan settings.

    The rectangle is covered by square cells of side delta and a cell
    counts as inside when its center is stable for every checked z1.
    For sector regions the z1 checks run over the symmetric y grid
    and one extra golden-section-refined y near the most restrictive
    grid value, plus the z1 -> -inf limit matrix.
    """

    x_min: float = -6.0
    x_max: float = 1.0
    y_min: float = -4.0
    y_max: float = 4.0
    delta: float = 0.02
    sector_y_max: float = 8.0
    sector_y_step: float = 0.05
    refine_worst: bool = True
    golden_iters: int = 18

    def grid(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        xs = np.arange(self.x_min + self.delta / 2, self.x_max, self.delta)
        ys = np.arange(self.y_min + self.delta / 2, self.y_max, self.delta)
        zz = xs[None, :] + 1j * ys[:, None]
        return xs, ys, zz

    def sector_ys(self) -> np.ndarray:
        n = int(round(2 * self.sector_y_max / self.sector_y_step)) + 1
        return np.linspace(-self.sector_y_max, self.sector_y_max, n)


COARSE_SCAN = RegionScan(delta=0.05, sector_y_step=0.2, golden_iters=10)


@dataclass
class RegionResult:
    area: float
    alpha: Optional[float]
    boundary: np.ndarray
    meta: dict = field(default_factory=dict)


def _masked_count(scheme: ImexScheme, pts: np.ndarray, alive: np.ndarray,
                  z1: complex) -> np.ndarray:
    """AND the alive mask with stability at z1, evaluating only live points."""
    idx = np.flatnonzero(alive)
    if idx.size == 0:
        return alive
    sub = stable_mask(scheme, pts[idx], z1)
    out = alive.copy()
    out[idx] = sub
    return out


def region_area(scheme: ImexScheme, alpha: Optional[float] = None,
                scan: Optional[RegionScan] = None,
                boundary_rays: int = 0) -> RegionResult:
    """Area of the explicit (alpha=None) or sector stability region.

    Cell counting over the scan rectangle.  Sector regions apply the
    y checks in increasing |y| so the cheap early masks shrink the
    grid before the expensive tail, refine the single most
    restrictive y by golden section, and reject everything when the
    stiff limit matrix is not strictly stable (the region is empty in
    that case because stability must hold arbitrarily far along the
    sector boundary).
    """
    scan = scan or RegionScan()
    xs, ys, zz = scan.grid()
    pts = zz.ravel()
    cell = scan.delta**2
    meta = {"delta": scan.delta, "rect": (scan.x_min, scan.x_max,
                                          scan.y_min, scan.y_max)}

    if alpha is None:
        alive = stable_mask(scheme, pts, 0.0)
        meta["z1_checks"] = 1
    else:
        limit = stiff_limit_radius(scheme)
        meta["stiff_limit_radius"] = limit
        if limit >= 1.0 - 1e-9:
            meta["stiff_limit_unstable"] = True
            boundary = np.empty(0, dtype=complex)
            return RegionResult(0.0, alpha, boundary, meta)
        ygrid = scan.sector_ys()
        order = np.argsort(np.abs(ygrid), kind="stable")
        alive = np.ones(pts.size, dtype=bool)
        removed = np.zeros(ygrid.size)
        for j in order:
            before = int(alive.sum())
            if before == 0:
                break
            alive = _masked_count(scheme, pts, alive, sector_z1(alpha, ygrid[j]))
            removed[j] = before - int(alive.sum())
        meta["z1_checks"] = ygrid.size
        if scan.refine_worst and alive.any():
            jw = int(np.argmax(removed))
            lo = ygrid[max(jw - 1, 0)]
            hi = ygrid[min(jw + 1, ygrid.size - 1)]
            gr = 0.5 * (np.sqrt(5.0) - 1.0)

            def live_count(y: float) -> int:
                return int(_masked_count(scheme, pts, alive,
                                         sector_z1(alpha, y)).sum())

            a, b = lo, hi
            x1 = b - gr * (b - a)
            x2 = a + gr * (b - a)
            f1, f2 = live_count(x1), live_count(x2)
            for _ in range(scan.golden_iters):
                if f1 <= f2:
                    b, x2, f2 = x2, x1, f1
                    x1 = b - gr * (b - a)
                    f1 = live_count(x1)
                else:
                    a, x1, f1 = x1, x2, f2
                    x2 = a + gr * (b - a)
                    f2 = live_count(x2)
            y_star = x1 if f1 <= f2 else x2
            alive = _masked_count(scheme, pts, alive, sector_z1(alpha, y_star))
            meta["refined_y"] = float(y_star)

    area = float(alive.sum()) * cell
    meta["cells_inside"] = int(alive.sum())
    boundary = np.empty(0, dtype=complex)
    if boundary_rays > 0:
        if alpha is None:
            rays = np.linspace(np.pi / 2, 3 * np.pi / 2, boundary_rays + 2)[1:-1]

            def exit_point(psi: float) -> complex:
                t = ray_exit(scheme, psi, 0.0)
                return t * np.exp(1j * psi)

            boundary = np.asarray(parallel_map(exit_point, rays), dtype=complex)
        else:
            rays = np.linspace(np.pi / 2, 3 * np.pi / 2, boundary_rays + 2)[1:-1]
            boundary = s_alpha_boundary(scheme, alpha, rays=rays,
                                        y_max=scan.sector_y_max)
    result = RegionResult(area, alpha, boundary, meta)
    result.meta["mask"] = alive.reshape(zz.shape)
    result.meta["xs"] = xs
    result.meta["ys"] = ys
    return result


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    n_eval: int
    converged: bool


def nelder_mead(fun: Callable[[np.ndarray], float], x0: np.ndarray,
                budget: int = 200, edge: float = 0.25,
                diam_tol: float = 1e-3) -> OptimizeResult:
    """Derivative-free simplex minimizer.

    Standard reflection/expansion/contraction/shrink coefficients
    (1, 2, 0.5, 0.5), initial simplex edge 0.25 along each axis, and
    termination on simplex diameter below diam_tol or on exhausting
    the evaluation budget, returning the best point seen either way.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(fun(x))

    simplex = [x0.copy()]
    fvals = [f(x0)]
    best_x, best_f = simplex[0], fvals[0]

    def diameter():
        return max(float(np.max(np.abs(a - b)))
                   for i, a in enumerate(simplex)
                   for b in simplex[i + 1:]) if len(simplex) > 1 else np.inf

    for i in range(n):
        if evals >= budget:
            return OptimizeResult(best_x, best_f, evals, False)
        x = x0.copy()
        x[i] += edge
        simplex.append(x)
        fvals.append(f(x))
        if fvals[-1] < best_f:
            best_x, best_f = x, fvals[-1]

    while True:
        order = np.argsort(fvals, kind="stable")
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        if fvals[0] < best_f:
            best_x, best_f = simplex[0], fvals[0]
        if diameter() < diam_tol:
            return OptimizeResult(best_x, best_f, evals, True)
        if evals >= budget:
            return OptimizeResult(best_x, best_f, evals, False)
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = f(xr)
        if fr < fvals[0]:
            if evals < budget:
                xe = centroid + 2.0 * (centroid - simplex[-1])
                fe = f(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (simplex[-1] - centroid)
            fc = f(xc) if evals < budget else np.inf
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, len(simplex)):
                    if evals >= budget:
                        return OptimizeResult(best_x, best_f, evals, False)
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = f(simplex[i])
                    if fvals[i] < best_f:
                        best_x, best_f = simplex[i], fvals[i]


def optimize_beta(family, alpha: Optional[float], beta0: np.ndarray,
                  budget: int = 200, scan: Optional[RegionScan] = None,
                  param0: Optional[float] = None) -> OptimizeResult:
    """Maximize a region area over the free extrapolation parameters.

    family is a catalogue family id, a prebuilt tableau, or a callable
    mapping the search vector to a scheme.  When param0 is given for a
    parametric family the search vector is [param, beta...] and the
    family parameter is optimized jointly.  The returned OptimizeResult
    carries the search vector and the (positive) achieved area.
    """
    from . import catalogue
    from .extrap import scheme_from_beta

    scan = scan or COARSE_SCAN

    if callable(family) and not isinstance(family, str):
        builder = family
    elif isinstance(family, str):
        fam = catalogue.FAMILIES.get(family)
        if fam is None:
            raise ValueError(f"unknown method family {family!r}")
        if param0 is not None:
            if fam.param_name is None:
                raise ValueError(f"{family} takes no free parameter")

            def builder(x):
                return scheme_from_beta(fam.make(x[0]), x[1:])

            beta0 = np.concatenate([[param0], np.atleast_1d(beta0)])
        else:
            def builder(x):
                return scheme_from_beta(catalogue.get_method(family), x)
    else:
        tab = family

        def builder(x):
            return scheme_from_beta(tab, x)

    def objective(x):
        try:
            scheme = builder(np.asarray(x, dtype=float))
        except (ValueError, ZeroDivisionError):
            return 0.0
        return -region_area(scheme, alpha, scan=scan).area

    res = nelder_mead(objective, np.atleast_1d(np.asarray(beta0, dtype=float)),
                      budget=budget)
    return OptimizeResult(res.x, -res.fun, res.n_eval, res.converged)
