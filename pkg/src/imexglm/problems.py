"""Test problems for the time integrators.

Every problem is packaged as an :class:`IvpProblem`: a split right-hand
side ``y' = f(t, y) + g(t, y)`` with ``g`` carrying the stiff part, plus
whatever extra structure the problem can offer (exact solution, time
derivatives of the exact solution, a Jacobian of ``g``, a hook that
refits a frozen linearization).

Included problems:

* :func:`prothero_robinson` -- the scalar stiff accuracy benchmark
  ``y' = mu (y - phi(t)) + phi'(t)`` with ``phi = sin``.
* :func:`linear_split` -- scalar ``y' = lambda0 y + lambda1 y``, the
  model on which split stepping reduces to a matrix recurrence.
* :func:`shallow_water` -- a second-order finite-difference
  semi-discretization of the 2D shallow water equations on [-3, 3]^2
  with reflective walls.
* :func:`swe_split` -- the same flow split into a frozen banded
  linearization (implicit) plus the remainder (explicit).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .matkit import BandedMatrix

__all__ = [
    "IvpProblem",
    "SweGrid",
    "prothero_robinson",
    "linear_split",
    "initial_height",
    "swe_rhs",
    "swe_mass",
    "swe_frozen_jacobian",
    "shallow_water",
    "swe_split",
    "swe_snapshot_csv",
]


@dataclass
class IvpProblem:
    """An initial value problem split as ``y' = f(t, y) + g(t, y)``.

    ``f`` is treated explicitly by the steppers and ``g`` implicitly.
    Either callable may be ``None``, meaning that part is identically
    zero.  ``g_jacobian(t, y)`` returns the Jacobian of ``g`` with
    respect to ``y``, either as a dense ``(d, d)`` array or as a
    :class:`~imexglm.matkit.BandedMatrix`; steppers freeze it once per
    step.  ``g_linear`` promises ``g(t, y) == g_jacobian(t, y) @ y``
    exactly, which lets a stage solve finish in a single linear solve.

    ``exact(t)`` and ``derivatives(t, k)`` (the k-th time derivative of
    the exact solution, ``k = 0`` giving the solution itself) are
    optional oracles used for exact starting data and error measurement.
    ``refreeze(t, y)``, when present, refits the split around the state
    ``y``; steppers call it once at the top of every step.
    """

    dimension: int
    f: Optional[Callable[[float, np.ndarray], np.ndarray]]
    g: Optional[Callable[[float, np.ndarray], np.ndarray]]
    y0: np.ndarray
    t0: float
    tf: float
    g_jacobian: Optional[Callable[[float, np.ndarray], object]] = None
    g_linear: bool = False
    exact: Optional[Callable[[float], np.ndarray]] = None
    derivatives: Optional[Callable[[float, int], np.ndarray]] = None
    refreeze: Optional[Callable[[float, np.ndarray], None]] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y0 = np.atleast_1d(np.asarray(self.y0))
        if self.y0.shape != (self.dimension,):
            raise ValueError("y0 must have shape (%d,)" % self.dimension)
        if self.f is None and self.g is None:
            raise ValueError("at least one of f, g must be given")
        if self.g is not None and self.g_jacobian is None:
            raise ValueError("a problem with an implicit part needs g_jacobian")
        if not self.tf > self.t0:
            raise ValueError("need tf > t0")

    def total(self, t, y):
        """Full right-hand side f + g."""
        if self.f is None:
            return self.g(t, y)
        if self.g is None:
            return self.f(t, y)
        return self.f(t, y) + self.g(t, y)


def prothero_robinson(mu, t0=0.0, tf=10.0, forcing_in_g=False):
    """Scalar stiff benchmark ``y' = mu (y - sin t) + cos t``.

    The exact solution on the attracting manifold is ``y = sin t``; the
    initial state sits on it, so observed convergence rates expose any
    stiff order reduction.  ``mu`` must have negative real part.  By
    default the forcing ``cos t`` rides in the explicit part ``f``;
    with ``forcing_in_g=True`` it moves into ``g`` and ``f`` is zero.
    """
    mu = complex(mu) if np.iscomplexobj(np.asarray(mu)) else float(mu)
    if not np.real(mu) < 0:
        raise ValueError("prothero_robinson needs Re(mu) < 0")
    dtype = np.result_type(type(mu), float)
    jac = np.array([[mu]], dtype=dtype)

    def g_plain(t, y):
        return mu * (y - np.sin(t))

    def g_forced(t, y):
        return mu * (y - np.sin(t)) + np.cos(t)

    def f_forcing(t, y):
        return np.array([np.cos(t)], dtype=dtype)

    def exact(t):
        return np.array([np.sin(t)], dtype=dtype)

    def derivatives(t, k):
        # d^k/dt^k sin(t) = sin(t + k pi/2)
        return np.array([np.sin(t + 0.5 * np.pi * k)], dtype=dtype)

    return IvpProblem(
        dimension=1,
        f=None if forcing_in_g else f_forcing,
        g=g_forced if forcing_in_g else g_plain,
        y0=exact(t0),
        t0=float(t0),
        tf=float(tf),
        g_jacobian=lambda t, y: jac,
        g_linear=False,
        exact=exact,
        derivatives=derivatives,
        name="prothero-robinson(mu=%g)" % np.real(mu),
        meta={"mu": mu},
    )


def linear_split(lambda0, lambda1, y0=1.0, t0=0.0, tf=1.0):
    """Scalar ``y' = lambda0 y + lambda1 y`` with the split (f, g) = (lambda0 y, lambda1 y).

    Coefficients may be complex; the state dtype follows them.  On this
    problem one step of any split method is exactly a fixed linear map
    of the stage/external vector, which the tests exploit.
    """
    dtype = np.result_type(np.asarray(lambda0), np.asarray(lambda1), np.asarray(y0), float)
    lam0 = dtype.type(lambda0)
    lam1 = dtype.type(lambda1)
    y0a = np.atleast_1d(np.asarray(y0, dtype=dtype))
    rate = lam0 + lam1
    jac = np.array([[lam1]], dtype=dtype)

    def exact(t):
        return y0a * np.exp(rate * (t - t0))

    return IvpProblem(
        dimension=y0a.size,
        f=(lambda t, y: lam0 * y),
        g=(lambda t, y: lam1 * y),
        y0=y0a,
        t0=float(t0),
        tf=float(tf),
        g_jacobian=lambda t, y: jac,
        g_linear=True,
        exact=exact,
        derivatives=lambda t, k: rate**k * exact(t),
        name="linear-split",
        meta={"lambda0": lam0, "lambda1": lam1},
    )


# ---------------------------------------------------------------------------
# shallow water equations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweGrid:
    """Uniform node grid for the shallow water solver on [-3, 3]^2.

    The state vector stores (h, uh, vh) interleaved per node, nodes
    ordered line by line (x fastest): component ``c`` of node ``(i, j)``
    lives at flat index ``3 * (j * (nx + 1) + i) + c``.
    """

    nx: int
    ny: int
    g_grav: float = 9.81

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("grid needs nx, ny >= 8")
        if not self.g_grav > 0:
            raise ValueError("gravity must be positive")

    @property
    def dx(self):
        return 6.0 / self.nx

    @property
    def dy(self):
        return 6.0 / self.ny

    @property
    def n_state(self):
        return 3 * (self.nx + 1) * (self.ny + 1)

    def xs(self):
        return np.linspace(-3.0, 3.0, self.nx + 1)

    def ys(self):
        return np.linspace(-3.0, 3.0, self.ny + 1)

    def unpack(self, state):
        """Views (h, uh, vh), each shaped (ny+1, nx+1)."""
        cube = np.asarray(state).reshape(self.ny + 1, self.nx + 1, 3)
        return cube[:, :, 0], cube[:, :, 1], cube[:, :, 2]

    def pack(self, h, uh, vh):
        return np.stack([h, uh, vh], axis=-1).reshape(-1)

    def initial_state(self):
        """Lake at rest plus a Gaussian hump centered at (1/3, 2/3)."""
        X, Y = np.meshgrid(self.xs(), self.ys())
        h = initial_height(X, Y)
        z = np.zeros_like(h)
        return self.pack(h, z, z)


def initial_height(x, y):
    """Initial water height 1 + exp(-((x - 1/3)^2 + (y - 2/3)^2))."""
    return 1.0 + np.exp(-((np.asarray(x) - 1.0 / 3.0) ** 2 + (np.asarray(y) - 2.0 / 3.0) ** 2))


def _reflect(edge, comp):
    """Ghost state mirroring ``edge`` with momentum component ``comp`` negated."""
    ghost = edge.copy()
    ghost[..., comp] = -ghost[..., comp]
    return ghost


def _flux_x(w, g_grav):
    h = w[..., 0]
    uh = w[..., 1]
    vh = w[..., 2]
    out = np.empty_like(w)
    out[..., 0] = uh
    out[..., 1] = uh * uh / h + 0.5 * g_grav * h * h
    out[..., 2] = uh * vh / h
    return out


def _flux_y(w, g_grav):
    h = w[..., 0]
    uh = w[..., 1]
    vh = w[..., 2]
    out = np.empty_like(w)
    out[..., 0] = vh
    out[..., 1] = uh * vh / h
    out[..., 2] = vh * vh / h + 0.5 * g_grav * h * h
    return out


def swe_rhs(grid, state):
    """Semi-discrete right-hand side dU/dt = -div(flux) on the node grid.

    Interface states are two-point averages and the physical flux is
    evaluated on them (a predictor/corrector flux in space, second
    order).  Walls are reflective: the ghost state mirrors the wall
    node with the normal momentum negated and h and the tangential
    momentum copied, which makes the wall mass flux vanish identically,
    so the plain node sum of h is conserved exactly.

    Raises ValueError if any water height is nonpositive.
    """
    cube = np.asarray(state, dtype=float).reshape(grid.ny + 1, grid.nx + 1, 3)
    h = cube[:, :, 0]
    if np.min(h) <= 0.0:
        bad = np.unravel_index(int(np.argmin(h)), h.shape)
        raise ValueError(
            "nonpositive water height %.3e at node (i=%d, j=%d)"
            % (float(np.min(h)), bad[1], bad[0])
        )

    # x sweep: ghost columns, interface averages, flux differences
    ext = np.concatenate(
        [_reflect(cube[:, :1], 1), cube, _reflect(cube[:, -1:], 1)], axis=1
    )
    mid = 0.5 * (ext[:, :-1] + ext[:, 1:])
    fx = _flux_x(mid, grid.g_grav)
    div = (fx[:, 1:] - fx[:, :-1]) / grid.dx

    # y sweep
    ext = np.concatenate(
        [_reflect(cube[:1], 2), cube, _reflect(cube[-1:], 2)], axis=0
    )
    mid = 0.5 * (ext[:-1] + ext[1:])
    fy = _flux_y(mid, grid.g_grav)
    div += (fy[1:] - fy[:-1]) / grid.dy

    return -div.reshape(-1)


def swe_mass(grid, state):
    """Total water volume sum(h) * dx * dy."""
    h, _, _ = grid.unpack(state)
    return float(np.sum(h) * grid.dx * grid.dy)


def swe_frozen_jacobian(grid, state):
    """Banded finite-difference Jacobian of :func:`swe_rhs` at ``state``.

    The stencil couples a node only to its four edge neighbours, so
    columns are grouped by (i mod 3, j mod 3, component): 27 groups,
    each probed with one right-hand side evaluation.  Per-column
    perturbations are 1e-7 * max(1, |entry|).  Bandwidths are
    kl = ku = 3 * (nx + 1) + 2.
    """
    nxp, nyp = grid.nx + 1, grid.ny + 1
    n = 3 * nxp * nyp
    kl = ku = 3 * nxp + 2
    base = np.asarray(state, dtype=float).reshape(-1)
    if base.size != n:
        raise ValueError("state length must be %d" % n)
    f0 = swe_rhs(grid, base)
    data = np.zeros((kl + ku + 1, n))
    offsets = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))
    for a in range(3):
        ii = np.arange(a, nxp, 3)
        for b in range(3):
            jj = np.arange(b, nyp, 3)
            I, J = np.meshgrid(ii, jj)
            nodes = J * nxp + I
            for comp in range(3):
                cols = 3 * nodes + comp
                eps = 1e-7 * np.maximum(1.0, np.abs(base[cols]))
                bumped = base.copy()
                bumped[cols.ravel()] += eps.ravel()
                diff = swe_rhs(grid, bumped) - f0
                for di, dj in offsets:
                    Ir = I + di
                    Jr = J + dj
                    ok = (Ir >= 0) & (Ir < nxp) & (Jr >= 0) & (Jr < nyp)
                    if not np.any(ok):
                        continue
                    rnodes = 3 * (Jr[ok] * nxp + Ir[ok])
                    csel = cols[ok]
                    esel = eps[ok]
                    for rc in range(3):
                        rows = rnodes + rc
                        data[ku + rows - csel, csel] = diff[rows] / esel
    return BandedMatrix(n, kl, ku, data)


def shallow_water(nx, ny, g_grav=9.81, t0=0.0, tf=10.0):
    """Unsplit shallow water problem: everything in the explicit part."""
    grid = SweGrid(nx, ny, g_grav)
    return IvpProblem(
        dimension=grid.n_state,
        f=(lambda t, u: swe_rhs(grid, u)),
        g=None,
        y0=grid.initial_state(),
        t0=float(t0),
        tf=float(tf),
        name="shallow-water(%dx%d)" % (nx, ny),
        meta={"grid": grid},
    )


def swe_split(problem):
    """Split a shallow water problem around a frozen banded linearization.

    Returns a new :class:`IvpProblem` with ``g(t, U) = J U`` (implicit,
    exactly linear) and ``f(t, U) = F(U) - J U`` (explicit), where ``J``
    is the finite-difference Jacobian of the flow at the most recent
    freeze point.  ``refreeze(t, U)`` refits ``J``; steppers call it at
    the top of every step, so the linearization tracks the solution.
    By construction ``f + g`` equals the unsplit right-hand side at
    every state, not just at the freeze point.
    """
    grid = problem.meta.get("grid")
    if grid is None:
        raise ValueError("swe_split needs a problem carrying its grid")
    frozen = {"jac": swe_frozen_jacobian(grid, problem.y0)}

    def refreeze(t, u):
        frozen["jac"] = swe_frozen_jacobian(grid, u)

    return IvpProblem(
        dimension=problem.dimension,
        f=(lambda t, u: swe_rhs(grid, u) - frozen["jac"].matvec(u)),
        g=(lambda t, u: frozen["jac"].matvec(u)),
        y0=problem.y0.copy(),
        t0=problem.t0,
        tf=problem.tf,
        g_jacobian=(lambda t, u: frozen["jac"]),
        g_linear=True,
        refreeze=refreeze,
        name=problem.name + "-split",
        meta={"grid": grid, "frozen": frozen},
    )


def swe_snapshot_csv(grid, state, path):
    """Write one solution snapshot as CSV rows x,y,h,uh,vh."""
    h, uh, vh = grid.unpack(state)
    xs, ys = grid.xs(), grid.ys()
    lines = ["x,y,h,uh,vh"]
    for j, yv in enumerate(ys):
        for i, xv in enumerate(xs):
            lines.append(
                "%.17g,%.17g,%.17g,%.17g,%.17g"
                % (xv, yv, h[j, i], uh[j, i], vh[j, i])
            )
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return text
