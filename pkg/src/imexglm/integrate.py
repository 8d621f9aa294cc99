"""Time stepping for split general linear methods.

A scheme advances the pair (stage block, external block):

    Y_i^new = h * sum_j abar[i,j] f(Y_j^old) + h * sum_{j<i} astar[i,j] f(Y_j^new)
            + h * sum_{j<=i} A[i,j] g(Y_j^new) + sum_j U[i,j] y_j
    y^new   = h * (bbar f(Y^old) + bstar f(Y^new) + B g(Y^new)) + V y

so each stage costs one mildly nonlinear solve in g only, while f is
extrapolated from the previous step's stages.  The external block
approximates the weighted derivative expansion
``y_i ~ sum_k qvecs[k, i] h^k y^(k)(t)``.

Starting data comes either from the problem's derivative oracle
(then it is exact up to the oracle) or from a fine auxiliary solve over
the first step window, with the expansion derivatives recovered by
finite-difference weights.  :func:`reference_solve` provides such a
solve, and :func:`convergence_study` drives error sweeps against either
the oracle or a reference run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import catalogue
from .extrap import ImexScheme, scheme_from_beta
from .matkit import BandedMatrix, banded_lu, banded_solve, fd_weights, lu_solve
from .problems import IvpProblem

__all__ = [
    "StepperState",
    "StepCache",
    "implicit_stage_solve",
    "start",
    "step",
    "integrate",
    "solution_readoff",
    "expansion_target",
    "expansion_error",
    "reference_solve",
    "ConvergenceStudy",
    "convergence_study",
]

# default extrapolation weights for the fourth-order reference scheme;
# chosen for a wide wedge of stiff stability
_REFERENCE_BETA = (-0.00516, -0.939, 1.18, -1.71, 2.07, 0.32)


@dataclass
class StepperState:
    """Everything a step needs from the past.

    ``y`` holds the r external blocks (shape (r, d)), ``stages`` the s
    internal stage values of the step that produced ``y``, ``fvals``
    the explicit-part values at those stages and ``totals`` the full
    right-hand side there (kept so a refitted split can rebuild
    ``fvals`` without new evaluations of the flow).  ``t`` is the time
    the external blocks refer to; the next step covers [t, t + h].
    """

    n: int
    t: float
    h: float
    y: np.ndarray
    stages: np.ndarray
    fvals: np.ndarray
    totals: np.ndarray
    # time of step index 0; kept so t = t_origin + n h stays one rounding
    # away from exact no matter how many steps have run
    t_origin: float = None

    def __post_init__(self):
        if self.t_origin is None:
            self.t_origin = self.t - self.n * self.h


@dataclass
class StepCache:
    """Per-run cache of frozen stage factorizations, keyed by a_ii."""

    h: float = float("nan")
    factors: dict = field(default_factory=dict)
    valid: bool = False


class _Factor:
    """Solver for (I - w J) with J dense or banded."""

    def __init__(self, jac, w):
        if isinstance(jac, BandedMatrix):
            self._banded = banded_lu(jac.scaled_shifted(-w, 1.0))
            self._dense = None
        else:
            jac = np.asarray(jac)
            self._banded = None
            self._dense = np.eye(jac.shape[0], dtype=np.result_type(jac.dtype, type(w))) - w * jac

    def solve(self, rhs):
        if self._banded is not None:
            return banded_solve(self._banded, rhs)
        return lu_solve(self._dense, rhs)


def implicit_stage_solve(problem, t, a_ii, h, rhs, guess, factor=None):
    """Solve ``Y - h a_ii g(t, Y) = rhs`` for one stage value.

    ``a_ii`` must be positive.  For ``g_linear`` problems this is one
    linear solve with the frozen Jacobian; otherwise a modified Newton
    iteration with that frozen Jacobian runs to a relative update size
    of 1e-12 (at most 50 sweeps).  ``factor`` may carry a prebuilt
    solver for (I - h a_ii J); without it the Jacobian is evaluated at
    ``guess``.  Returns (stage value, g at the stage value).
    """
    if not a_ii > 0:
        raise ValueError("implicit stage weight must be positive")
    if problem.g is None:
        y = np.asarray(rhs).copy()
        return y, np.zeros_like(y)
    if factor is None:
        factor = _Factor(problem.g_jacobian(t, guess), h * a_ii)
    if problem.g_linear:
        y = factor.solve(np.asarray(rhs))
        return y, problem.g(t, y)
    y = np.asarray(guess).astype(np.result_type(np.asarray(rhs).dtype, float), copy=True)
    rhs = np.asarray(rhs)
    for _ in range(50):
        gy = problem.g(t, y)
        dy = factor.solve(rhs + (h * a_ii) * gy - y)
        y = y + dy
        if np.max(np.abs(dy)) <= 1e-12 * (1.0 + np.max(np.abs(y))):
            return y, problem.g(t, y)
    raise RuntimeError("stage iteration did not converge in 50 sweeps (t=%g)" % t)


def _state_dtype(problem):
    probes = [np.asarray(problem.y0)]
    return np.result_type(float, *[p.dtype for p in probes])


def _eval_f(problem, t, y):
    if problem.f is None:
        return np.zeros_like(y)
    return problem.f(t, y)


def _stencil_nodes(t1, t0, h, p):
    """2p+1 derivative-stencil times with spacing h/2, centered on t1
    when that fits into [t0, inf), otherwise shifted right to start at t0."""
    offs = (np.arange(2 * p + 1) - p) * (0.5 * h)
    nodes = t1 + offs
    if nodes[0] < t0 - 1e-12 * max(1.0, abs(t0)):
        nodes = nodes + (t0 - nodes[0])
    return nodes


def _expansion_from_samples(tab, h, t_eval, times, values):
    """External blocks from sampled solution values around t_eval."""
    r = tab.V.shape[0]
    d = values.shape[1]
    y = np.zeros((r, d), dtype=values.dtype)
    hpow = 1.0
    for k in range(tab.p + 1):
        wk = fd_weights(times - t_eval, k)
        deriv = wk @ values
        y += np.outer(tab.qvecs[k], deriv) * hpow
        hpow *= h
    return y


def start(problem, scheme, h, h_ref=None):
    """Starting data for stepping ``problem`` with ``scheme`` at step h.

    With a derivative oracle on the problem, the external blocks are the
    exact truncated expansions at t0 and the stage block holds exact
    solution values at t0 + (c_j - 1) h; stepping then begins at t0.
    Otherwise an auxiliary fine solve covers the first step: stepping
    begins at t1 = t0 + h with stage values read from the reference at
    t0 + c_j h and external blocks built from finite-difference
    derivatives of the reference (2p+1 points, spacing h/2).
    """
    tab = scheme.base
    s, r = tab.s, tab.r
    d = problem.dimension
    if not h > 0:
        raise ValueError("step size must be positive")
    if problem.exact is not None and problem.derivatives is not None:
        t_start = problem.t0
        dtype = np.result_type(_state_dtype(problem), problem.derivatives(t_start, 0).dtype)
        y = np.zeros((r, d), dtype=dtype)
        hpow = 1.0
        for k in range(tab.p + 1):
            y += np.outer(tab.qvecs[k], problem.derivatives(t_start, k)) * hpow
            hpow *= h
        stages = np.stack([np.asarray(problem.exact(t_start + (cj - 1.0) * h)) for cj in tab.c])
        n0 = 0
        origin = float(t_start)
    else:
        t1 = problem.t0 + h
        nodes = _stencil_nodes(t1, problem.t0, h, tab.p)
        stage_times = problem.t0 + tab.c * h
        times = np.unique(np.concatenate([nodes, stage_times]))
        samples = reference_solve(problem, times, h_ref=(h / 96.0 if h_ref is None else h_ref))
        lookup = {round(float(t) / h, 12): samples[i] for i, t in enumerate(times)}
        stages = np.stack([lookup[round(float(t) / h, 12)] for t in stage_times])
        node_vals = np.stack([lookup[round(float(t) / h, 12)] for t in nodes])
        y = _expansion_from_samples(tab, h, t1, nodes, node_vals)
        t_start = t1
        n0 = 1
        origin = float(problem.t0)
    prev_times = t_start + (tab.c - 1.0) * h
    fvals = np.stack([_eval_f(problem, prev_times[j], stages[j]) for j in range(s)])
    if problem.g is None:
        totals = fvals.copy()
    else:
        totals = fvals + np.stack([problem.g(prev_times[j], stages[j]) for j in range(s)])
    dtype = np.result_type(y.dtype, stages.dtype, fvals.dtype)
    return StepperState(
        n=n0,
        t=float(t_start),
        h=float(h),
        y=y.astype(dtype),
        stages=stages.astype(dtype),
        fvals=fvals.astype(dtype),
        totals=totals.astype(dtype),
        t_origin=origin,
    )


def _refresh_cache(problem, tab, state, cache):
    cache.factors.clear()
    if problem.g is not None:
        jac = problem.g_jacobian(state.t, state.y[0])
        for aii in sorted(set(np.diag(tab.A))):
            if aii > 0:
                cache.factors[aii] = _Factor(jac, state.h * aii)
    cache.h = state.h
    cache.valid = True


def step(problem, scheme, state, cache=None):
    """Advance one step of size ``state.h`` from ``state``.

    If the problem carries a ``refreeze`` hook it runs first (the split
    is refitted at the step's entry state) and the cached explicit-part
    values of the previous stages are rebuilt from the stored full
    right-hand side values, keeping the extrapolation consistent with
    the new split.
    """
    tab = scheme.base
    s = tab.s
    h = state.h
    tn = state.t
    if cache is None:
        cache = StepCache()
    if problem.refreeze is not None:
        problem.refreeze(tn, state.y[0])
        prev_times = tn + (tab.c - 1.0) * h
        gprev = np.stack([problem.g(prev_times[j], state.stages[j]) for j in range(s)])
        state = replace(state, fvals=state.totals - gprev)
        cache.valid = False
    if not cache.valid or cache.h != h:
        _refresh_cache(problem, tab, state, cache)

    dtype = state.y.dtype
    ext = h * (scheme.abar @ state.fvals) + tab.U @ state.y
    stages = np.zeros((s, state.y.shape[1]), dtype=dtype)
    fnew = np.zeros_like(stages)
    gnew = np.zeros_like(stages)
    for i in range(s):
        rhs = ext[i].copy()
        if i:
            rhs += h * (scheme.astar[i, :i] @ fnew[:i] + tab.A[i, :i] @ gnew[:i])
        ti = tn + tab.c[i] * h
        if problem.g is None:
            stages[i] = rhs
        else:
            stages[i], gnew[i] = implicit_stage_solve(
                problem, ti, tab.A[i, i], h, rhs, state.stages[i],
                factor=cache.factors.get(tab.A[i, i]),
            )
        fnew[i] = _eval_f(problem, ti, stages[i])
    ynew = h * (scheme.bbar @ state.fvals + scheme.bstar @ fnew + tab.B @ gnew) + tab.V @ state.y
    return StepperState(
        n=state.n + 1,
        t=state.t_origin + (state.n + 1) * h,
        h=h,
        y=ynew,
        stages=stages,
        fvals=fnew,
        totals=fnew + gnew,
        t_origin=state.t_origin,
    )


def _count_steps(span, h):
    ratio = span / h
    n = int(round(ratio))
    if n < 0 or abs(ratio - n) > 2.0 * np.spacing(max(1.0, abs(ratio))):
        raise ValueError("step size %g does not divide the interval of length %g" % (h, span))
    return n


def integrate(problem, scheme, h, t_end=None, trace=None, h_ref=None):
    """Run ``scheme`` from the starting data to ``t_end`` (default tf).

    The step size must divide the remaining interval to within a couple
    of ulps.  ``trace(n, t, norm)`` is called after every step with the
    step index, the new time and the 2-norm of the external vector.
    Returns the final :class:`StepperState`.
    """
    t_end = problem.tf if t_end is None else float(t_end)
    state = start(problem, scheme, h, h_ref=h_ref)
    n_steps = _count_steps(t_end - state.t, state.h)
    cache = StepCache()
    for _ in range(n_steps):
        state = step(problem, scheme, state, cache)
        if trace is not None:
            trace(state.n, state.t, float(np.linalg.norm(state.y.ravel())))
    return state


def solution_readoff(scheme, state):
    """Best solution value at ``state.t`` from the external blocks.

    If some external block has the pure value pattern (weight 1 on the
    solution, 0 on every stored derivative) it is returned directly.
    Otherwise the leading r expansion rows are solved for the solution
    component, which removes the stored derivative contributions up to
    the method's order.
    """
    tab = scheme.base
    q = tab.qvecs
    r = q.shape[1]
    pure = np.flatnonzero(
        (np.abs(q[0] - 1.0) <= 1e-13) & (np.max(np.abs(q[1:]), axis=0) <= 1e-13)
    )
    if pure.size:
        return state.y[pure[0]].copy()
    lead = q[: min(q.shape[0], r), :].astype(float)
    rhs = np.zeros(lead.shape[0])
    rhs[0] = 1.0
    if lead.shape[0] == lead.shape[1]:
        w = lu_solve(lead, rhs)
    else:
        w = np.linalg.lstsq(lead, rhs, rcond=None)[0]
    return w @ state.y


def expansion_target(scheme, problem, t, h):
    """Oracle external blocks sum_k qvecs[k] h^k y^(k)(t)."""
    if problem.derivatives is None:
        raise ValueError("problem has no derivative oracle")
    tab = scheme.base
    y = np.zeros((tab.V.shape[0], problem.dimension), dtype=_state_dtype(problem))
    hpow = 1.0
    for k in range(tab.p + 1):
        y = y + np.outer(tab.qvecs[k], problem.derivatives(t, k)) * hpow
        hpow *= h
    return y


def expansion_error(scheme, problem, state):
    """2-norm distance of the external vector from its oracle expansion."""
    target = expansion_target(scheme, problem, state.t, state.h)
    return float(np.linalg.norm((state.y - target).ravel()))


def _rk4_march(problem, t0, y0, h, n):
    """Classical explicit RK sweep on f+g; returns n+1 states."""
    out = np.zeros((n + 1, y0.size), dtype=np.result_type(y0.dtype, float))
    out[0] = y0
    t, y = t0, np.asarray(y0).astype(out.dtype, copy=True)
    for m in range(n):
        k1 = problem.total(t, y)
        k2 = problem.total(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = problem.total(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = problem.total(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        out[m + 1] = y
    return out


def _default_reference_scheme():
    return scheme_from_beta(catalogue.dimsim4(), np.asarray(_REFERENCE_BETA))


def reference_solve(problem, times, h_ref=None, scheme=None):
    """High-accuracy solution values at the requested times.

    Marches a fourth-order split scheme at the fine step ``h_ref``
    (default: the problem interval divided by 2**17) and reads the
    solution off whenever the march passes a requested time, which must
    therefore sit on the h_ref grid (t0 itself is always available).
    Starting data for the march is bootstrapped with a few explicit
    substeps over the first reference step, so h_ref must resolve the
    full right-hand side explicitly.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    order = np.argsort(times)
    if scheme is None:
        scheme = _default_reference_scheme()
    tab = scheme.base
    if h_ref is None:
        h_ref = (problem.tf - problem.t0) / 2.0**17
    if not h_ref > 0:
        raise ValueError("reference step must be positive")
    t0 = problem.t0
    for t in times:
        if t < t0 - 1e-12:
            raise ValueError("requested time %g precedes t0" % t)
        k = (t - t0) / h_ref
        if abs(k - round(k)) > 64.0 * np.spacing(max(1.0, abs(k))):
            raise ValueError("requested time %g is off the reference grid" % t)

    out = np.zeros((times.size, problem.dimension), dtype=_state_dtype(problem))
    remaining = list(order)
    while remaining and abs(times[remaining[0]] - t0) <= 1e-12 * max(1.0, abs(t0)):
        out[remaining.pop(0)] = problem.y0

    if not remaining:
        return out

    # bootstrap: explicit substeps over the first reference step window
    p = tab.p
    sub = h_ref / 6.0
    span = _stencil_nodes(t0 + h_ref, t0, h_ref, p)[-1] - t0
    n_sub = int(round(span / sub))
    boot = _rk4_march(problem, t0, problem.y0, sub, n_sub)
    boot_times = t0 + sub * np.arange(n_sub + 1)

    def boot_at(t):
        idx = int(round((t - t0) / sub))
        return boot[idx]

    t1 = t0 + h_ref
    nodes = _stencil_nodes(t1, t0, h_ref, p)
    y = _expansion_from_samples(
        tab, h_ref, t1, nodes, np.stack([boot_at(t) for t in nodes])
    )
    stage_times = t0 + tab.c * h_ref
    stages = np.stack([boot_at(t) for t in stage_times])
    prev_times = t1 + (tab.c - 1.0) * h_ref
    fvals = np.stack([_eval_f(problem, prev_times[j], stages[j]) for j in range(tab.s)])
    if problem.g is None:
        totals = fvals.copy()
    else:
        totals = fvals + np.stack(
            [problem.g(prev_times[j], stages[j]) for j in range(tab.s)]
        )
    state = StepperState(1, t1, h_ref, y, stages, fvals, totals, t_origin=t0)
    del boot, boot_times

    cache = StepCache()
    for idx in remaining:
        # grid indices were validated on entry, so step counts are exact
        k_target = int(round((times[idx] - t0) / h_ref))
        for _ in range(k_target - state.n):
            state = step(problem, scheme, state, cache)
        out[idx] = solution_readoff(scheme, state)
    return out


@dataclass
class ConvergenceStudy:
    """Errors and fitted rates of an h-sweep, exportable as CSV/JSON."""

    labels: list
    h_values: dict
    errors: dict
    slopes: dict
    meta: dict = field(default_factory=dict)

    def to_csv(self):
        lines = ["scheme,h,error,slope"]
        for label in self.labels:
            for h, e in zip(self.h_values[label], self.errors[label]):
                lines.append(
                    "%s,%.17g,%.17g,%.17g" % (label, h, e, self.slopes[label])
                )
        return "\n".join(lines) + "\n"

    def to_json(self):
        payload = {
            "schemes": [
                {
                    "label": label,
                    "h": list(map(float, self.h_values[label])),
                    "error": list(map(float, self.errors[label])),
                    "slope": float(self.slopes[label]),
                }
                for label in self.labels
            ],
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def write(self, csv_path=None, json_path=None):
        if csv_path is not None:
            with open(csv_path, "w") as fh:
                fh.write(self.to_csv())
        if json_path is not None:
            with open(json_path, "w") as fh:
                fh.write(self.to_json())


def _mesh_times(problem, h, t_end):
    """Times visited by a run at step h, matching state.t bit for bit."""
    t_start = problem.t0 if (problem.exact is not None and problem.derivatives is not None) else problem.t0 + h
    n = _count_steps(t_end - t_start, h)
    n0 = 0 if t_start == problem.t0 else 1
    return problem.t0 + (n0 + np.arange(1, n + 1)) * h


def convergence_study(
    problem,
    schemes,
    h_list,
    t_end=None,
    reference_problem=None,
    h_ref=None,
    reference_scheme=None,
    error="max",
):
    """Error sweep over step sizes for one or more schemes.

    ``schemes`` is an iterable of (label, scheme) pairs.  Each run's
    error compares the solution read-off against the truth -- the
    problem's exact solution when it has one, otherwise a reference
    solve (``reference_problem`` may supply an equivalent formulation
    better suited for the fine march, e.g. the unsplit flow).
    ``error="max"`` takes the worst 2-norm distance over all steps of
    the run, ``error="terminal"`` only the distance at t_end.  When a
    reference is used it is rerun with a halved step and its terminal
    value must agree to within 1e-2 of the smallest observed error,
    otherwise the study aborts.  The fitted slope is the least-squares
    slope of log(error) against log(h).
    """
    if error not in ("max", "terminal"):
        raise ValueError("error must be 'max' or 'terminal'")
    schemes = list(schemes)
    h_arr = np.sort(np.asarray(h_list, dtype=float))[::-1]
    t_end = problem.tf if t_end is None else float(t_end)

    ref_check = None
    truth = None
    if problem.exact is not None:
        truth = lambda t: np.asarray(problem.exact(t))
    else:
        ref_prob = problem if reference_problem is None else reference_problem
        href = (np.min(h_arr) / 96.0) if h_ref is None else h_ref
        if error == "max":
            times = np.unique(np.concatenate([_mesh_times(problem, h, t_end) for h in h_arr]))
        else:
            times = np.array([t_end])
        ref_vals = reference_solve(ref_prob, times, h_ref=href, scheme=reference_scheme)
        lookup = {float(t): ref_vals[i] for i, t in enumerate(times)}
        truth = lambda t: lookup[float(t)]
        ref_check = reference_solve(ref_prob, [t_end], h_ref=href / 2.0, scheme=reference_scheme)[0]

    labels = []
    h_values, errors, slopes = {}, {}, {}
    for label, scheme in schemes:
        labels.append(label)
        errs = []
        for h in h_arr:
            state = start(problem, scheme, h)
            n_steps = _count_steps(t_end - state.t, state.h)
            cache = StepCache()
            worst = 0.0
            for k in range(n_steps):
                state = step(problem, scheme, state, cache)
                if error == "max" or k == n_steps - 1:
                    dist = float(
                        np.linalg.norm(solution_readoff(scheme, state) - truth(state.t))
                    )
                    worst = dist if error == "terminal" else max(worst, dist)
            errs.append(worst)
        errs = np.asarray(errs)
        h_values[label] = h_arr.copy()
        errors[label] = errs
        good = errs > 0
        slopes[label] = (
            float(np.polyfit(np.log(h_arr[good]), np.log(errs[good]), 1)[0])
            if np.count_nonzero(good) >= 2
            else float("nan")
        )

    meta = {"t_end": t_end, "error": error}
    if ref_check is not None:
        drift = float(np.linalg.norm(ref_check - truth(t_end)))
        smallest = min(float(np.min(errors[lb])) for lb in labels)
        meta["reference_drift"] = drift
        if drift > 1e-2 * smallest:
            raise RuntimeError(
                "reference resolution insufficient: drift %.3e vs smallest error %.3e"
                % (drift, smallest)
            )
    return ConvergenceStudy(labels, h_values, errors, slopes, meta)
