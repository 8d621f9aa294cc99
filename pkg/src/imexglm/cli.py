"""Command line front end: method checks, stability scans, optimization,
integration, and convergence studies with file outputs.

Every command reads its settings from flags, optionally merged over a
JSON config file (flags win, unknown file keys are rejected), and the
fully merged settings are printable with --print-config.  Exit codes:
0 success, 1 validation failure, 2 numerical failure.  CSV output uses
'.' as the decimal mark, ',' as the separator, a header row, and 17
significant digits so identical configs produce identical bytes.
"""

import argparse
import json
import math
import os
import re
import sys

import numpy as np

from . import catalogue
from .extrap import scheme_from_beta, explicit_two_step_glm
from .glm import (
    order_residual,
    stage_order_residual,
    tableau_from_json,
    tableau_to_json,
)
from .integrate import convergence_study, integrate, solution_readoff
from .problems import (
    linear_split,
    prothero_robinson,
    shallow_water,
    swe_snapshot_csv,
    swe_split,
)
from .stability import (
    RegionScan,
    boundary_locus,
    optimize_beta,
    region_area,
)

OK = 0
FAIL_VALIDATION = 1
FAIL_NUMERICAL = 2

# wedge-optimized extrapolation parameters used when --beta is omitted
SECTOR_BETA = {
    "theta": None,
    "dimsim2": [4.64],
    "dimsim3": [1.39, -0.146, 1.24],
    "dimsim4": [-0.00516, -0.939, 1.18, -1.71, 2.07, 0.32],
}

_ORDER_FAMILY = {1: "theta", 2: "dimsim2", 3: "dimsim3", 4: "dimsim4"}


class _UsageError(Exception):
    """Configuration or input problem; maps to exit code 1."""


class _NumericalError(Exception):
    """Failure while computing; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting and accepts bare
    negative values like -1e6 or -0.1,-0.2 (no single-dash options exist)."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-[0-9.]")

    def error(self, message):
        raise _UsageError(message)


def _numerical(fn, *args, **kwargs):
    """Run one computational call, converting failures to exit code 2."""
    try:
        return fn(*args, **kwargs)
    except _UsageError:
        raise
    except Exception as exc:
        raise _NumericalError(f"{type(exc).__name__}: {exc}") from exc


# ---------------------------------------------------------------------------
# value parsing


def parse_angle(value):
    """Angle in radians from a float or a 'pi'-style string like '3pi/4'."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip().lower().replace(" ", "").replace("*", "")
    if s in ("none", "null", "explicit", ""):
        return None
    try:
        return float(s)
    except ValueError:
        pass
    m = re.fullmatch(r"(-)?(\d+(?:\.\d*)?)?pi(?:/(\d+(?:\.\d*)?))?", s)
    if m is None:
        raise _UsageError(f"cannot parse angle {value!r}")
    coef = float(m.group(2)) if m.group(2) else 1.0
    if m.group(1):
        coef = -coef
    den = float(m.group(3)) if m.group(3) else 1.0
    return coef * math.pi / den


def _parse_complex(value, label):
    if isinstance(value, (int, float, complex)):
        return complex(value)
    try:
        return complex(str(value).strip().replace(" ", ""))
    except ValueError:
        raise _UsageError(f"cannot parse {label} as a complex number: {value!r}")


def _parse_floats(value, label):
    if value is None:
        return None
    if isinstance(value, (list, tuple, np.ndarray)):
        return [float(v) for v in value]
    try:
        return [float(tok) for tok in str(value).split(",") if tok.strip()]
    except ValueError:
        raise _UsageError(f"cannot parse {label} as comma-separated floats: {value!r}")


def _parse_orders(value):
    if isinstance(value, (list, tuple)):
        orders = [int(v) for v in value]
    else:
        try:
            orders = [int(tok) for tok in str(value).split(",") if tok.strip()]
        except ValueError:
            raise _UsageError(f"cannot parse orders: {value!r}")
    bad = [p for p in orders if p not in _ORDER_FAMILY]
    if bad or not orders:
        raise _UsageError(f"orders must be a nonempty subset of 1,2,3,4 (got {value!r})")
    return orders


def _fmt(x):
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# defaults and parser


_METHOD_KEYS = {"family": None, "param": None, "beta": None}
_PROBLEM_KEYS = {
    "problem": "pr",
    "mu": "-1e6",
    "forcing_in_g": False,
    "lambda0": "-2.0",
    "lambda1": "-1e3",
    "y0": "1.0",
    "t0": 0.0,
    "tf": None,
    "nx": 20,
    "ny": 20,
    "g_grav": 9.81,
    "split": True,
}
_SCAN_KEYS = {
    "x_min": -6.0,
    "x_max": 1.0,
    "y_min": -4.0,
    "y_max": 4.0,
    "delta": 0.02,
    "sector_y_max": 8.0,
    "sector_y_step": 0.05,
    "golden_iters": 18,
    "workers": None,
}

DEFAULTS = {
    "check": {**_METHOD_KEYS, "tableau": None, "tol": 1e-8},
    "tableau": {**_METHOD_KEYS, "partner": False, "out": None},
    "region": {
        **_METHOD_KEYS,
        **_SCAN_KEYS,
        "alpha": None,
        "boundary_rays": 0,
        "out_json": None,
        "out_boundary": None,
        "out_raster": None,
        "out_svg": None,
    },
    "locus": {
        **_METHOD_KEYS,
        "alpha": "pi/2",
        "y": 0.0,
        "samples": 256,
        "turns": 1,
        "workers": None,
        "out_csv": None,
        "out_svg": None,
    },
    "optimize": {
        **_METHOD_KEYS,
        "alpha": None,
        "seed": None,
        "param0": None,
        "budget": 200,
        "delta": 0.05,
        "sector_y_step": 0.2,
        "golden_iters": 10,
        "workers": None,
        "out_json": None,
    },
    "integrate": {
        **_METHOD_KEYS,
        **_PROBLEM_KEYS,
        "h": None,
        "t_end": None,
        "h_ref": None,
        "snapshot": None,
        "out_json": None,
    },
    "converge": {
        **_METHOD_KEYS,
        **_PROBLEM_KEYS,
        "orders": [1, 2, 3, 4],
        "h_list": None,
        "t_end": None,
        "h_ref": None,
        "error": "max",
        "out_csv": None,
        "out_json": None,
    },
}


def _add_common(sp):
    sp.add_argument("--config", default=None, help="JSON config file; flags override it")
    sp.add_argument("--print-config", action="store_true", default=False,
                    help="print the merged settings and exit")


def _add_method(sp):
    sp.add_argument("--method", dest="family", default=argparse.SUPPRESS,
                    choices=sorted(catalogue.FAMILIES))
    sp.add_argument("--theta", "--lambda", dest="param", type=float,
                    default=argparse.SUPPRESS,
                    help="free parameter of the parametric families")
    sp.add_argument("--beta", default=argparse.SUPPRESS,
                    help="comma-separated extrapolation parameters")


def _add_problem(sp):
    sp.add_argument("--problem", default=argparse.SUPPRESS,
                    choices=["pr", "linear", "swe"])
    sp.add_argument("--mu", default=argparse.SUPPRESS,
                    help="stiffness parameter (complex, Re<0)")
    sp.add_argument("--forcing-in-g", dest="forcing_in_g",
                    action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
    sp.add_argument("--lambda0", default=argparse.SUPPRESS)
    sp.add_argument("--lambda1", default=argparse.SUPPRESS)
    sp.add_argument("--y0", default=argparse.SUPPRESS)
    sp.add_argument("--t0", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--tf", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--nx", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--ny", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--g-grav", dest="g_grav", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--split", action=argparse.BooleanOptionalAction,
                    default=argparse.SUPPRESS)


def _add_scan(sp, keys=_SCAN_KEYS):
    for key in keys:
        if key == "workers":
            sp.add_argument("--workers", type=int, default=argparse.SUPPRESS)
        elif key in ("golden_iters",):
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=int,
                            default=argparse.SUPPRESS)
        else:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=float,
                            default=argparse.SUPPRESS)


def build_parser():
    parser = _Parser(prog="imexglm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    sp = sub.add_parser("check", help="order-condition residual report")
    _add_method(sp)
    sp.add_argument("--tableau", default=argparse.SUPPRESS,
                    help="JSON tableau file to check instead of a catalogue method")
    sp.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    _add_common(sp)

    sp = sub.add_parser("tableau", help="export a method tableau as JSON")
    _add_method(sp)
    sp.add_argument("--partner", action=argparse.BooleanOptionalAction,
                    default=argparse.SUPPRESS,
                    help="export the explicit two-step partner instead")
    sp.add_argument("--out", default=argparse.SUPPRESS)
    _add_common(sp)

    sp = sub.add_parser("region", help="stability region area and boundary files")
    _add_method(sp)
    sp.add_argument("--alpha", default=argparse.SUPPRESS,
                    help="sector half-angle in radians (accepts 'pi/2'); omit for the explicit region")
    _add_scan(sp)
    sp.add_argument("--boundary-rays", dest="boundary_rays", type=int,
                    default=argparse.SUPPRESS)
    sp.add_argument("--out-json", dest="out_json", default=argparse.SUPPRESS)
    sp.add_argument("--out-boundary", dest="out_boundary", default=argparse.SUPPRESS)
    sp.add_argument("--out-raster", dest="out_raster", default=argparse.SUPPRESS)
    sp.add_argument("--out-svg", dest="out_svg", default=argparse.SUPPRESS)
    _add_common(sp)

    sp = sub.add_parser("locus", help="stability boundary root locus CSV")
    _add_method(sp)
    sp.add_argument("--alpha", default=argparse.SUPPRESS)
    sp.add_argument("--y", type=float, default=argparse.SUPPRESS,
                    help="sector boundary parameter for the implicit argument")
    sp.add_argument("--samples", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--turns", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--out-csv", dest="out_csv", default=argparse.SUPPRESS)
    sp.add_argument("--out-svg", dest="out_svg", default=argparse.SUPPRESS)
    _add_common(sp)

    sp = sub.add_parser("optimize", help="maximize a region area over beta")
    _add_method(sp)
    sp.add_argument("--alpha", default=argparse.SUPPRESS)
    sp.add_argument("--seed", default=argparse.SUPPRESS,
                    help="comma-separated starting beta (default zeros)")
    sp.add_argument("--param0", type=float, default=argparse.SUPPRESS,
                    help="optimize the family parameter jointly, seeded here")
    sp.add_argument("--budget", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--delta", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--sector-y-step", dest="sector_y_step", type=float,
                    default=argparse.SUPPRESS)
    sp.add_argument("--golden-iters", dest="golden_iters", type=int,
                    default=argparse.SUPPRESS)
    sp.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--out-json", dest="out_json", default=argparse.SUPPRESS)
    _add_common(sp)

    sp = sub.add_parser("integrate", help="run one integration")
    _add_method(sp)
    _add_problem(sp)
    sp.add_argument("--h", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--t-end", dest="t_end", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--h-ref", dest="h_ref", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--snapshot", default=argparse.SUPPRESS,
                    help="write the final grid state as CSV (grid problems)")
    sp.add_argument("--out-json", dest="out_json", default=argparse.SUPPRESS)
    _add_common(sp)

    sp = sub.add_parser("converge", help="error-vs-h study")
    _add_method(sp)
    _add_problem(sp)
    sp.add_argument("--orders", default=argparse.SUPPRESS,
                    help="comma-separated orders (default 1,2,3,4); ignored when --method is given")
    sp.add_argument("--h-list", dest="h_list", default=argparse.SUPPRESS)
    sp.add_argument("--t-end", dest="t_end", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--h-ref", dest="h_ref", type=float, default=argparse.SUPPRESS)
    sp.add_argument("--error", choices=["max", "terminal"], default=argparse.SUPPRESS)
    sp.add_argument("--out-csv", dest="out_csv", default=argparse.SUPPRESS)
    sp.add_argument("--out-json", dest="out_json", default=argparse.SUPPRESS)
    _add_common(sp)

    return parser


def _merge_config(command, ns):
    cfg = dict(DEFAULTS[command])
    path = getattr(ns, "config", None)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _UsageError(f"cannot read config {path!r}: {exc}")
        if not isinstance(loaded, dict):
            raise _UsageError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise _UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update(loaded)
    for key, value in vars(ns).items():
        if key in ("command", "config", "print_config"):
            continue
        if key not in cfg:
            raise _UsageError(f"flag {key!r} is not valid for {command}")
        cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# shared builders


def _build_tableau(cfg):
    family = cfg.get("family")
    if family is None:
        raise _UsageError("--method is required")
    param = cfg.get("param")
    return catalogue.get_method(family, param)


def _build_scheme(cfg):
    tab = _build_tableau(cfg)
    beta = cfg.get("beta")
    if beta is None:
        beta = SECTOR_BETA.get(cfg["family"])
    else:
        beta = _parse_floats(beta, "beta")
    return scheme_from_beta(tab, None if beta is None else np.asarray(beta, dtype=float))


def _build_problem(cfg):
    """Returns (problem, reference_problem_or_None, grid_or_None)."""
    kind = cfg["problem"]
    t0 = float(cfg["t0"])
    tf = cfg["tf"]
    if kind == "pr":
        mu = _parse_complex(cfg["mu"], "mu")
        prob = prothero_robinson(mu, t0=t0, tf=10.0 if tf is None else float(tf),
                                 forcing_in_g=bool(cfg["forcing_in_g"]))
        return prob, None, None
    if kind == "linear":
        lam0 = _parse_complex(cfg["lambda0"], "lambda0")
        lam1 = _parse_complex(cfg["lambda1"], "lambda1")
        y0 = _parse_complex(cfg["y0"], "y0")
        prob = linear_split(lam0, lam1, y0=y0, t0=t0,
                            tf=1.0 if tf is None else float(tf))
        return prob, None, None
    if kind == "swe":
        full = shallow_water(int(cfg["nx"]), int(cfg["ny"]),
                             g_grav=float(cfg["g_grav"]), t0=t0,
                             tf=10.0 if tf is None else float(tf))
        grid = full.meta["grid"]
        if cfg["split"]:
            return swe_split(full), full, grid
        return full, None, grid
    raise _UsageError(f"unknown problem {kind!r}")


def _apply_workers(cfg):
    workers = cfg.get("workers")
    if workers is not None:
        os.environ["IMEXGLM_WORKERS"] = str(int(workers))


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _points_csv(points, tags):
    lines = ["re,im,tag"]
    for z, tag in zip(points, tags):
        lines.append("%s,%s,%s" % (_fmt(z.real), _fmt(z.imag), _fmt(tag)))
    return "\n".join(lines) + "\n"


def _write_svg(path, points, size=480.0):
    """Minimal scatter rendering of complex boundary points."""
    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        raise _UsageError("no points to render")
    re_lo = min(float(np.min(pts.real)), 0.0)
    re_hi = max(float(np.max(pts.real)), 0.0)
    im_lo = min(float(np.min(pts.imag)), 0.0)
    im_hi = max(float(np.max(pts.imag)), 0.0)
    pad = 0.05 * max(re_hi - re_lo, im_hi - im_lo, 1e-3)
    re_lo, re_hi = re_lo - pad, re_hi + pad
    im_lo, im_hi = im_lo - pad, im_hi + pad
    scale = size / max(re_hi - re_lo, im_hi - im_lo)
    width = (re_hi - re_lo) * scale
    height = (im_hi - im_lo) * scale

    def sx(x):
        return (x - re_lo) * scale

    def sy(y):
        return (im_hi - y) * scale

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 %.2f %.2f">'
        % (width, height),
        '<rect width="100%" height="100%" fill="white"/>',
        '<line x1="%.2f" y1="0" x2="%.2f" y2="%.2f" stroke="#bbbbbb"/>'
        % (sx(0.0), sx(0.0), height),
        '<line x1="0" y1="%.2f" x2="%.2f" y2="%.2f" stroke="#bbbbbb"/>'
        % (sy(0.0), width, sy(0.0)),
    ]
    for z in pts:
        parts.append('<circle cx="%.2f" cy="%.2f" r="1.5" fill="#205080"/>'
                     % (sx(z.real), sy(z.imag)))
    parts.append("</svg>\n")
    _write_text(path, "\n".join(parts))


def _params_dict(cfg, scheme):
    out = {}
    fam = catalogue.FAMILIES[cfg["family"]]
    if fam.param_name is not None:
        param = cfg.get("param")
        out[fam.param_name] = float(param if param is not None else fam.param_default)
    out["beta"] = [float(b) for b in scheme.beta_flat]
    return out


# ---------------------------------------------------------------------------
# command handlers


def cmd_check(cfg):
    if cfg.get("tableau") is not None:
        try:
            with open(cfg["tableau"]) as fh:
                tab = tableau_from_json(fh.read())
        except (OSError, ValueError) as exc:
            print(f"error: bad tableau file: {exc}", file=sys.stderr)
            return FAIL_VALIDATION
    else:
        tab = _build_tableau(cfg)
    tol = float(cfg["tol"])
    worst = 0.0
    lines = []
    for kind, count, residual in (
        ("stage-order", tab.q, stage_order_residual),
        ("order", tab.p, order_residual),
    ):
        for k in range(count + 1):
            r = float(np.max(np.abs(residual(tab, k))))
            worst = max(worst, r)
            lines.append("%-11s k=%d  residual %.3e  %s"
                         % (kind, k, r, "pass" if r <= tol else "FAIL"))
    lines.append("max residual %.3e" % worst)
    print("\n".join(lines))
    return OK if worst <= tol else FAIL_VALIDATION


def cmd_tableau(cfg):
    if cfg.get("partner"):
        scheme = _build_scheme(cfg)
        tab = explicit_two_step_glm(scheme)
    else:
        tab = _build_tableau(cfg)
    _write_text(cfg.get("out"), tableau_to_json(tab) + "\n")
    return OK


def cmd_region(cfg):
    _apply_workers(cfg)
    scheme = _build_scheme(cfg)
    alpha = parse_angle(cfg.get("alpha"))
    scan = RegionScan(
        x_min=float(cfg["x_min"]), x_max=float(cfg["x_max"]),
        y_min=float(cfg["y_min"]), y_max=float(cfg["y_max"]),
        delta=float(cfg["delta"]), sector_y_max=float(cfg["sector_y_max"]),
        sector_y_step=float(cfg["sector_y_step"]),
        golden_iters=int(cfg["golden_iters"]),
    )
    rays = int(cfg["boundary_rays"])
    if rays == 0 and (cfg.get("out_boundary") or cfg.get("out_svg")):
        rays = 128
    result = _numerical(region_area, scheme, alpha, scan=scan, boundary_rays=rays)
    print("area %s" % _fmt(result.area))
    if cfg.get("out_json") is not None:
        settings = {
            "x_min": scan.x_min, "x_max": scan.x_max,
            "y_min": scan.y_min, "y_max": scan.y_max,
            "delta": scan.delta, "sector_y_max": scan.sector_y_max,
            "sector_y_step": scan.sector_y_step,
            "golden_iters": scan.golden_iters, "boundary_rays": rays,
            "cells_inside": result.meta["cells_inside"],
        }
        payload = {
            "family": cfg["family"],
            "params": _params_dict(cfg, scheme),
            "alpha": alpha,
            "area": result.area,
            "settings": settings,
        }
        _write_text(cfg["out_json"], json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if cfg.get("out_boundary") is not None or cfg.get("out_svg") is not None:
        psis = np.linspace(np.pi / 2, 3 * np.pi / 2, rays + 2)[1:-1]
        if cfg.get("out_boundary") is not None:
            _write_text(cfg["out_boundary"], _points_csv(result.boundary, psis))
        if cfg.get("out_svg") is not None:
            _write_svg(cfg["out_svg"], result.boundary)
    if cfg.get("out_raster") is not None:
        mask = result.meta["mask"]
        xs, ys = result.meta["xs"], result.meta["ys"]
        lines = ["x,y,stable"]
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                lines.append("%s,%s,%d" % (_fmt(x), _fmt(y), int(mask[i, j])))
        _write_text(cfg["out_raster"], "\n".join(lines) + "\n")
    return OK


def cmd_locus(cfg):
    _apply_workers(cfg)
    scheme = _build_scheme(cfg)
    alpha = parse_angle(cfg.get("alpha"))
    if alpha is None:
        raise _UsageError("locus requires --alpha")
    pts, tags = _numerical(
        boundary_locus, scheme, alpha=alpha, y=float(cfg["y"]),
        theta_samples=int(cfg["samples"]), k=int(cfg["turns"]),
    )
    _write_text(cfg.get("out_csv"), _points_csv(pts, tags))
    if cfg.get("out_svg") is not None:
        _write_svg(cfg["out_svg"], pts)
    return OK


def cmd_optimize(cfg):
    _apply_workers(cfg)
    family = cfg.get("family")
    if family is None:
        raise _UsageError("--method is required")
    fam = catalogue.FAMILIES[family]
    seed = _parse_floats(cfg.get("seed"), "seed")
    if seed is None:
        seed = [0.0] * fam.n_beta
    if len(seed) != fam.n_beta:
        raise _UsageError(f"{family} needs {fam.n_beta} beta entries, got {len(seed)}")
    alpha = parse_angle(cfg.get("alpha"))
    scan = RegionScan(delta=float(cfg["delta"]),
                      sector_y_step=float(cfg["sector_y_step"]),
                      golden_iters=int(cfg["golden_iters"]))
    result = _numerical(
        optimize_beta, family, alpha, np.asarray(seed, dtype=float),
        budget=int(cfg["budget"]), scan=scan, param0=cfg.get("param0"),
    )
    x = list(map(float, np.atleast_1d(result.x)))
    report = {
        "family": family,
        "alpha": alpha,
        "area": float(result.fun),
        "n_eval": int(result.n_eval),
        "converged": bool(result.converged),
    }
    if cfg.get("param0") is not None:
        report["param"] = x[0]
        report["beta"] = x[1:]
    else:
        report["beta"] = x
    print("beta %s" % ",".join(_fmt(b) for b in report["beta"]))
    if "param" in report:
        print("param %s" % _fmt(report["param"]))
    print("area %s" % _fmt(report["area"]))
    print("converged %s" % report["converged"])
    if cfg.get("out_json") is not None:
        _write_text(cfg["out_json"], json.dumps(report, indent=2, sort_keys=True) + "\n")
    return OK


def cmd_integrate(cfg):
    if cfg.get("h") is None:
        raise _UsageError("--h is required")
    scheme = _build_scheme(cfg)
    problem, _, grid = _build_problem(cfg)
    h = float(cfg["h"])
    state = _numerical(integrate, problem, scheme, h,
                       t_end=cfg.get("t_end"), h_ref=cfg.get("h_ref"))
    y = _numerical(solution_readoff, scheme, state)
    if not np.all(np.isfinite(np.abs(y))):
        raise _NumericalError("solution lost finiteness")
    y_norm = float(np.linalg.norm(y))
    err = None
    if problem.exact is not None:
        err = float(np.linalg.norm(y - np.asarray(problem.exact(state.t))))
    print("steps %d" % state.n)
    print("t %s" % _fmt(state.t))
    print("y_norm %s" % _fmt(y_norm))
    if err is not None:
        print("error %s" % _fmt(err))
    if cfg.get("snapshot") is not None:
        if grid is None:
            raise _UsageError("--snapshot needs a grid problem")
        swe_snapshot_csv(grid, np.asarray(y, dtype=float), cfg["snapshot"])
    if cfg.get("out_json") is not None:
        payload = {
            "problem": cfg["problem"],
            "family": cfg["family"],
            "h": h,
            "steps": int(state.n),
            "t": float(state.t),
            "y_norm": y_norm,
            "error": err,
        }
        if y.size <= 16:
            payload["y_re"] = [float(v) for v in np.real(y)]
            if np.iscomplexobj(y):
                payload["y_im"] = [float(v) for v in np.imag(y)]
        _write_text(cfg["out_json"], json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return OK


def cmd_converge(cfg):
    h_list = _parse_floats(cfg.get("h_list"), "h-list")
    if not h_list:
        raise _UsageError("--h-list must supply at least one step size")
    if cfg.get("family") is not None:
        schemes = [(cfg["family"], _build_scheme(cfg))]
    else:
        schemes = []
        for p in _parse_orders(cfg["orders"]):
            family = _ORDER_FAMILY[p]
            sub = dict(cfg, family=family, param=None, beta=None)
            schemes.append(("order%d" % p, _build_scheme(sub)))
    problem, reference, _ = _build_problem(cfg)
    study = _numerical(
        convergence_study, problem, schemes, h_list,
        t_end=cfg.get("t_end"), reference_problem=reference,
        h_ref=cfg.get("h_ref"), error=cfg["error"],
    )
    for label in study.labels:
        print("%s slope %.3f" % (label, study.slopes[label]))
    if cfg.get("out_csv") is None:
        sys.stdout.write(study.to_csv())
    study.write(csv_path=cfg.get("out_csv"), json_path=cfg.get("out_json"))
    return OK


_HANDLERS = {
    "check": cmd_check,
    "tableau": cmd_tableau,
    "region": cmd_region,
    "locus": cmd_locus,
    "optimize": cmd_optimize,
    "integrate": cmd_integrate,
    "converge": cmd_converge,
}


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_VALIDATION
    if ns.command is None:
        parser.print_help()
        return FAIL_VALIDATION
    try:
        cfg = _merge_config(ns.command, ns)
        if ns.print_config:
            print(json.dumps({"command": ns.command, **cfg}, indent=2, sort_keys=True))
            return OK
        return _HANDLERS[ns.command](cfg)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_VALIDATION
    except _NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return FAIL_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
