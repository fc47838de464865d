"""Command-line interface: `boselt <subcommand> [flags]`.

Every subcommand builds a versioned record {"schema", "command", "inputs",
"result", "notes"} and prints it as indented text, or as JSON with --json.
--out writes the JSON record to a file, --csv writes the tabular part.
Exit status: 0 success, 1 domain/configuration/parse error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from . import bounds as bnd
from . import consts, counterex, functional, oracle, scatter
from .errors import BoseltError, ConfigurationError, DomainError, NumericalError

SCHEMA_VERSION = 1
ENV_PREFIX = "BOSELT_"
DEFAULTS = {"seed": 0, "tol": 1e-9, "workers": 1}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# value parsing


def parse_real(text: str) -> float:
    """Float, fraction 'p/q', or a multiple of pi / pi^2 such as 'pi2', '2pi', 'pi^2'."""
    return float(parse_exact(text))


def parse_exact(text: str):
    """Exact value: Fraction for rationals, sympy expression for pi forms."""
    t = str(text).strip().lower().replace(" ", "")
    for tag, power in (("pi**2", 2), ("pi^2", 2), ("pi2", 2), ("pi", 1)):
        if t.endswith(tag):
            head = t[: -len(tag)].rstrip("*")
            coef = Fraction(head) if head else Fraction(1)
            import sympy

            return sympy.Rational(coef.numerator, coef.denominator) * sympy.pi**power
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"cannot parse number {text!r}") from None


def _real(text):
    try:
        return parse_real(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _reals(text):
    return [_real(p) for p in str(text).split(",") if p.strip()]


# ---------------------------------------------------------------------------
# serialisation


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if x is None or isinstance(x, str):
        return x
    return str(x)


def record(command: str, inputs: dict, result: dict, notes=None, table=None) -> dict:
    rec = {"schema": f"boselt.{command}/v{SCHEMA_VERSION}", "command": command,
           "version": __version__, "inputs": _plain(inputs), "result": _plain(result),
           "notes": list(notes or [])}
    if table is not None:
        rec["table"] = {"columns": list(table[0]), "rows": _plain(table[1])}
    return rec


def to_json(rec: dict) -> str:
    return json.dumps(rec, indent=2, sort_keys=True) + "\n"


def to_text(rec: dict) -> str:
    out = io.StringIO()

    def emit(key, val, indent):
        pad = "  " * indent
        if isinstance(val, dict):
            out.write(f"{pad}{key}:\n")
            for k in sorted(val):
                emit(k, val[k], indent + 1)
        elif isinstance(val, list) and val and isinstance(val[0], (dict, list)):
            out.write(f"{pad}{key}:\n")
            for item in val:
                out.write(f"{pad}  - {json.dumps(item, sort_keys=True)}\n")
        else:
            out.write(f"{pad}{key}: {json.dumps(val) if not isinstance(val, str) else val}\n")

    for key in ("schema", "inputs", "result", "table", "notes"):
        if key in rec and rec[key] not in (None, [], {}):
            emit(key, rec[key], 0)
    return out.getvalue()


def to_csv(rec: dict) -> str:
    if "table" not in rec:
        raise ConfigurationError(f"{rec['command']} has no tabular output")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rec["table"]["columns"])
    for row in rec["table"]["rows"]:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# potentials and bounds from flags


SCATTER_FAMILIES = ("hom-3d", "reg-hom-3d", "hom-2d", "reg-hom-2d", "skew", "hard-sphere", "hard-disk")


def _need(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) is None]
    if missing:
        raise ConfigurationError("missing required flag(s): " + ", ".join("--" + m for m in missing))


def potential_from_family(args) -> scatter.PotentialSpec:
    fam = args.family
    if fam in ("hom-3d", "hom-2d"):
        _need(args, "W0", "beta")
        return scatter.homogeneous(3 if fam.endswith("3d") else 2, args.W0, args.beta)
    if fam in ("reg-hom-3d", "reg-hom-2d"):
        _need(args, "W0", "beta", "R")
        return scatter.regularized(3 if fam.endswith("3d") else 2, args.W0, args.beta, args.R)
    if fam == "skew":
        _need(args, "a", "W0", "R")
        return scatter.skew(args.a, args.W0, args.R)
    if fam in ("hard-sphere", "hard-disk"):
        _need(args, "a")
        return scatter.hard_core(3 if fam == "hard-sphere" else 2, args.a)
    raise ConfigurationError(f"unknown family {fam!r}")


def bound_from_flags(args) -> bnd.ExclusionBound:
    fam = args.family
    if fam == "ll":
        _need(args, "eta")
        return bnd.lieb_liniger_bound(args.eta)
    if fam == "inv-square":
        _need(args, "d", "W0")
        return bnd.inverse_square_bound(args.d, args.W0, getattr(args, "e0", None))
    if fam == "hom-elementary":
        _need(args, "d", "W0", "beta")
        return bnd.hom_elementary_bound(args.d, args.W0, args.beta)
    if fam == "hard-sphere":
        _need(args, "a")
        return bnd.hard_sphere_bound(args.a)
    if fam == "hom-3d-scatt":
        _need(args, "W0", "beta")
        return bnd.hom_3d_scatt_bound(args.W0, args.beta)
    if fam == "hard-disk":
        _need(args, "a")
        return bnd.hard_disk_bound(args.a, args.c if args.c is not None else 2.0)
    if fam == "hom-2d-scatt":
        _need(args, "W0", "beta")
        return bnd.hom_2d_scatt_bound(args.W0, args.beta)
    raise ConfigurationError(f"unknown bound family {fam!r}; choose from {', '.join(bnd.FAMILIES)}")


def _bound_info(b: bnd.ExclusionBound) -> dict:
    return {"family": b.family, "d": b.d, "alpha": b.alpha, "tau": b.tau, "K": b.K,
            "params": {k: v for k, v in b.params.items()}}


def _default_C(b: bnd.ExclusionBound, args) -> tuple[float, dict]:
    if getattr(args, "C", None) is not None:
        return args.C, {"C_source": "flag"}
    if not math.isfinite(b.K):
        raise ConfigurationError("bound has no cap K; pass --C")
    rep = consts.constant_pipeline(b.d, b.alpha, b.K)
    return rep.C_float, {"C_source": "constant pipeline", "C_binding": rep.binding}


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(args):
    _need(args, "d", "alpha", "K")
    alpha_x = parse_exact(args.alpha)
    K_x = parse_exact(args.K)
    eps_x = parse_exact(args.epsilon) if args.epsilon is not None else Fraction(1, 2)
    exact = args.exact if args.exact is not None else float(alpha_x) <= 2
    alpha = alpha_x if exact else float(alpha_x)
    uc = consts.uncertainty_constants(args.d, alpha, eps_x, sobolev=args.sobolev, exact=exact)
    rep = consts.constant_pipeline(args.d, alpha, K_x if exact else float(K_x), uc=uc, exact=exact)
    res = rep.as_dict()
    inputs = {"d": args.d, "alpha": str(args.alpha), "K": str(args.K), "epsilon": str(eps_x),
              "sobolev": args.sobolev, "exact": exact}
    return record("constants", inputs, res)


def cmd_scattering(args):
    spec = potential_from_family(args)
    res = scatter.scattering_length(spec)
    out = {"a": res.a, "method": res.method, "diagnostics": res.diagnostics}
    notes = []
    if args.oracle:
        orc = scatter.ode_oracle(spec)
        out["oracle_a"] = orc.a
        out["oracle_diagnostics"] = orc.diagnostics
        if res.a > 0 and orc.a > 0:
            out["relative_difference"] = abs(orc.a - res.a) / res.a
    if spec.kind == "regularized" and spec.d == 3 and spec.beta == 6 and spec.W0 == 2 and spec.R == 1:
        notes.append("reference: 1 - tanh(1) = %.15g" % (1 - math.tanh(1.0)))
    inputs = {"family": args.family, "W0": args.W0, "beta": args.beta, "R": args.R, "a": args.a}
    return record("scattering", inputs, out, notes)


def cmd_bound_eval(args):
    b = bound_from_flags(args)
    if args.gamma is None and args.volume is None:
        raise ConfigurationError("pass --gamma or --volume")
    gammas = list(args.gamma or []) + [bnd.gamma_of_volume(b, v) for v in (args.volume or [])]
    rows = [(g, float(b.energy(g)), float(b(g)), float(b.derivative(g))) for g in gammas]
    res = {"bound": _bound_info(b)}
    if args.check_shape:
        grid = np.sort(np.unique(np.r_[0.0, np.asarray(gammas, dtype=float)]))
        if len(grid) < 3:
            grid = np.linspace(0, max(gammas) if gammas else 1.0, 101)
        rep = bnd.check_concave_monotone(b, grid, tol=args.tol)
        res["shape"] = {"passed": rep.passed, "monotone": rep.monotone, "concave": rep.concave,
                        "zero_limit": rep.zero_limit, "violation": rep.violation, "kind": rep.kind}
    return record("bound-eval", {"family": args.family}, res,
                  table=(("gamma", "e", "e_K", "de_K"), rows))


def _e2_problem(args, points):
    if args.family == "ll":
        if args.d not in (None, 1):
            raise ConfigurationError("the ll family is one-dimensional")
        _need(args, "gamma")
        return oracle.ll_problem(args.gamma, points, args.scheme)
    d = args.d or 1
    kinds = {"regularized": lambda: scatter.regularized(d, args.W0, args.beta, args.R),
             "homogeneous": lambda: scatter.homogeneous(d, args.W0, args.beta),
             "inverse-square": lambda: scatter.inverse_square(d, args.W0)}
    if args.family not in kinds:
        raise ConfigurationError(f"e2 family must be ll, {', '.join(kinds)}")
    spec = kinds[args.family]()
    scheme = "strip" if args.scheme == "galerkin" else args.scheme
    return oracle.GridEigenProblem(d, 2, points, spec, args.box, scheme, args.cutoff)


def cmd_e2(args):
    levels = args.levels or [args.n]
    probs = [_e2_problem(args, n) for n in levels]
    vals = _map(lambda p: oracle.e2_numeric(p, args.seed), probs, args.workers)
    res = {"scheme": probs[0].scheme, "points": levels, "e2": vals, "unknowns": [p.unknowns for p in probs]}
    notes = []
    if len(vals) >= 2:
        order = 1.0 if probs[0].scheme == "galerkin" else 2.0
        res["richardson"] = oracle.richardson(vals, order)
        res["richardson_order"] = order
    if args.family == "ll":
        lb = float(bnd.ll_energy(args.gamma))
        res["bound_4xi2"] = lb
        best = res.get("richardson", vals[-1])
        res["slack"] = best - lb
        res["cap_pi2"] = math.pi**2
    if args.lambdas:
        lam_vals = _map(lambda lam: oracle.e2_numeric(probs[-1].scaled(lam), args.seed), args.lambdas,
                        args.workers)
        res["lambda_sweep"] = {"lambda": args.lambdas, "e2": lam_vals}
        diffs = np.diff(lam_vals)
        res["lambda_sweep"]["nondecreasing"] = bool(np.all(diffs >= -args.tol))
        lam = np.asarray(args.lambdas)
        if len(lam) >= 3:
            slopes = diffs / np.diff(lam)
            res["lambda_sweep"]["concave"] = bool(np.all(np.diff(slopes) <= args.tol * max(1.0, np.max(np.abs(slopes)))))
    inputs = {"family": args.family, "d": args.d or 1, "gamma": args.gamma, "n": args.n, "levels": args.levels,
              "scheme": args.scheme, "W0": args.W0, "beta": args.beta, "R": args.R, "box": args.box}
    return record("e2", inputs, res, notes)


def _dyson_suite(kind, args):
    rng = np.random.default_rng(args.seed)
    cases = [(oracle.random_dyson_3d_case if kind == 3 else oracle.random_dyson_2d_case)(rng, args.a)
             for _ in range(args.random)]
    check = oracle.dyson_check_3d if kind == 3 else oracle.dyson_check_2d
    reps = _map(lambda c: check(c[0], args.a, c[1], tol=args.tol), cases, args.workers)
    slacks = [r.slack for r in reps]
    return {"cases": len(reps), "violations": int(sum(not r.passed for r in reps)),
            "min_slack": min(slacks), "min_relative_slack": min(r.slack / max(r.lhs, 1e-300) for r in reps)}


def cmd_dyson3d(args):
    _need(args, "a")
    if args.random:
        return record("dyson3d", {"a": args.a, "random": args.random, "seed": args.seed}, _dyson_suite(3, args))
    r_out = args.r_out or 5 * args.a
    r = np.r_[0.0, np.linspace(args.a, r_out, args.nodes)]
    prof = oracle.RadialProfile(r, np.where(r > args.a, 1 - args.a / np.maximum(r, args.a), 0.0))
    vol = args.cube_volume or r_out**3 / 3**1.5
    rep = oracle.dyson_check_3d(prof, args.a, oracle.dyson_indicator_G(vol), tol=args.tol)
    res = {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack, "passed": rep.passed, "I": rep.extra["I"],
           "lhs_closed_form": 4 * math.pi * args.a * (1 - args.a / r_out)}
    return record("dyson3d", {"a": args.a, "r_out": r_out, "cube_volume": vol, "profile": "(1 - a/r)_+"}, res)


def cmd_dyson2d(args):
    _need(args, "a")
    if args.random:
        return record("dyson2d", {"a": args.a, "random": args.random, "seed": args.seed}, _dyson_suite(2, args))
    vol = args.cube_volume or 4 * args.a**2
    U = oracle.hard_disk_weight(args.a, vol)
    r_out = args.r_out or math.sqrt(2 * vol)
    r = np.r_[0.0, np.geomspace(args.a, r_out, args.nodes)]
    cap = args.cap if args.cap is not None else math.inf
    prof = oracle.RadialProfile(r, np.minimum(np.log(np.maximum(r, args.a) / args.a), cap))
    rep = oracle.dyson_check_2d(prof, args.a, U, tol=args.tol)
    res = {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack, "passed": rep.passed,
           "side_integral": rep.side_integral}
    return record("dyson2d", {"a": args.a, "cube_volume": vol, "r_out": r_out, "cap": args.cap,
                              "profile": "min(ln(r/a)_+, cap)"}, res)


def _read_grid(path):
    if path is None:
        raise ConfigurationError("missing --grid")
    return functional.read_rho_grid(path)


def cmd_uncertainty(args):
    if args.grid:
        grid = _read_grid(args.grid)
    else:
        _need(args, "d")
        n, w = args.n, args.width
        axes = [(np.arange(n) + 0.5) / n - 0.5] * args.d
        mesh = np.meshgrid(*axes, indexing="ij")
        phi2 = np.exp(-sum(x * x for x in mesh) / (2 * w * w))
        vals = args.N * phi2 / (phi2.sum() / n**args.d)
        grid = functional.DensityGrid(vals, 1.0 / n, (-0.5,) * args.d)
    alpha = parse_real(args.alpha) if args.alpha is not None else 2.0
    eps = parse_exact(args.epsilon) if args.epsilon is not None else Fraction(1, 2)
    uc = consts.uncertainty_constants(grid.d, alpha, eps, sobolev=args.sobolev)
    rep = oracle.uncertainty_check(grid, uc)
    res = {"kinetic": rep.kinetic, "rhs": rep.rhs, "slack": rep.slack, "passed": rep.passed, "mass": rep.mass,
           "S1": float(uc.S1), "S2": float(uc.S2), "uncertainty_source": uc.source}
    return record("uncertainty", {"grid": args.grid, "d": grid.d, "alpha": alpha, "epsilon": str(eps)}, res,
                  ["kinetic energy of the product state with this density: int |grad sqrt(rho)|^2"])


def cmd_tree(args):
    grid = _read_grid(args.grid)
    tree = functional.tree_decompose(grid)
    leaves = tree.leaves()
    rows = [(n.label, n.depth, *n.cube.lo, n.cube.size, n.mass) for n in leaves]
    cols = ("label", "depth", *[f"i{k}" for k in range(grid.d)], "size", "mass")
    probs = tree.problems()
    res = {"root_mass": tree.root.mass, "leaves": len(leaves), "A": len(tree.a_leaves()),
           "B": len(tree.b_leaves()), "max_depth": max(n.depth for n in leaves), "problems": probs,
           "leaf_mass_sum": math.fsum(n.mass for n in leaves)}
    return record("tree", {"grid": args.grid}, res, table=(cols, rows))


def _comparison_notes(b, grid):
    """Dilute-gas reference lines; printed for orientation, never checked."""
    notes = []
    rho = grid.mass / grid.volume
    if b.family == "hard-sphere":
        notes.append(f"comparison (not asserted): 4 pi a rho^2 |Omega| at mean density = "
                     f"{4 * math.pi * b.tau * rho * rho * grid.volume!r}")
    if b.family == "hard-disk" and b.tau * math.sqrt(rho) < 1:
        notes.append(f"comparison (not asserted): 4 pi rho^2 |ln(a^2 rho)|^-1 |Omega| at mean density = "
                     f"{4 * math.pi * rho * rho / abs(math.log(b.tau**2 * rho)) * grid.volume!r}")
    return notes


def cmd_functional(args):
    grid = _read_grid(args.grid)
    b = bound_from_flags(args)
    C, src = _default_C(b, args)
    res = functional.lt_functional(grid, b, C)
    out = {"energy": res.energy, "C": C, **src, "bound": _bound_info(b), "mass": grid.mass}
    table = None
    if args.csv:
        cols = ("cell", "rho", "contribution")
        table = (cols, [(k, float(r), float(c)) for k, (r, c) in enumerate(zip(grid.values.ravel(), res.cells.ravel()))])
    return record("functional", {"grid": args.grid, "family": args.family}, out,
                  _comparison_notes(b, grid), table)


def cmd_minimize(args):
    _need(args, "N")
    b = bound_from_flags(args)
    C, src = _default_C(b, args)
    if args.potential:
        Vv, spacing, origin = _read_potential(args.potential)
    else:
        d = b.d
        n = args.n
        h = args.box / n
        axes = [(np.arange(n) + 0.5) * h - 0.5 * args.box] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        Vv = args.omega**2 * sum(x * x for x in mesh)
        spacing, origin = h, (-0.5 * args.box,) * d
    res = functional.minimize_with_external(Vv, args.N, b, C, spacing, origin, tol=min(args.tol, 1e-8))
    out = {"energy": res.energy, "mu": res.mu, "iterations": res.iterations, "mass": res.mass,
           "convex": res.convex, "primal_energy": res.primal_energy, "duality_gap": res.duality_gap,
           "split_cells": res.split_cells, "C": C, **src, "bound": _bound_info(b)}
    table = None
    if args.csv:
        cells = res.density.values.ravel()
        table = (("cell", "rho", "V"), [(k, float(r), float(v)) for k, (r, v) in enumerate(zip(cells, np.ravel(Vv)))])
    if args.out_grid:
        functional.write_rho_grid(res.density, args.out_grid)
    return record("minimize", {"family": args.family, "N": args.N, "potential": args.potential or
                               f"harmonic omega={args.omega} box={args.box} n={args.n}"}, out, table=table)


def _read_potential(path):
    with open(path, encoding="utf-8") as fh:
        return functional.parse_grid_values(fh.read(), allow_negative=True)


def cmd_counterexample(args):
    kind = args.kind
    if kind == "homogeneous":
        trial = counterex.TrialState(args.trial, args.width, args.N, args.core)
        lo, hi = (1.0, 1e-3) if args.beta < 2 else (1.0, 1e3)
        L = np.geomspace(args.L_start or lo, args.L_stop or hi, args.points)
        sw = counterex.scaling_ratio_homogeneous(args.beta, args.W0 or 1.0, trial, L)
        extra = {"beta": args.beta, "trial": args.trial}
        res = {"slope": sw.slope, "strictly_decreasing": sw.strictly_decreasing_along(),
               "excess_slope": sw.extra["excess_slope"], "predicted_exponent": sw.extra["predicted_exponent"],
               "kinetic_floor": sw.extra["kinetic_floor"]}
        if args.monte_carlo and args.trial == "gaussian_product" and args.beta < 1.5:
            mc, se = counterex.monte_carlo_moment(trial, args.beta, args.samples, args.seed)
            res["monte_carlo"] = {"mean": mc, "stderr": se, "closed_form": trial.inverse_power_moment(args.beta)}
    elif kind == "integrable":
        W = scatter.PotentialSpec(args.potential_kind, 3, W0=args.W0 if args.W0 is not None else 1.0,
                                  beta=args.beta, R=args.R)
        Ns = np.geomspace(args.N_start, args.N_stop, args.points)
        sw = counterex.locally_integrable_ratio(W, Ns)
        extra = {"potential_kind": args.potential_kind, "beta": args.beta, "R": args.R}
        res = {"slope": sw.slope, "final_ratio": float(sw.ratio[-1]), "below_one": bool(sw.ratio[-1] < 1),
               "a": sw.extra["a"], "c6": sw.extra["c6"]}
    else:
        _need(args, "a_W")
        W0s = np.geomspace(args.W0_start, args.W0_stop, args.points)
        a = args.a if args.a is not None else 0.1 * args.a_W
        sw = counterex.skew_budget(args.a_W, [(a, w) for w in W0s], args.N)
        extra = {"a_W": args.a_W, "a": a}
        res = {"slope": sw.slope, "strictly_decreasing": sw.strictly_decreasing_along(),
               "R": sw.extra["R"]}
    table = ((sw.parameter, "lhs", "rhs", "ratio"), sw.rows())
    return record(f"counterexample-{kind}", {"kind": kind, **extra, "points": args.points}, res, sw.notes, table)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the record as JSON")
    common.add_argument("--out", help="also write the JSON record to this file")
    common.add_argument("--csv", help="write the table (if any) as CSV to this file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--workers", type=int, default=None)

    p = _Parser(prog="boselt", description="Lieb-Thirring bounds for interacting Bose gases")
    p.add_argument("--version", action="version", version=f"boselt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def bound_flags(sp, family_required=True):
        sp.add_argument("--family", required=family_required, help=", ".join(bnd.FAMILIES))
        sp.add_argument("--d", type=int)
        sp.add_argument("--eta", type=_real)
        sp.add_argument("--W0", type=_real)
        sp.add_argument("--beta", type=_real)
        sp.add_argument("--a", type=_real)
        sp.add_argument("--c", type=_real, help="hard-disk surrogate parameter")
        sp.add_argument("--e0", type=_real, help="inverse-square e2 at unit scale")

    sp = sub.add_parser("constants", parents=[common], help="constant pipeline C_{d,alpha,K}")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--K", required=True, help="number, fraction or pi2")
    sp.add_argument("--epsilon")
    sp.add_argument("--sobolev", type=float, help="override the Sobolev constant S_d (d >= 3)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--exact", dest="exact", action="store_true", default=None)
    g.add_argument("--float", dest="exact", action="store_false")
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("scattering", parents=[common], help="scattering length")
    sp.add_argument("--family", required=True, choices=SCATTER_FAMILIES)
    sp.add_argument("--W0", type=_real)
    sp.add_argument("--beta", type=_real)
    sp.add_argument("--R", type=_real)
    sp.add_argument("--a", type=_real)
    sp.add_argument("--oracle", action="store_true", help="cross-check with the radial ODE")
    sp.set_defaults(func=cmd_scattering)

    sp = sub.add_parser("bound-eval", parents=[common], help="evaluate an exclusion bound")
    bound_flags(sp)
    sp.add_argument("--gamma", type=_reals)
    sp.add_argument("--volume", type=_reals)
    sp.add_argument("--check-shape", action="store_true")
    sp.set_defaults(func=cmd_bound_eval)

    sp = sub.add_parser("e2", parents=[common], help="two-particle Neumann energy")
    sp.add_argument("--family", default="ll", help="ll, regularized, homogeneous or inverse-square")
    sp.add_argument("--d", type=int)
    sp.add_argument("--gamma", type=_real)
    sp.add_argument("--n", type=int, default=129, help="points per axis")
    sp.add_argument("--levels", type=lambda s: [int(x) for x in s.split(",")])
    sp.add_argument("--scheme", default="galerkin", choices=("galerkin", "strip"))
    sp.add_argument("--W0", type=_real)
    sp.add_argument("--beta", type=_real)
    sp.add_argument("--R", type=_real)
    sp.add_argument("--box", type=_real, default=1.0)
    sp.add_argument("--cutoff", type=_real)
    sp.add_argument("--lambdas", type=_reals)
    sp.set_defaults(func=cmd_e2)

    for name, fn in (("dyson3d", cmd_dyson3d), ("dyson2d", cmd_dyson2d)):
        sp = sub.add_parser(name, parents=[common], help="Dyson-type radial inequality")
        sp.add_argument("--a", type=_real, default=1.0)
        sp.add_argument("--r-out", type=_real)
        sp.add_argument("--cube-volume", type=_real)
        sp.add_argument("--nodes", type=int, default=2000)
        sp.add_argument("--random", type=int, default=0, help="run this many seeded random cases")
        if name == "dyson2d":
            sp.add_argument("--cap", type=_real)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("uncertainty", parents=[common], help="local uncertainty check")
    sp.add_argument("--grid")
    sp.add_argument("--d", type=int)
    sp.add_argument("--alpha")
    sp.add_argument("--epsilon")
    sp.add_argument("--sobolev", type=float)
    sp.add_argument("--n", type=int, default=32)
    sp.add_argument("--width", type=_real, default=0.15)
    sp.add_argument("--N", type=_real, default=10.0)
    sp.set_defaults(func=cmd_uncertainty)

    sp = sub.add_parser("tree", parents=[common], help="A/B cube tree of a density grid")
    sp.add_argument("--grid", required=True)
    sp.set_defaults(func=cmd_tree)

    sp = sub.add_parser("functional", parents=[common], help="evaluate the density functional")
    sp.add_argument("--grid", required=True)
    bound_flags(sp)
    sp.add_argument("--C", type=_real)
    sp.set_defaults(func=cmd_functional)

    sp = sub.add_parser("minimize", parents=[common], help="minimise the functional in a potential")
    bound_flags(sp)
    sp.add_argument("--C", type=_real)
    sp.add_argument("--N", type=_real)
    sp.add_argument("--potential", help="potential grid in rho-grid v1 layout")
    sp.add_argument("--omega", type=_real, default=1.0)
    sp.add_argument("--box", type=_real, default=10.0)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--out-grid", help="write the minimising density here")
    sp.set_defaults(func=cmd_minimize)

    sp = sub.add_parser("counterexample", parents=[common], help="scaling counterexamples")
    sp.add_argument("kind", choices=("homogeneous", "integrable", "skew"))
    sp.add_argument("--points", type=int, default=9)
    sp.add_argument("--beta", type=_real, default=1.0)
    sp.add_argument("--W0", type=_real)
    sp.add_argument("--trial", default="gaussian_product", choices=("gaussian_product", "bump_product"))
    sp.add_argument("--width", type=_real, default=1.0)
    sp.add_argument("--N", type=_real, default=100.0)
    sp.add_argument("--core", type=_real, default=0.0)
    sp.add_argument("--L-start", type=_real)
    sp.add_argument("--L-stop", type=_real)
    sp.add_argument("--monte-carlo", action="store_true")
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--potential-kind", default="homogeneous", choices=("homogeneous", "regularized"))
    sp.add_argument("--R", type=_real)
    sp.add_argument("--N-start", type=_real, default=1.0)
    sp.add_argument("--N-stop", type=_real, default=1e8)
    sp.add_argument("--a-W", type=_real)
    sp.add_argument("--a", type=_real)
    sp.add_argument("--W0-start", type=_real, default=1.0)
    sp.add_argument("--W0-stop", type=_real, default=1e-6)
    sp.set_defaults(func=cmd_counterexample)
    return p


def _resolve(args):
    """flags > BOSELT_* environment > defaults."""
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            env = os.environ.get(ENV_PREFIX + key.upper())
            if env is not None:
                try:
                    val = type(default)(env)
                except ValueError:
                    raise ConfigurationError(f"bad {ENV_PREFIX}{key.upper()}={env!r}") from None
            else:
                val = default
            setattr(args, key, val)
    if args.workers < 1:
        raise ConfigurationError("--workers must be >= 1")
    if not args.tol > 0:
        raise ConfigurationError("--tol must be positive")
    return args


def dispatch(args) -> dict:
    return args.func(args)


def main(argv=None) -> int:
    stdout, stderr = sys.stdout, sys.stderr
    try:
        args = _resolve(build_parser().parse_args(argv))
        rec = dispatch(args)
        text = to_json(rec) if args.json else to_text(rec)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(to_json(rec))
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(to_csv(rec))
        stdout.write(text)
        return 0
    except BoseltError as exc:
        stderr.write(f"error: {exc}\n")
        return getattr(exc, "exit_code", 1)
    except (OverflowError, ZeroDivisionError, FloatingPointError) as exc:
        stderr.write(f"numerical error: {exc}\n")
        return NumericalError.exit_code
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
