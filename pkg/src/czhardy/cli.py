"""Command line experiment runner.

Every subcommand builds a truncation from ``--q/--depth`` (or a JSON
``--config`` with the same keys), runs one experiment and writes JSON or CSV
to ``--out`` (stdout by default).  Exit status 3 means an exact invariant
failed; the witness is printed on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from ._exact import as_exact, to_str
from .errors import InvariantViolation
from .geometry import cz_sets, dilate_measure_ratio, geometry_sweep
from .hardy import h1_norm_upper_bound, random_atom
from .interpolation import interpolation_exponent_report, power_law_profile
from .maximal import cz_covering
from .measure import WeightedMeasure
from .operators import (
    h1_to_l1_ratio,
    hormander_sup,
    laplacian,
    named_multiplier,
    riesz_transform,
    self_adjointness_residual,
    spectral_multiplier,
)
from .tree import TreeTruncation

EXIT_VIOLATION = 3


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, str, int)) or x is None:
        return x
    if isinstance(x, Fraction):
        return to_str(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    return str(x)


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _depths(args) -> list[int]:
    if args.depths:
        return [int(d) for d in str(args.depths).split(",")]
    return [args.depth]


def _tree(args, depth=None) -> TreeTruncation:
    return TreeTruncation(args.q, depth if depth is not None else args.depth, apex_level=args.apex_level)


def read_function(path: str, tree: TreeTruncation) -> np.ndarray:
    """CSV rows ``vertex_word,value`` (header optional); values parsed as exact rationals."""
    f = as_exact(np.zeros(tree.n))
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            word, val = row[0].strip(), row[1].strip()
            if word == "vertex_word":
                continue
            f[tree.index(word)] = Fraction(val)
    return f


# -- subcommands ----------------------------------------------------------------------


def cmd_geometry_sweep(args):
    tree = _tree(args)
    res = geometry_sweep(tree, pairs=args.pairs, seed=args.seed)
    m = WeightedMeasure(tree)
    ratios = [dilate_measure_ratio(cz, m) for cz in cz_sets(tree, include_degenerate=False, interior=True)]
    res["dilate_ratio_max"] = max(ratios, default=Fraction(1))
    _emit(_json(res), args.out)
    if res["violations"]:
        raise InvariantViolation("geometry sweep found violations", res["violations"][0])


def cmd_covering(args):
    tree = _tree(args)
    m = WeightedMeasure(tree)
    if args.input:
        f = read_function(args.input, tree)
    else:
        rng = np.random.default_rng(args.seed)
        f = as_exact(rng.integers(-20, 21, size=tree.n))
    p = Fraction(args.p)
    lam = Fraction(args.lam)
    cov = cz_covering(f, m, p if p.denominator != 1 else int(p), lam)
    out = cov.to_json()
    out["certified"] = cov.certify(m)
    _emit(_json(out), args.out)


def cmd_decompose(args):
    tree = _tree(args)
    m = WeightedMeasure(tree)
    p = int(args.p) if float(args.p).is_integer() else float(args.p)
    if args.input:
        f = read_function(args.input, tree)
        support = None
    else:
        rng = np.random.default_rng(args.seed)
        a = random_atom(m, rng, p=p, exact=True)
        f, support = a.values, a.support
    alpha = Fraction(args.alpha) if args.alpha is not None else None
    bound = h1_norm_upper_bound(f, m, p, support=support, alpha=alpha, max_depth=args.max_depth,
                                enforce_threshold=not args.no_threshold)
    pieces = []
    for S, F, dec, s in bound.pieces:
        exact = all(u == v for u, v in zip(dec.reconstruct() * s, F))
        pieces.append({"support": S.to_json(), "scale": s, "reconstruction_exact": exact,
                       "certified": dec.certified, "decomposition": dec.to_json()})
        if not exact or not dec.certified:
            _emit(_json({"pieces": pieces}), args.out)
            raise InvariantViolation("decomposition certificate failed", {"support": S.to_json()})
    _emit(_json({"h1_upper_bound": bound.value, "coefficient_sum": bound.coefficient_sum,
                 "residual_term": bound.residual_term, "proof_constant": bound.proof_constant,
                 "pieces": pieces}), args.out)


def cmd_interpolate(args):
    tree = _tree(args)
    m = WeightedMeasure(tree)
    p = float(args.p)
    p1 = math.inf if str(args.p1) in ("inf", "infinity") else float(args.p1)
    if args.input:
        f = np.asarray(read_function(args.input, tree), dtype=float)
    else:
        f = power_law_profile(m, np.random.default_rng(args.seed), p)
    opts = {}
    if args.alpha is not None:
        opts = {"alpha": float(Fraction(args.alpha)), "enforce_threshold": False, "max_depth": args.max_depth}
    rep = interpolation_exponent_report(f, m, p, p1, h1_options=opts)
    rows = [(t, k, rep["slope"]) for t, k in zip(rep["t"], rep["k_bound"])]
    _emit(_csv(rows, ["t", "K_bound", "slope"]), args.out)


def cmd_spectrum(args):
    rows = []
    rng = np.random.default_rng(args.seed)
    for D in _depths(args):
        tree = _tree(args, D)
        L = laplacian(tree)
        lam = L.eigh[0]
        f, g = rng.standard_normal((2, tree.n))
        norm = math.sqrt(float(np.dot(f**2, L.m.fweights)) * float(np.dot(g**2, L.m.fweights)))
        rows += [
            (D, "lambda_min", float(lam[0])),
            (D, "lambda_max", float(lam[-1])),
            (D, "margin", float(min(lam[0], 2 - lam[-1]))),
            (D, "self_adjointness_relative", self_adjointness_residual(L, f, g) / norm),
        ]
    _emit(_csv(rows, ["depth", "statistic", "value"]), args.out)


def cmd_hormander(args):
    rows = []
    M = named_multiplier(args.multiplier, t=args.t, k=args.power, s0=args.s0)
    for D in _depths(args):
        L = laplacian(_tree(args, D))
        sweep = hormander_sup(spectral_multiplier(L, M))
        rows += [(D, "hormander_sup", sweep.value), (D, "sets_checked", sweep.sets_checked)]
    _emit(_csv(rows, ["depth", "statistic", "value"]), args.out)


def cmd_riesz_ratio(args):
    rows = []
    for D in _depths(args):
        tree = _tree(args, D)
        L = laplacian(tree)
        rng = np.random.default_rng(args.seed)
        atoms = [random_atom(L.m, rng, interior=True) for _ in range(args.atoms)]
        T = riesz_transform(L) if args.operator == "riesz" else \
            spectral_multiplier(L, named_multiplier(args.operator, t=args.t))
        rep = h1_to_l1_ratio(T, atoms)
        rows += [(D, f"max_ratio_{args.operator}", rep.max_ratio)]
        if rep.local_bound is not None:
            js = rep.to_json()
            rows += [(D, "max_split_bound", js["max_split_bound"])]
    _emit(_csv(rows, ["depth", "statistic", "value"]), args.out)


# -- argument handling -----------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q", type=int, default=2, help="branching number (children per vertex)")
    common.add_argument("--depth", type=int, default=4, help="levels below the apex")
    common.add_argument("--apex-level", type=int, default=None, help="level of the apex (default: depth)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--config", default=None, help="JSON file with the same keys as the flags")

    parser = argparse.ArgumentParser(prog="czhardy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")
    subs = {}

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        subs[name] = sp
        return sp

    sp = add("geometry-sweep", cmd_geometry_sweep, "trapezoid/envelope lemma sweep")
    sp.add_argument("--pairs", type=int, default=None, help="random intersecting pairs instead of all pairs")

    sp = add("covering", cmd_covering, "greedy covering of a level set")
    sp.add_argument("--p", default="2")
    sp.add_argument("--lambda", dest="lam", default="1")
    sp.add_argument("--input", default=None, help="CSV vertex_word,value (random integers otherwise)")

    sp = add("decompose", cmd_decompose, "atomic decomposition of a mean-zero function")
    sp.add_argument("--p", default="2")
    sp.add_argument("--alpha", default=None)
    sp.add_argument("--max-depth", type=int, default=4)
    sp.add_argument("--no-threshold", action="store_true", help="allow alpha below the convergence threshold")
    sp.add_argument("--input", default=None)

    sp = add("interpolate", cmd_interpolate, "K-functional upper bounds and slope")
    sp.add_argument("--p", default="2")
    sp.add_argument("--p1", default="inf")
    sp.add_argument("--alpha", default=None, help="stage parameter for the H^1 bounds (threshold not enforced)")
    sp.add_argument("--max-depth", type=int, default=8)
    sp.add_argument("--input", default=None)

    sp = add("spectrum", cmd_spectrum, "extreme eigenvalues of the Laplacian")
    sp.add_argument("--depths", default=None, help="comma separated depths")

    sp = add("hormander", cmd_hormander, "Hormander integral sweep for a multiplier kernel")
    sp.add_argument("--multiplier", default="heat")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--power", type=int, default=2)
    sp.add_argument("--s0", type=float, default=1.0)
    sp.add_argument("--depths", default=None)

    sp = add("riesz-ratio", cmd_riesz_ratio, "max ||T a||_1 over random atoms")
    sp.add_argument("--atoms", type=int, default=200)
    sp.add_argument("--operator", default="riesz", help="riesz or a multiplier name (heat, power, ...)")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--depths", default=None)
    return parser, subs


def main(argv=None) -> int:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        sp = subs[args.command]
        for key, val in cfg.items():
            key = key.replace("-", "_")
            if key == "lambda":
                key = "lam"
            if not hasattr(args, key):
                parser.error(f"unknown config key {key!r}")
            if getattr(args, key) == sp.get_default(key):
                setattr(args, key, val)
    if args.q < 2 or args.depth < 1:
        parser.error("need q >= 2 and depth >= 1")
    try:
        args.func(args)
    except InvariantViolation as exc:
        sys.stderr.write(_json({"violation": str(exc), "witness": exc.witness}))
        return EXIT_VIOLATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
