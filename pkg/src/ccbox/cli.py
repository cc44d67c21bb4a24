"""Command-line front end.

Every subcommand loads a family (builtin name or YAML definition file), runs
one verification routine, prints one summary line per report, optionally
writes the per-sample rows as CSV, and exits 0 only if every pass-criterion
held.  Exit codes: 0 pass, 1 verification failure, 2 usage/config error.
"""

import argparse
import sys

import numpy as np

from . import acceptance
from .approxexp import jacobian_structure_check, derivative_expansion_check, pullback_check
from .errors import CCBoxError, ConfigError
from .fields import (BUILTIN_NAMES, build_table, builtin_family, load_family,
                     estimate_constants)
from .maximality import big_lambda, increasing_tuples, lambda_det, select_maximal, \
    stability_check, stratify
from .metric import ballbox_verify, cc_upper, doubling_estimate
from .mollify import convergence_check, uniform_bound_check
from .reports import VerificationReport, rows_to_csv


def _load(name_or_path):
    if name_or_path in BUILTIN_NAMES:
        return builtin_family(name_or_path)
    return load_family(name_or_path)


def _point(text):
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _floats(text):
    return [float(v) for v in text.split(",")]


def build_parser():
    p = argparse.ArgumentParser(
        prog="ccbox",
        description="Numerical verification toolkit for families of "
                    "bracket-generating vector fields.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--family", required=True,
                        help=f"builtin name ({', '.join(BUILTIN_NAMES)}) or a "
                             "YAML family file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", help="write per-sample rows as CSV here")

    sp = sub.add_parser("table", help="commutator table and determinant scales "
                                      "on a coarse grid")
    common(sp)
    sp.add_argument("--grid", type=int, default=5)

    sp = sub.add_parser("select", help="maximal tuple selection and subunit "
                                       "stability at a point")
    common(sp)
    sp.add_argument("--point", required=True, type=_point)
    sp.add_argument("--radius", required=True, type=float)
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--samples", type=int, default=100)

    sp = sub.add_parser("expcheck", help="remainder order of the approximate "
                                         "commutator exponential")
    common(sp)
    sp.add_argument("--word", required=True, type=_ints)
    sp.add_argument("--point", required=True, type=_point)

    sp = sub.add_parser("jaccheck", help="Jacobian structure and pullback "
                                         "coefficients of the almost-exponential map")
    common(sp)
    sp.add_argument("--point", required=True, type=_point)
    sp.add_argument("--radius", required=True, type=float)
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--samples", type=int, default=100)

    sp = sub.add_parser("ballbox", help="surjectivity / forward / injectivity "
                                        "sampling of the ball-box correspondence")
    common(sp)
    sp.add_argument("--point", required=True, type=_point)
    sp.add_argument("--radius", required=True, type=float)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--samples", type=int, default=200)

    sp = sub.add_parser("distance", help="control-distance upper/lower bounds "
                                         "between two points")
    common(sp)
    sp.add_argument("--point", required=True, type=_point)
    sp.add_argument("--target", required=True, type=_point)

    sp = sub.add_parser("doubling", help="ball measures and doubling ratios "
                                         "from the grid-reachability oracle")
    common(sp)
    sp.add_argument("--point", required=True, type=_point)
    sp.add_argument("--radii", type=_floats, default=[0.05, 0.1, 0.2])

    sp = sub.add_parser("stratify", help="injectivity-radius stratification "
                                         "over the inner box")
    common(sp)
    sp.add_argument("--grid", type=int, default=15)

    sp = sub.add_parser("mollify", help="mollification convergence rate and "
                                        "uniform derivative bound")
    common(sp)
    sp.add_argument("--word", type=_ints, default=(1, 2))
    sp.add_argument("--sigmas", type=_floats, default=[1e-2, 1e-3, 1e-4])
    sp.add_argument("--grid", type=int, default=9)

    sp = sub.add_parser("all", help="run the full verification battery")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", help="write the per-criterion rows as CSV here")
    return p


def _cmd_table(args):
    fam = _load(args.family)
    table = build_table(fam)
    const = estimate_constants(fam, grid_resolution=args.grid)
    rows = []
    combos = increasing_tuples(table)
    for x in fam.sample_points(args.grid**fam.n, np.random.default_rng(args.seed)):
        row = {"point": " ".join(format(v, ".6g") for v in x)}
        for combo in combos:
            row["lambda_" + "-".join(map(str, combo))] = lambda_det(table, combo, x)
        rows.append(row)
    rep = VerificationReport(
        name=f"table[{fam.name}]",
        passed=const.hormander_ok,
        fitted={"q": table.q, "nu": const.nu, "L": const.L},
        rows=rows,
        notes=" ".join(str(e.word) for e in table.entries),
    )
    return [rep]


def _cmd_select(args):
    fam = _load(args.family)
    table = build_table(fam)
    rep = select_maximal(table, args.point, args.radius, args.eta)
    sel_report = VerificationReport(
        name=f"select[{fam.name}]", passed=True,
        fitted={
            "I": "-".join(map(str, rep.selection.indices)),
            "lambda_I": rep.lambda_I, "Lambda": rep.Lambda,
            "eta_achieved": rep.eta_achieved,
        },
    )
    stab = stability_check(table, rep.selection.indices, args.point, args.radius,
                           args.eta, args.samples, seed=args.seed)
    return [sel_report, stab]


def _cmd_expcheck(args):
    fam = _load(args.family)
    table = build_table(fam)
    rep = derivative_expansion_check(table, args.word, args.point,
                                     np.logspace(-6, -2, 25))
    out = VerificationReport(
        name=f"expcheck[{fam.name}:{'-'.join(map(str, args.word))}]",
        passed=True,
        fitted={
            "fitted_exponent": rep.fitted_exponent,
            "fitted_constant": rep.fitted_constant,
            "exact_within_noise": rep.exact_within_noise,
        },
        rows=rep.rows,
    )
    return [out]


def _cmd_jaccheck(args):
    fam = _load(args.family)
    table = build_table(fam)
    sel = select_maximal(table, args.point, args.radius, args.eta).selection
    jac = jacobian_structure_check(table, sel, args.point, args.radius,
                                   args.eta, args.samples, epsilon=args.epsilon,
                                   seed=args.seed)
    pull = pullback_check(table, sel, args.point, args.radius,
                          min(args.samples, 25), eta=args.eta,
                          epsilon=args.epsilon, seed=args.seed)
    return [jac, pull]


def _cmd_ballbox(args):
    fam = _load(args.family)
    table = build_table(fam)
    sel = select_maximal(table, args.point, args.radius).selection
    rep = ballbox_verify(table, sel, args.point, args.radius, args.epsilon,
                         sample_count=args.samples, seed=args.seed)
    return [rep]


def _cmd_distance(args):
    fam = _load(args.family)
    est = cc_upper(fam, args.point, args.target, seed=args.seed)
    rep = VerificationReport(
        name=f"distance[{fam.name}]",
        passed=est.residual <= 1e-6,
        fitted={"upper": est.upper, "lower": est.lower,
                "witness_residual": est.residual,
                "witness_pieces": est.witness.shape[0]},
        rows=[{"piece": i,
               **{f"b{j + 1}": est.witness[i, j] for j in range(fam.m)}}
              for i in range(est.witness.shape[0])],
    )
    return [rep]


def _cmd_doubling(args):
    fam = _load(args.family)
    table = build_table(fam)
    rep = doubling_estimate(fam, table, args.point, args.radii, seed=args.seed)
    return [rep]


def _cmd_stratify(args):
    fam = _load(args.family)
    table = build_table(fam)
    st = stratify(fam, table, args.grid)
    rep = VerificationReport(
        name=f"stratify[{fam.name}]",
        passed=st.r_tilde0 > 0.0,
        fitted={
            "r_tilde0": st.r_tilde0,
            "strata": "/".join(str(rec["k"]) for rec in st.strata),
            "radii": tuple(rec["r_k"] for rec in st.strata),
        },
        rows=st.rows(),
    )
    return [rep]


def _cmd_mollify(args):
    fam = _load(args.family)
    conv = convergence_check(fam, args.word, args.sigmas, grid=args.grid)
    bound = uniform_bound_check(fam, args.sigmas, grid=args.grid)
    return [conv, bound]


def _cmd_all(args):
    return acceptance.run_all(seed=args.seed)


_COMMANDS = {
    "table": _cmd_table,
    "select": _cmd_select,
    "expcheck": _cmd_expcheck,
    "jaccheck": _cmd_jaccheck,
    "ballbox": _cmd_ballbox,
    "distance": _cmd_distance,
    "doubling": _cmd_doubling,
    "stratify": _cmd_stratify,
    "mollify": _cmd_mollify,
    "all": _cmd_all,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        reports = _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CCBoxError as exc:
        print(f"[FAIL] {args.command}: {type(exc).__name__}: {exc}")
        print(f"FAILED: {args.command}")
        return 1
    for rep in reports:
        print(rep.summary_line())
    if args.output:
        rows = []
        for rep in reports:
            rows.extend({"report": rep.name, **row} for row in rep.rows)
        with open(args.output, "w", newline="") as fh:
            fh.write(rows_to_csv(rows))
    failures = [rep.name for rep in reports if not rep.passed]
    if failures:
        print("FAILED: " + ",".join(failures))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
