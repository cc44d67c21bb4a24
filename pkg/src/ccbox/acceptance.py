"""End-to-end verification suite against closed-form oracles.

Each function checks one quantitative claim at desk scale and returns a
VerificationReport; run_all executes the whole battery.  Expected values are
either closed forms (profile families, Heisenberg), independently computed
quadratures/root-finds, or fitted constants with stability requirements --
never copied from a prior run of this code.
"""

import os
import tempfile

import numpy as np
from scipy import integrate

from .approxexp import (approx_exp, derivative_expansion_check,
                        jacobian_structure_check)
from .errors import HormanderWarning
from .fields import BUILTIN_NAMES, build_table, builtin_family, estimate_constants
from .maximality import select_maximal, stability_check, stratify
from .metric import ballbox_verify, doubling_estimate, injectivity_fit
from .mollify import bump_profile, convergence_check, uniform_bound_check
from .reports import VerificationReport

import warnings


def _wright_formula(x, h):
    """Closed form of exp_*(h [X1, X2]) for the profile a(s) = s + s^2."""
    a = lambda s: s + s * s  # noqa: E731
    root = abs(h) ** 0.5
    if h == 0.0:
        return np.array(x, dtype=float)
    return np.array([x[0], x[1] + (a(x[0] + root) - a(x[0])) / root * h])


def criterion_1(seed=0):
    """Profile-family commutator exponential against its closed form."""
    fam = builtin_family("wright")
    table = build_table(fam)
    rng = np.random.default_rng(np.random.Philox(key=seed))
    worst = 0.0
    for _ in range(200):
        x = (2.0 * rng.random(2) - 1.0) * 0.3
        h = float(10.0 ** (-5.0 + 3.0 * rng.random()) * rng.choice([-1.0, 1.0]))
        got = approx_exp(table, (1, 2), h, x)
        want = _wright_formula(x, h)
        rel = float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want))))
        worst = max(worst, rel)
    return VerificationReport(
        name="1_profile_exp_closed_form", passed=worst <= 1e-7,
        fitted={"worst_rel_error": worst, "samples": 200},
    )


def criterion_2():
    """Heisenberg exp_*(t[X1,X2])(0) = (0,0,t) through the RK4 path."""
    fam = builtin_family("heisenberg")
    table = build_table(fam)
    tol = 1e-10
    worst = 0.0
    for mag in (1e-1, 1e-2, 1e-3, 1e-4):
        for t in (mag, -mag):
            got = approx_exp(table, (1, 2), t, np.zeros(3), method="rk4", tol=tol)
            worst = max(worst, float(np.max(np.abs(got - np.array([0, 0, t])))))
    return VerificationReport(
        name="2_heisenberg_vertical_exactness", passed=worst <= 10.0 * tol,
        fitted={"worst_abs_error": worst, "allowed": 10.0 * tol},
    )


def criterion_3():
    """Remainder of d/dt exp_*: fitted residual 1.5 sqrt(t) on the profile family."""
    fam = builtin_family("wright")
    table = build_table(fam)
    t_grid = np.logspace(-6, -2, 25)
    rep = derivative_expansion_check(table, (1, 2), np.zeros(2), t_grid)
    ok = (0.48 <= rep.fitted_exponent <= 0.52) and (1.45 <= rep.fitted_constant <= 1.55)
    return VerificationReport(
        name="3_remainder_order", passed=ok,
        fitted={"exponent": rep.fitted_exponent, "constant": rep.fitted_constant},
    )


def criterion_4(seed=0):
    """Determinant stability along subunit paths on the Grushin plane."""
    fam = builtin_family("grushin")
    table = build_table(fam)
    rep = stability_check(table, (1, 2), (0.5, 0.0), 0.1, eta=0.5,
                          path_samples=1000, budget=0.25, seed=seed)
    row = rep.rows[0]
    ok = bool(row["aceto_ok"])
    return VerificationReport(
        name="4_maximality_stability", passed=ok,
        fitted={"worst_dev": row["worst_dev"], "allowed": row["dev_allowed"],
                "escaped": row["escaped"], "samples": 1000},
    )


def criterion_5(seed=0):
    """det dE / lambda_I(x) within [1/2, 2] across the anisotropic box."""
    reports = []
    for name in BUILTIN_NAMES:
        fam = builtin_family(name)
        table = build_table(fam)
        x = np.zeros(fam.n)
        sel = select_maximal(table, x, 0.1).selection
        rep = jacobian_structure_check(table, sel, x, 0.1, 0.5, 200, seed=seed)
        reports.append((name, rep))
    # off-center spot where the weight-2 tuple wins
    gr = build_table(builtin_family("grushin"))
    sel = select_maximal(gr, (0.5, 0.0), 0.1).selection
    reports.append(("grushin@0.5",
                    jacobian_structure_check(gr, sel, np.array([0.5, 0.0]),
                                             0.1, 0.5, 200, seed=seed)))
    lo = min(r.fitted["det_ratio_min"] for _, r in reports)
    hi = max(r.fitted["det_ratio_max"] for _, r in reports)
    passed = all(r.passed for _, r in reports) and 0.5 <= lo and hi <= 2.0
    return VerificationReport(
        name="5_jacobian_comparability", passed=passed,
        fitted={"det_ratio_min": lo, "det_ratio_max": hi,
                "samples": 200 * len(reports)},
        rows=[{"family": n, "min": r.fitted["det_ratio_min"],
               "max": r.fitted["det_ratio_max"]} for n, r in reports],
    )


def criterion_6(seed=0):
    """Ball-box surjectivity with a radius-halving stability check on c_fit."""
    rows = []
    passed = True
    for name in ("grushin", "heisenberg", "martinet"):
        fam = builtin_family(name)
        table = build_table(fam)
        x = np.zeros(fam.n)
        fits = {}
        for r in (0.1, 0.05):
            sel = select_maximal(table, x, r).selection
            rep = ballbox_verify(table, sel, x, r, 0.5, sample_count=200,
                                 seed=seed, forward_samples=2, pair_budget=50)
            fits[r] = rep.fitted["c_fit"]
            rows.append({"family": name, "r": r, "c_fit": rep.fitted["c_fit"],
                         "inversion_failures": rep.fitted["inversion_failures"]})
            if rep.fitted["c_fit"] <= 0.0:
                passed = False
        if fits[0.1] > 0 and abs(fits[0.05] - fits[0.1]) > 0.2 * fits[0.1]:
            passed = False
    return VerificationReport(
        name="6_ballbox_surjectivity", passed=passed,
        fitted={f"c_fit[{row['family']}@{row['r']}]": row["c_fit"] for row in rows},
        rows=rows,
    )


def criterion_7(seed=0):
    """Injectivity separation constant above 0.1 on every builtin."""
    rows = []
    worst = np.inf
    for name in BUILTIN_NAMES:
        fam = builtin_family(name)
        table = build_table(fam)
        x = np.zeros(fam.n)
        sel = select_maximal(table, x, 0.1).selection
        c_inj, pairs = injectivity_fit(table, sel, x, 0.1, 0.5, 10_000, seed=seed)
        rows.append({"family": name, "c_inj": c_inj, "pairs": pairs})
        worst = min(worst, c_inj)
    return VerificationReport(
        name="7_injectivity", passed=worst > 0.1,
        fitted={"min_c_inj": float(worst)}, rows=rows,
    )


def criterion_8(seed=0):
    """Doubling ratios 2^3 and 2^4 from the grid-reachability oracle."""
    results = {}
    rows = []
    for name, target, halfwidth in (("grushin", 8.0, 2.0), ("heisenberg", 16.0, 4.0)):
        fam = builtin_family(name)
        table = build_table(fam)
        rep = doubling_estimate(fam, table, np.zeros(fam.n), [0.05, 0.1, 0.2],
                                seed=seed)
        mean = rep.fitted["mean_ratio"]
        results[name] = (abs(mean - target) <= halfwidth) and rep.passed
        rows.extend({"family": name, **row} for row in rep.rows)
    return VerificationReport(
        name="8_doubling", passed=all(results.values()),
        fitted={"grushin_ok": results["grushin"],
                "heisenberg_ok": results["heisenberg"]},
        rows=rows,
    )


def _kernel_first_moment():
    """int |y1| phi(y) d2y for the normalized planar bump, by adaptive
    quadrature independent of the package's tensor rule."""
    def phi(y2, y1):
        rho2 = y1 * y1 + y2 * y2
        return np.exp(-1.0 / (1.0 - rho2)) if rho2 < 1.0 else 0.0

    num = integrate.dblquad(lambda y2, y1: abs(y1) * phi(y2, y1), -1, 1, -1, 1)[0]
    den = integrate.dblquad(phi, -1, 1, -1, 1)[0]
    return num / den


def criterion_9():
    """Linear mollification rate with the closed-form supremum 2 sigma k1."""
    fam = builtin_family("nonsmooth_step2")
    sigmas = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
    rep = convergence_check(fam, (1, 2), sigmas, grid=17)
    slope = rep.fitted.get("slope", float("nan"))
    kappa = _kernel_first_moment()
    worst_ratio_err = 0.0
    for row in rep.rows:
        predicted = 2.0 * row["sigma"] * kappa
        worst_ratio_err = max(worst_ratio_err, abs(row["sup_diff"] / predicted - 1.0))
    passed = (0.95 <= slope <= 1.05) and worst_ratio_err <= 0.05
    return VerificationReport(
        name="9_mollification_rate", passed=passed,
        fitted={"slope": slope, "worst_closed_form_error": worst_ratio_err,
                "kernel_moment": kappa},
        rows=rep.rows,
    )


def criterion_10():
    """Uniform horizontal-derivative bound under shrinking sigma."""
    fam = builtin_family("nonsmooth_step2")
    rep = uniform_bound_check(fam, [1e-2, 1e-3, 1e-4], grid=17)
    bound = rep.fitted["bound"]
    passed = rep.passed and bound <= 2.2
    return VerificationReport(
        name="10_uniform_bound", passed=passed,
        fitted={"bound": bound, "allowed": 2.2}, rows=rep.rows,
    )


def criterion_11():
    """Stratification radii positive everywhere; Grushin radii cross-checked."""
    rows = []
    passed = True
    details = {}
    for name in BUILTIN_NAMES:
        fam = builtin_family(name)
        table = build_table(fam)
        grid = 21 if fam.n == 2 else 9
        st = stratify(fam, table, grid)
        rows.append({"family": name, "r_tilde0": st.r_tilde0,
                     "strata": len(st.strata)})
        if st.r_tilde0 <= 0.0:
            passed = False
        if name == "grushin":
            by_k = {rec["k"]: rec for rec in st.strata}
            r2 = by_k[2]["r_k"]
            if abs(r2 - 1.0 / st.stratify_c) > 1e-12:
                passed = False
            # independent recomputation of the shallow-stratum radius
            k1 = by_k[1]
            min_x1 = float(np.min(np.abs(st.points[k1["stratum_indices"], 0])))
            if abs(k1["r_k"] - min_x1 / st.stratify_c) > 1e-12:
                passed = False
            details.update({"grushin_r2": r2, "grushin_r1": k1["r_k"],
                            "grushin_min_x1_outside_tube": min_x1})
    return VerificationReport(
        name="11_stratification", passed=passed,
        fitted={**details, "all_positive": all(r["r_tilde0"] > 0 for r in rows)},
        rows=rows,
    )


NON_HORMANDER_YAML = """\
name: non_hormander
dimension: 2
step: 2
fields:
  - ["1", "0"]
  - ["1", "0"]
omega_inner: [[-1, 1], [-1, 1]]
omega_outer: [[-1.5, 1.5], [-1.5, 1.5]]
"""


def criterion_12():
    """Negative control: a rank-deficient family must be rejected loudly."""
    from . import cli
    from .fields import load_family

    fd, path = tempfile.mkstemp(suffix=".yaml")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(NON_HORMANDER_YAML)
        fam = load_family(path)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            const = estimate_constants(fam, grid_resolution=5)
        warned = any(issubclass(w.category, HormanderWarning) for w in caught)
        exit_code = cli.main(["select", "--family", path,
                              "--point", "0.1,0.1", "--radius", "0.1"])
    finally:
        os.unlink(path)
    passed = warned and (not const.hormander_ok) and exit_code != 0
    return VerificationReport(
        name="12_negative_control", passed=passed,
        fitted={"warned": warned, "hormander_ok": const.hormander_ok,
                "cli_exit": exit_code},
    )


CRITERIA = [
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    criterion_11, criterion_12,
]


def run_all(seed=0):
    """Run every acceptance criterion; returns the list of reports."""
    reports = []
    for fn in CRITERIA:
        try:
            reports.append(fn(seed) if "seed" in fn.__code__.co_varnames else fn())
        except Exception as exc:  # a crash is a failure, not an abort
            reports.append(VerificationReport(
                name=fn.__name__, passed=False,
                notes=f"{type(exc).__name__}: {exc}",
            ))
    return reports
