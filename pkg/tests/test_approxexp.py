"""Approximate commutator exponentials and the almost-exponential chart."""

import numpy as np
import pytest
from pytest import approx
from scipy.optimize import brentq

from ccbox import (
    TupleSelection, almost_exponential, approx_commutator_plan, approx_exp,
    derivative_expansion_check, invert_E, jacobian_E, jacobian_structure_check,
    pullback_coefficients, scaling_map, select_maximal,
)


def _wright_exp(x, h):
    a = lambda s: s + s * s  # noqa: E731
    if h == 0.0:
        return np.array(x, dtype=float)
    root = abs(h) ** 0.5
    return np.array([x[0], x[1] + (a(x[0] + root) - a(x[0])) / root * h])


def test_plan_leg_structure(tables):
    plan = approx_commutator_plan(tables["heisenberg"], (1, 2), 0.1)
    assert [(l.field, l.duration) for l in plan.legs] == [
        (1, 0.1), (2, 0.1), (1, -0.1), (2, -0.1),
    ]


def test_plan_leg_counts_by_depth(tables):
    t = tables["martinet"]
    assert len(approx_commutator_plan(t, (1,), 0.1).legs) == 1
    assert len(approx_commutator_plan(t, (1, 2), 0.1).legs) == 4
    assert len(approx_commutator_plan(t, (1, 1, 2), 0.1).legs) == 10


def test_heisenberg_commutator_composition(tables):
    # the 4-leg composition at tau reaches exactly (0, 0, tau^2)
    got = approx_exp(tables["heisenberg"], (1, 2), 0.01, np.zeros(3))
    assert got == approx([0.0, 0.0, 0.01], abs=1e-14)
    got = approx_exp(tables["heisenberg"], (1, 2), -0.01, np.zeros(3))
    assert got == approx([0.0, 0.0, -0.01], abs=1e-14)


def test_wright_exp_closed_form(tables, rng):
    t = tables["wright"]
    for _ in range(40):
        x = (2.0 * rng.random(2) - 1.0) * 0.3
        h = float(10.0 ** (-4 + 2 * rng.random()) * rng.choice([-1.0, 1.0]))
        assert approx_exp(t, (1, 2), h, x) == approx(_wright_exp(x, h), rel=1e-9)


def test_almost_exponential_applies_last_factor_first(tables):
    t = tables["wright"]
    sel = TupleSelection.from_table(t, (1, 3))
    # h2 acts first at x=0: (0, h2 + h2^{3/2}), then h1 shifts x1
    got = almost_exponential(t, sel, np.zeros(2), np.array([0.05, 0.04]))
    assert got == approx([0.05, 0.04 + 0.04**1.5], abs=1e-12)


def test_scaling_map_shares_code_path(tables):
    t = tables["grushin"]
    sel = TupleSelection.from_table(t, (1, 3))
    r, tt = 0.2, np.array([0.3, -0.4])
    direct = almost_exponential(t, sel, np.zeros(2), sel.dilate(r, tt))
    assert scaling_map(t, sel, np.zeros(2), r, tt) == approx(direct)


def test_jacobian_wright_diagonal(tables):
    t = tables["wright"]
    sel = TupleSelection.from_table(t, (1, 3))
    J = jacobian_E(t, sel, np.zeros(2), np.array([0.0, 0.04]))
    # dE/dh2 = 1 + 1.5 sqrt(h2) = 1.3 at h2 = 0.04
    assert J == approx(np.array([[1.0, 0.0], [0.0, 1.3]]), abs=1e-5)


def test_expansion_wright_fit(tables):
    rep = derivative_expansion_check(tables["wright"], (1, 2), np.zeros(2),
                                     np.logspace(-6, -2, 25))
    assert rep.fitted_exponent == approx(0.5, abs=0.02)
    assert rep.fitted_constant == approx(1.5, abs=0.05)


def test_expansion_heisenberg_exact(tables):
    rep = derivative_expansion_check(tables["heisenberg"], (1, 2), np.zeros(3),
                                     np.logspace(-6, -2, 10))
    assert rep.exact_within_noise


def test_jacobian_structure_all_families(tables):
    for name, t in tables.items():
        x = np.zeros(t.family.n)
        sel = select_maximal(t, x, 0.1).selection
        rep = jacobian_structure_check(t, sel, x, 0.1, 0.5, 50, seed=7)
        assert rep.passed, name
        assert 0.5 <= rep.fitted["det_ratio_min"] <= rep.fitted["det_ratio_max"] <= 2.0


def test_pullback_closed_forms(tables):
    # profile family at x=0, I=(1,3): S(t) = (r t1, r^2 t2 + r^3 t2^{3/2})
    t = tables["wright"]
    sel = TupleSelection.from_table(t, (1, 3))
    r = 0.2
    for t1, t2 in ((0.1, 0.2), (-0.2, 0.3), (0.0, 0.05)):
        tt = np.array([t1, t2])
        denom = 1.0 + 1.5 * r * np.sqrt(t2)
        c3 = pullback_coefficients(t, sel, np.zeros(2), r, tt, word_index=3)
        assert c3 == approx([0.0, (1.0 + 2.0 * r * t1) / denom], abs=1e-5)
        c2 = pullback_coefficients(t, sel, np.zeros(2), r, tt, word_index=2)
        assert c2 == approx([0.0, (t1 + r * t1 * t1) / denom], abs=1e-5)


def test_invert_wright_scalar_root(tables):
    t = tables["wright"]
    sel = TupleSelection.from_table(t, (1, 3))
    target = np.array([0.0, 0.009])
    h = invert_E(t, sel, np.zeros(2), target)
    # independent scalar root of h2 + h2^{3/2} = 0.009
    root = brentq(lambda v: v + v**1.5 - 0.009, 0.0, 0.009)
    assert h == approx([0.0, root], abs=1e-9)
    assert max(abs(h[0]), abs(h[1]) ** 0.5) <= 0.1  # inside Q_I(eps r)


def test_invert_roundtrip(tables, rng):
    t = tables["martinet"]
    sel = select_maximal(t, np.zeros(3), 0.1).selection
    for _ in range(10):
        h = sel.sample_box(0.05, 1, rng)[0]
        y = almost_exponential(t, sel, np.zeros(3), h)
        assert invert_E(t, sel, np.zeros(3), y) == approx(h, abs=1e-7)
