"""Commutator tables, hand-checked bracket values and family loading."""

import warnings

import numpy as np
import pytest
from pytest import approx

from ccbox import (
    HormanderWarning, UnsupportedDepthError, Word, build_table, builtin_family,
    estimate_constants, eval_commutator, load_family,
)
from ccbox.fields import fd_jacobian, reduced_words


def test_reduced_words_step2():
    # m=2, s=2: both letters, then the single bracket (j < k)
    assert reduced_words(2, 2) == [(1,), (2,), (1, 2)]


def test_reduced_words_step3_counts():
    words = reduced_words(2, 3)
    assert (1, 1, 2) in words and (2, 1, 2) in words
    assert all(len(w) <= 3 for w in words)


def test_table_sizes(tables):
    assert tables["heisenberg"].q == 3
    assert tables["grushin"].q == 3
    assert tables["martinet"].q == 5
    assert tables["wright"].q == 3


def test_heisenberg_bracket(tables):
    t = tables["heisenberg"]
    for x in ([0.0, 0.0, 0.0], [0.3, -0.2, 0.1]):
        assert t.eval(3, np.array(x)) == approx([0.0, 0.0, 1.0])


def test_grushin_bracket(tables):
    assert tables["grushin"].eval(3, np.array([0.7, -0.1])) == approx([0.0, 1.0])


def test_martinet_nested_brackets(tables):
    t = tables["martinet"]
    x = np.array([0.2, 0.1, 0.0])
    # [X1, X2] = 2 x1 d3, [X1,[X1,X2]] = 2 d3, [X2,[X1,X2]] = 0
    assert t.eval(3, x) == approx([0.0, 0.0, 0.4])
    assert t.eval(4, x) == approx([0.0, 0.0, 2.0])
    assert t.eval(5, x) == approx([0.0, 0.0, 0.0])


def test_wright_bracket_profile(tables):
    # a'(x1) = 1 + 2 x1
    x = np.array([0.25, 0.0])
    assert tables["wright"].eval(3, x) == approx([0.0, 1.5])


def test_depth_guard(families):
    with pytest.raises(UnsupportedDepthError):
        eval_commutator(families["heisenberg"], Word((1, 1, 2)), np.zeros(3))


def test_analytic_jacobians_validate(families):
    for fam in families.values():
        assert fam.validate()


def test_kinked_fd_jacobian():
    # one-sided stencil at the |x| kink recovers the right-hand slope
    fam = builtin_family("nonsmooth_step2")
    J = fam.field_jacobian(2, np.array([0.0, 0.0]))
    num = fd_jacobian(fam.coeffs[1], np.array([0.0, 0.0]), kinks=fam.kinks)
    assert num == approx(J, abs=1e-6)
    assert J[1, 0] == approx(1.0)


def test_estimate_constants_heisenberg(families):
    const = estimate_constants(families["heisenberg"], grid_resolution=5)
    assert const.hormander_ok
    assert const.nu == approx(1.0)


def test_estimate_constants_flags_rank_deficiency(tmp_path):
    cfg = tmp_path / "flat.yaml"
    cfg.write_text(
        "dimension: 2\nstep: 2\n"
        "fields:\n  - ['1', '0']\n  - ['1', '0']\n"
        "omega_inner: [[-1, 1], [-1, 1]]\n"
        "omega_outer: [[-1.5, 1.5], [-1.5, 1.5]]\n"
    )
    fam = load_family(cfg)
    with pytest.warns(HormanderWarning):
        const = estimate_constants(fam, grid_resolution=5)
    assert not const.hormander_ok


def test_load_family_expressions(tmp_path):
    cfg = tmp_path / "grushin_like.yaml"
    cfg.write_text(
        "name: grushin_like\ndimension: 2\nstep: 2\n"
        "fields:\n  - ['1', '0']\n  - ['0', 'x1']\n"
        "omega_inner: [[-1, 1], [-1, 1]]\n"
        "omega_outer: [[-1.5, 1.5], [-1.5, 1.5]]\n"
    )
    fam = load_family(cfg)
    table = build_table(fam)
    assert table.eval(3, np.array([0.4, 0.0])) == approx([0.0, 1.0])


def test_load_family_builtin_alias(tmp_path):
    cfg = tmp_path / "h.yaml"
    cfg.write_text("builtin: heisenberg\n")
    assert load_family(cfg).name == "heisenberg"
