"""Determinant scales, tuple selection, stability and stratification."""

import numpy as np
import pytest
from pytest import approx

from ccbox import (
    DegenerateBasisError, HormanderViolationError, big_lambda, lambda_det,
    resolve_in_basis, select_maximal, stability_check, stratify,
)
from ccbox.fields import VectorFieldFamily, build_table


def test_lambda_hand_values(tables):
    assert lambda_det(tables["heisenberg"], (1, 2, 3), np.zeros(3)) == approx(1.0)
    assert lambda_det(tables["grushin"], (1, 2), np.array([0.7, 0.0])) == approx(0.7)
    assert lambda_det(tables["martinet"], (1, 2, 4), np.zeros(3)) == approx(2.0)


def test_big_lambda_grushin_origin(tables):
    val, argmax = big_lambda(tables["grushin"], np.zeros(2), 0.1)
    assert val == approx(1e-3)
    assert argmax == (1, 3)


def test_big_lambda_grushin_offset(tables):
    # |a| r^2 beats r^3 as soon as r <= |a|
    val, argmax = big_lambda(tables["grushin"], np.array([0.5, 0.0]), 0.1)
    assert val == approx(0.5 * 0.01)
    assert argmax == (1, 2)


def test_big_lambda_scale_covariance(tables):
    t = tables["grushin"]
    v1, _ = big_lambda(t, np.zeros(2), 0.05)
    v2, _ = big_lambda(t, np.zeros(2), 0.1)
    assert v2 / v1 == approx(2.0**3, abs=1e-12)


def test_select_maximal_examples(tables):
    rep = select_maximal(tables["grushin"], np.zeros(2), 0.1)
    assert rep.selection.indices == (1, 3)
    assert rep.eta_achieved == 1.0
    rep = select_maximal(tables["martinet"], np.zeros(3), 0.2)
    assert rep.selection.indices == (1, 2, 4)


def test_argmax_invariant_under_common_scaling():
    # scaling every coefficient by c > 0 scales all determinants by c^n
    def make(c):
        def f1(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape)
            out[..., 0] = c
            return out

        def f2(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape)
            out[..., 1] = c * x[..., 0]
            return out

        return VectorFieldFamily(
            n=2, m=2, s=2, coeffs=[f1, f2],
            omega_inner=[[-1, 1]] * 2, omega_outer=[[-1.5, 1.5]] * 2,
            name=f"scaled{c}",
        )

    for x in (np.zeros(2), np.array([0.5, 0.0])):
        picks = {select_maximal(build_table(make(c)), x, 0.1).selection.indices
                 for c in (1.0, 3.0)}
        assert len(picks) == 1


def test_rank_deficiency_raises():
    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        return out

    fam = VectorFieldFamily(
        n=2, m=2, s=2, coeffs=[f, f],
        omega_inner=[[-1, 1]] * 2, omega_outer=[[-1.5, 1.5]] * 2,
    )
    with pytest.raises(HormanderViolationError):
        big_lambda(build_table(fam), np.zeros(2), 0.1)


def test_resolve_in_basis_cramer(tables):
    t = tables["grushin"]
    coeffs = resolve_in_basis(t, (1, 2), np.array([0.5, 0.0]), 3)
    assert coeffs == approx([0.0, 2.0])
    # recombination reproduces the resolved field
    ys = t.eval_all(np.array([0.5, 0.0]))
    recon = coeffs[0] * ys[0] + coeffs[1] * ys[1]
    assert recon == approx(ys[2], abs=1e-10)


def test_resolve_unit_vector(tables):
    t = tables["heisenberg"]
    assert resolve_in_basis(t, (1, 2, 3), np.zeros(3), 1) == approx([1, 0, 0])


def test_resolve_degenerate_guard(tables):
    with pytest.raises(DegenerateBasisError):
        resolve_in_basis(tables["grushin"], (1, 2), np.array([0.0, 0.0]), 3)


def test_stability_heisenberg_constant_lambda(tables):
    rep = stability_check(tables["heisenberg"], (1, 2, 3), np.zeros(3), 0.1,
                          eta=0.5, path_samples=25, seed=5)
    assert rep.passed
    assert rep.fitted["epsilon_star"] == approx(1.0)
    assert rep.rows[0]["worst_dev"] == approx(0.0, abs=1e-12)


def test_stability_grushin_budget(tables):
    rep = stability_check(tables["grushin"], (1, 2), np.array([0.5, 0.0]), 0.1,
                          eta=0.5, path_samples=100, budget=0.25, seed=5)
    assert rep.passed
    assert rep.rows[0]["worst_dev"] <= 0.25


def test_stratify_heisenberg_single_stratum(families, tables):
    st = stratify(families["heisenberg"], tables["heisenberg"], grid=7)
    assert len(st.strata) == 1
    assert st.r_tilde0 == approx(1.0 / st.stratify_c)


def test_stratify_grushin_layers(families, tables):
    st = stratify(families["grushin"], tables["grushin"], grid=21)
    by_k = {rec["k"]: rec for rec in st.strata}
    # deep stratum is exactly the x1 = 0 grid line
    deep = st.points[by_k[2]["stratum_indices"]]
    assert np.max(np.abs(deep[:, 0])) == approx(0.0, abs=1e-14)
    assert by_k[2]["r_k"] == approx(1.0 / st.stratify_c)
    # shallow radius from the minimum |x1| outside the removed tube
    shallow = st.points[by_k[1]["stratum_indices"]]
    assert by_k[1]["r_k"] == approx(np.min(np.abs(shallow[:, 0])) / st.stratify_c)
    assert st.r_tilde0 > 0.0


def test_stratify_martinet_deep_layer_value(families, tables):
    st = stratify(families["martinet"], tables["martinet"], grid=9)
    deep = [i for i in range(len(st.points)) if st.j_index[i] == 2]
    assert deep
    for i in deep[:5]:
        assert abs(st.points[i][0]) == approx(0.0, abs=1e-14)
        # layer value mu_2 = |lambda_(1,2,4)| + |lambda_(1,2,5)| = 2
        assert st.mu[i][1] == approx(2.0)
