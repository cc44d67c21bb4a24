"""Mollified families: kernel quadrature, bracket gap and convergence."""

import numpy as np
import pytest
from pytest import approx
from scipy import integrate

from ccbox import (
    DomainError, builtin_family, convergence_check, eval_commutator,
    mollified_commutator, mollify_family, uniform_bound_check,
)
from ccbox.fields import VectorFieldFamily


def _phi2(y2, y1):
    rho2 = y1 * y1 + y2 * y2
    return np.exp(-1.0 / (1.0 - rho2)) if rho2 < 1.0 else 0.0


@pytest.fixture(scope="module")
def kernel_moment():
    # int |y1| phi / int phi over the plane, adaptive quadrature oracle
    num = integrate.dblquad(lambda y2, y1: abs(y1) * _phi2(y2, y1), -1, 1, -1, 1)[0]
    den = integrate.dblquad(_phi2, -1, 1, -1, 1)[0]
    return num / den


def test_kernel_mass_is_one(families):
    mf = mollify_family(families["grushin"], 0.05)
    assert mf.kernel_mass() == approx(1.0, abs=1e-12)


def test_affine_coefficients_unchanged(families):
    # symmetric kernel: odd moments vanish, so affine coefficients survive
    mf = mollify_family(families["grushin"], 0.05)
    x = np.array([0.3, 0.1])
    assert mf.family.field_value(2, x) == approx([0.0, 0.3], abs=1e-12)
    assert mf.family.field_value(1, x) == approx([1.0, 0.0], abs=1e-12)


def test_heisenberg_bracket_unchanged(families):
    mf = mollify_family(families["heisenberg"], 0.1, quad_order=10)
    got = mollified_commutator(mf, (1, 2), np.array([0.2, -0.1, 0.0]))
    assert got == approx([0.0, 0.0, 1.0], abs=1e-10)


def test_kink_profile_values_at_zero(families, kernel_moment):
    # a(s) = s + s|s|: the smoothed profile vanishes at 0 by symmetry while
    # its derivative picks up the kernel moment of |y1|
    fam = families["nonsmooth_step2"]
    sigma = 1e-2
    mf = mollify_family(fam, sigma)
    coeff = mf.family.field_value(2, np.array([0.0, 0.0]))
    assert coeff[1] == approx(0.0, abs=1e-10)
    bracket = mollified_commutator(mf, (1, 2), np.zeros(2))
    assert bracket[1] == approx(1.0 + 2.0 * sigma * kernel_moment, rel=1e-3)


def test_bracket_locality_away_from_kink(families):
    fam = families["nonsmooth_step2"]
    sigma = 0.01
    mf = mollify_family(fam, sigma)
    x = np.array([0.2, 0.0])  # kernel support misses the kink at x1 = 0
    got = mollified_commutator(mf, (1, 2), x)
    exact = eval_commutator(fam, (1, 2), x)
    assert got == approx(exact, abs=1e-9)
    assert exact[1] == approx(1.4)


def test_smoothed_vs_unsmoothed_bracket_differ_at_kink(families, kernel_moment):
    # f_w^sigma(0) != f_w(0): exactly the 2 sigma k1 gap
    fam = families["nonsmooth_step2"]
    sigma = 5e-3
    mf = mollify_family(fam, sigma)
    gap = mollified_commutator(mf, (1, 2), np.zeros(2))[1] \
        - eval_commutator(fam, (1, 2), np.zeros(2))[1]
    assert gap == approx(2.0 * sigma * kernel_moment, rel=0.01)


def test_convergence_rate_linear(families, kernel_moment):
    rep = convergence_check(families["nonsmooth_step2"], (1, 2),
                            [1e-2, 1e-3, 1e-4], grid=9)
    assert rep.passed
    assert rep.fitted["slope"] == approx(1.0, abs=0.05)
    for row in rep.rows:
        assert row["sup_diff"] == approx(2.0 * row["sigma"] * kernel_moment,
                                         rel=0.05)


def test_convergence_smooth_family_within_noise(families):
    rep = convergence_check(families["grushin"], (1, 2), [1e-2, 1e-3], grid=5)
    assert rep.passed
    assert rep.fitted.get("exact_within_noise")


def test_single_sigma_reports_value_only(families):
    rep = convergence_check(families["nonsmooth_step2"], (1, 2), [1e-3], grid=5)
    assert rep.passed
    assert "slope" not in rep.fitted


def test_uniform_bound(families):
    rep = uniform_bound_check(families["nonsmooth_step2"], [1e-2, 1e-3, 1e-4],
                              grid=9)
    assert rep.passed
    assert rep.fitted["bound"] <= 2.2


def test_uniform_bound_constant_brackets(families):
    rep = uniform_bound_check(families["grushin"], [1e-2, 1e-3], grid=5)
    assert rep.fitted["bound"] == approx(0.0, abs=1e-8)


def test_translation_equivariance():
    # mollifying a shifted profile equals shifting the mollified one
    def prof(shift):
        def f1(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape)
            out[..., 0] = 1.0
            return out

        def f2(x, shift=shift):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape)
            s = x[..., 0] - shift
            out[..., 1] = s + s * np.abs(s)
            return out

        return VectorFieldFamily(
            n=2, m=2, s=2, coeffs=[f1, f2],
            omega_inner=[[-0.5, 0.5]] * 2, omega_outer=[[-0.75, 0.75]] * 2,
            name=f"shift{shift}",
        )

    sigma = 0.02
    m0 = mollify_family(prof(0.0), sigma)
    m1 = mollify_family(prof(0.1), sigma)
    x = np.array([0.23, 0.0])
    shifted = m1.family.field_value(2, x)
    base = m0.family.field_value(2, x - np.array([0.1, 0.0]))
    assert shifted == approx(base, abs=1e-9)


def test_sigma_too_large_rejected(families):
    with pytest.raises(DomainError):
        mollify_family(families["wright"], 0.5)
