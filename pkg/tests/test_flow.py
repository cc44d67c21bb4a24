"""Single flows, plan composition and integrator order."""

import numpy as np
import pytest
from pytest import approx

from ccbox import DomainEscapeError, FlowLeg, FlowPlan, integrate_flow, run_plan
from ccbox.fields import VectorFieldFamily
from ccbox.flow import _rk4_fixed


def _sine_family():
    # x2' = sin(x1) along X1: closed form x2(t) = x2 + cos(x1) - cos(x1 + t)
    def f1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        out[..., 1] = np.sin(x[..., 0])
        return out

    def f2(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = 1.0
        return out

    return VectorFieldFamily(
        n=2, m=2, s=2, coeffs=[f1, f2],
        omega_inner=[[-2, 2]] * 2, omega_outer=[[-3, 3]] * 2,
        name="sine",
    )


def test_exact_flow_used_by_default(families):
    fam = families["heisenberg"]
    traj = integrate_flow(fam, 1, np.array([0.0, 0.4, 0.0]), 0.5)
    assert traj.endpoint == approx([0.5, 0.4, -0.1])
    assert traj.est_error == 0.0


def test_rk4_matches_exact_flow(families):
    fam = families["grushin"]
    x = np.array([0.2, -0.1])
    for j, t in ((1, 0.3), (2, -0.25)):
        exact = integrate_flow(fam, j, x, t, method="auto").endpoint
        numeric = integrate_flow(fam, j, x, t, method="rk4", tol=1e-12).endpoint
        assert numeric == approx(exact, abs=1e-10)


def test_rk4_fourth_order_on_nonlinear_flow():
    fam = _sine_family()
    x0 = np.array([0.0, 0.0])
    t = 1.0
    exact = np.array([t, np.cos(0.0) - np.cos(t)])
    errs = []
    steps = [4, 8, 16, 32]
    for nsteps in steps:
        end = _rk4_fixed(lambda y: fam.field_value(1, y), x0, t, nsteps)
        errs.append(np.max(np.abs(end - exact)))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert -slope == approx(4.0, abs=0.3)


def test_heisenberg_rk4_is_exact_to_roundoff(families):
    # polynomial coefficients of degree <= 1: RK4 integrates them exactly,
    # so the only residue is roundoff
    fam = families["heisenberg"]
    x = np.array([0.1, 0.2, 0.0])
    end = integrate_flow(fam, 2, x, 0.3, method="rk4", tol=1e-12).endpoint
    assert end == approx([0.1, 0.5, 0.015], abs=1e-14)


def test_plan_reversal_roundtrip(families):
    fam = families["martinet"]
    plan = FlowPlan(legs=[FlowLeg(1, 0.2), FlowLeg(2, 0.1), FlowLeg(1, -0.05)])
    x = np.array([0.1, 0.0, 0.0])
    fwd = run_plan(fam, plan, x).endpoint
    back = run_plan(fam, plan.reversed(), fwd).endpoint
    assert back == approx(x, abs=1e-12)
    assert plan.total_duration() == approx(0.35)


def test_domain_escape_raises(families):
    fam = families["grushin"]
    with pytest.raises(DomainEscapeError):
        integrate_flow(fam, 1, np.array([0.0, 0.0]), 5.0)


def test_zero_duration_is_identity(families):
    fam = families["wright"]
    x = np.array([0.2, 0.1])
    assert integrate_flow(fam, 1, x, 0.0).endpoint == approx(x)
