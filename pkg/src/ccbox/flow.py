"""Single-field flows and ordered flow compositions.

Integrator is classical RK4 with a fixed step and one Richardson halving for
the error estimate: the coefficient maps are Lipschitz but possibly not C^2,
so adaptive high-order schemes buy nothing past the kink set.  Built-in
families carry closed-form flows which are used by default (`method="auto"`);
pass `method="rk4"` to force numerical integration.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainEscapeError, StiffnessError

DEFAULT_TOL = 1e-10
_MAX_DOUBLINGS = 12


@dataclass(frozen=True)
class FlowLeg:
    field: int  # 1-based horizontal field index
    duration: float


@dataclass
class FlowPlan:
    """Executable list of (field, signed duration) legs, in application order
    (the first list element acts first on the start point)."""

    legs: list
    tol: float = DEFAULT_TOL
    max_step: float = None

    def reversed(self):
        return FlowPlan(
            legs=[FlowLeg(l.field, -l.duration) for l in reversed(self.legs)],
            tol=self.tol,
            max_step=self.max_step,
        )

    def total_duration(self):
        return float(sum(abs(l.duration) for l in self.legs))


@dataclass
class Trajectory:
    endpoint: np.ndarray
    samples: list = field(default_factory=list)
    est_error: float = 0.0


def _rk4_fixed(f, x, t, nsteps):
    h = t / nsteps
    y = np.array(x, dtype=float)
    for _ in range(nsteps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _check_inside(family, path_points, t):
    for frac, p in path_points:
        if not family.contains(p):
            raise DomainEscapeError(
                f"trajectory left omega_outer near t = {frac * t:.6g}",
                exit_time=frac * t,
                point=p,
            )


def integrate_flow(family, field_index, x, t, tol=DEFAULT_TOL, method="auto",
                   max_step=None, keep_samples=False):
    """Approximate exp(t X_j) x with a step-halving error estimate.

    Raises DomainEscapeError if the trajectory leaves omega_outer and
    StiffnessError if Richardson halvings refuse to converge."""
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return Trajectory(endpoint=x.copy(), est_error=0.0)

    if method == "auto" and family.exact_flows and field_index in family.exact_flows:
        flow = family.exact_flows[field_index]
        checkpoints = [(frac, flow(x, frac * t)) for frac in (0.25, 0.5, 0.75, 1.0)]
        _check_inside(family, checkpoints, t)
        end = checkpoints[-1][1]
        traj = Trajectory(endpoint=np.asarray(end, dtype=float), est_error=0.0)
        if keep_samples:
            traj.samples = [(frac * t, p) for frac, p in checkpoints]
        return traj

    def f(y):
        return family.field_value(field_index, y)

    if max_step is None:
        max_step = abs(t) / 16.0
    nsteps = max(4, int(np.ceil(abs(t) / max(max_step, 1e-300))))
    prev = None
    for _ in range(_MAX_DOUBLINGS):
        coarse = _rk4_fixed(f, x, t, nsteps)
        fine = _rk4_fixed(f, x, t, 2 * nsteps)
        est = float(np.max(np.abs(fine - coarse))) / 15.0
        if est <= tol:
            _check_inside(family, [(1.0, fine), (0.5, _rk4_fixed(f, x, 0.5 * t, nsteps))], t)
            traj = Trajectory(endpoint=fine, est_error=est)
            if keep_samples:
                traj.samples = [(t, fine)]
            return traj
        nsteps *= 2
        prev = est
    if prev is not None and prev > 1e3 * tol:
        raise StiffnessError(
            f"step-halving disagreement {prev:.3e} exceeds 1e3 * tol for field "
            f"{field_index}, t = {t}"
        )
    return Trajectory(endpoint=fine, est_error=est)


def run_plan(family, plan, x, method="auto"):
    """Execute the legs of a plan left to right (application order)."""
    y = np.asarray(x, dtype=float)
    err = 0.0
    for leg in plan.legs:
        traj = integrate_flow(
            family, leg.field, y, leg.duration,
            tol=plan.tol, method=method, max_step=plan.max_step,
        )
        y = traj.endpoint
        err += traj.est_error
    return Trajectory(endpoint=y, est_error=err)
