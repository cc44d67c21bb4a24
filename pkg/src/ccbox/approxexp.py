"""Approximate commutator maps, almost-exponential maps and their Jacobians.

The composition C_tau(X_{j1},..,X_{jl}) realizes the commutator X_w to leading
order tau^l; exp_*(t X_w) routes the sign of t through plan inversion (t < 0
runs the inverse plan with tau = |t|^{1/l}).  The almost-exponential map
E_{I,x}(h) chains exp_*(h_j Y_{ij}) with the last factor acting first, and the
scaling map S_{I,x,r} is E at the dilated argument.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateBasisError,
    IllConditionedJacobianError,
    NonConvergenceError,
    SingularScalingError,
)
from .flow import DEFAULT_TOL, FlowLeg, FlowPlan, run_plan
from .reports import VerificationReport


# ---------------------------------------------------------------------------
# selections and anisotropic boxes


@dataclass(frozen=True)
class TupleSelection:
    """An n-tuple of 1-based table indices with their bracket lengths d_j."""

    indices: tuple
    weights: tuple

    @classmethod
    def from_table(cls, table, indices):
        indices = tuple(int(i) for i in indices)
        if len(indices) != table.family.n:
            raise ValueError("selection needs exactly n indices")
        weights = tuple(table.entry(i).length for i in indices)
        return cls(indices=indices, weights=weights)

    @property
    def total_weight(self):
        return int(sum(self.weights))

    def norm(self, h):
        """Anisotropic norm ||h||_I = max_j |h_j|^{1/d_j}."""
        h = np.asarray(h, dtype=float)
        return float(max(abs(h[j]) ** (1.0 / d) for j, d in enumerate(self.weights)))

    def dilate(self, r, t):
        """delta_r^I t: component j scales by r^{d_j}."""
        t = np.asarray(t, dtype=float)
        return t * np.array([r**d for d in self.weights])

    def sample_box(self, radius, count, rng):
        """Uniform per-coordinate samples of Q_I(radius)."""
        scale = np.array([radius**d for d in self.weights])
        return (2.0 * rng.random((count, len(self.weights))) - 1.0) * scale


@dataclass(frozen=True)
class AnisotropicBox:
    selection: TupleSelection
    radius: float

    def contains(self, h):
        return self.selection.norm(h) < self.radius


# ---------------------------------------------------------------------------
# plans


def approx_commutator_plan(table, word, tau, tol=DEFAULT_TOL):
    """FlowPlan realizing C_tau(X_{j1},..,X_{jl}), legs in application order.

    Recursion: C(j1..jl) = C(j2..jl)^{-1} o exp(-tau X_{j1}) o C(j2..jl)
    o exp(tau X_{j1}), the rightmost factor acting first."""
    letters = tuple(getattr(word, "letters", word))
    if len(letters) < 1:
        raise ValueError("word must have at least one letter")
    tau = float(tau)
    if tau < 0.0:
        raise ValueError("tau must be nonnegative; negative times go through plan inversion")

    def legs_for(ls):
        if len(ls) == 1:
            return [FlowLeg(ls[0], tau)]
        inner = legs_for(ls[1:])
        inverse = [FlowLeg(l.field, -l.duration) for l in reversed(inner)]
        return [FlowLeg(ls[0], tau)] + inner + [FlowLeg(ls[0], -tau)] + inverse

    return FlowPlan(legs=legs_for(letters), tol=tol)


def approx_exp(table, word, t, x, method="auto", tol=DEFAULT_TOL):
    """exp_*(t X_w)(x): the C-plan at tau = |t|^{1/l}, inverted for t < 0."""
    letters = tuple(getattr(word, "letters", word))
    x = np.asarray(x, dtype=float)
    t = float(t)
    if t == 0.0:
        return x.copy()
    tau = abs(t) ** (1.0 / len(letters))
    plan = approx_commutator_plan(table, letters, tau, tol=tol)
    if t < 0.0:
        plan = plan.reversed()
    return run_plan(table.family, plan, x, method=method).endpoint


def almost_exponential(table, selection, x, h, method="auto", tol=DEFAULT_TOL):
    """E_{I,x}(h) = exp_*(h_1 Y_{i1}) ... exp_*(h_n Y_{in})(x)."""
    h = np.asarray(h, dtype=float)
    y = np.asarray(x, dtype=float)
    for j in range(len(selection.indices) - 1, -1, -1):
        word = table.entry(selection.indices[j]).word
        y = approx_exp(table, word, h[j], y, method=method, tol=tol)
    return y


def scaling_map(table, selection, x, r, t, method="auto", tol=DEFAULT_TOL):
    """S_{I,x,r}(t) = E_{I,x}(delta_r^I t); shares the E code path exactly."""
    return almost_exponential(
        table, selection, x, selection.dilate(r, t), method=method, tol=tol
    )


# ---------------------------------------------------------------------------
# Jacobians


def selection_columns(table, selection, y):
    """n x n matrix whose columns are U_j(y) = Y_{i_j}(y)."""
    return np.stack([table.eval(i, y) for i in selection.indices], axis=-1)


def jacobian_E(table, selection, x, h, fd_step=1e-7, method="auto", tol=DEFAULT_TOL):
    """Central finite-difference matrix dE/dh; columns tend to U_j(x) as h -> 0."""
    if fd_step <= 10.0 * tol:
        raise IllConditionedJacobianError(
            f"fd_step {fd_step:g} under 10x the integration tolerance {tol:g}"
        )
    h = np.asarray(h, dtype=float)
    n = h.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_step
        fp = almost_exponential(table, selection, x, h + e, method=method, tol=tol)
        fm = almost_exponential(table, selection, x, h - e, method=method, tol=tol)
        cols.append((fp - fm) / (2.0 * fd_step))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# derivative expansion check


@dataclass
class ExpansionReport:
    t_grid: np.ndarray
    residual: np.ndarray
    fitted_exponent: float
    fitted_constant: float
    exact_within_noise: bool = False
    rows: list = field(default_factory=list)


def derivative_expansion_check(table, word, x, t_grid, fd_fraction=1e-3,
                               method="auto", tol=DEFAULT_TOL):
    """Leading-order check of d/dt exp_*(t X_w) x against X_w at the endpoint.

    residual(t) is the norm of the finite-difference time derivative minus
    X_w(exp_*(t X_w) x); the log-log slope estimates the remainder exponent.
    For a step-2 family and |w| = 2 the expected slope is 1/2."""
    letters = tuple(getattr(word, "letters", word))
    x = np.asarray(x, dtype=float)
    t_grid = np.asarray(sorted(float(t) for t in t_grid))
    residuals = []
    noise_floors = []
    for t in t_grid:
        dt = fd_fraction * t
        ep = approx_exp(table, letters, t + dt, x, method=method, tol=tol)
        em = approx_exp(table, letters, t - dt, x, method=method, tol=tol)
        e0 = approx_exp(table, letters, t, x, method=method, tol=tol)
        deriv = (ep - em) / (2.0 * dt)
        xw = eval_word(table, letters, e0)
        residuals.append(float(np.linalg.norm(deriv - xw)))
        scale = max(1.0, float(np.max(np.abs(e0))))
        noise_floors.append((np.finfo(float).eps * scale + tol) / dt)
    residuals = np.array(residuals)
    noise = np.array(noise_floors)
    rows = [
        {"t": float(t), "residual": float(r), "noise_floor": float(nf)}
        for t, r, nf in zip(t_grid, residuals, noise)
    ]
    if np.all(residuals < 100.0 * noise):
        return ExpansionReport(
            t_grid=t_grid, residual=residuals,
            fitted_exponent=float("nan"), fitted_constant=0.0,
            exact_within_noise=True, rows=rows,
        )
    mask = residuals > 0
    slope, intercept = np.polyfit(np.log(t_grid[mask]), np.log(residuals[mask]), 1)
    return ExpansionReport(
        t_grid=t_grid, residual=residuals,
        fitted_exponent=float(slope), fitted_constant=float(np.exp(intercept)),
        rows=rows,
    )


def eval_word(table, letters, y):
    from .fields import eval_commutator  # local import to avoid cycle at module load

    return eval_commutator(table.family, letters, y)


# ---------------------------------------------------------------------------
# structure checks at maximal triples


def jacobian_structure_check(table, selection, x, r, eta, sample_count,
                             epsilon=0.5, c3=2.0, seed=0, fd_step=1e-7,
                             method="auto", tol=DEFAULT_TOL):
    """Samples Q_I(eps eta r), extracts B(h) = U(E(h))^{-1} dE(h) - I and the
    determinant ratio det dE / lambda_I(x); passes iff the ratio stays in
    [1/c3, c3] at every sample."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(np.random.Philox(key=seed))
    lam_x = float(np.linalg.det(selection_columns(table, selection, x)))
    if abs(lam_x) < 1e-12:
        raise DegenerateBasisError(f"lambda_I(x) = {lam_x:.3e} at x = {x}")
    samples = selection.sample_box(epsilon * eta * r, sample_count, rng)
    weights = selection.weights
    rows = []
    max_norm_b = 0.0
    ratios = []
    for h in samples:
        y = almost_exponential(table, selection, x, h, method=method, tol=tol)
        U = selection_columns(table, selection, y)
        lam_y = float(np.linalg.det(U))
        if abs(lam_y) < 1e-12:
            raise DegenerateBasisError(f"lambda_I(E(h)) = {lam_y:.3e} at h = {h}")
        dE = jacobian_E(table, selection, x, h, fd_step=fd_step, method=method, tol=tol)
        B = np.linalg.solve(U, dE) - np.eye(len(h))
        hnorm = selection.norm(h)
        ratio = float(np.linalg.det(dE)) / lam_x
        ratios.append(ratio)
        norm_b = 0.0
        if hnorm > 0:
            for j, dj in enumerate(weights):
                for k, dk in enumerate(weights):
                    denom = hnorm * r ** (dk - dj - 1)
                    norm_b = max(norm_b, abs(B[k, j]) / denom)
        max_norm_b = max(max_norm_b, norm_b)
        rows.append(
            {"h_norm": hnorm, "det_ratio": ratio, "normalized_b": norm_b}
        )
    ratios = np.array(ratios)
    passed = bool(np.all((np.abs(ratios) >= 1.0 / c3) & (np.abs(ratios) <= c3)))
    return VerificationReport(
        name="jacobian_structure",
        passed=passed,
        fitted={
            "fitted_c_over_eta": max_norm_b,
            "det_ratio_min": float(np.min(np.abs(ratios))),
            "det_ratio_max": float(np.max(np.abs(ratios))),
            "c3": c3,
        },
        rows=rows,
    )


def pullback_coefficients(table, selection, x, r, t, weight=None, word_index=None,
                          fd_step=1e-7, method="auto", tol=DEFAULT_TOL):
    """Coefficients c of a pulled-back field: dS(t) c = r^l Y(S(t)).

    With word_index j (1-based table index) the field is Y_j with l = len(Y_j);
    by default each selected U_j is pulled back in turn, returning an n x n
    matrix whose row j holds the coefficients of hat-Y_{i_j}."""
    t = np.asarray(t, dtype=float)

    def S(tt):
        return scaling_map(table, selection, x, r, tt, method=method, tol=tol)

    n = t.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_step
        cols.append((S(t + e) - S(t - e)) / (2.0 * fd_step))
    dS = np.stack(cols, axis=-1)
    if abs(np.linalg.det(dS)) < 1e-14:
        raise SingularScalingError("scaling map differential is singular", t=t)
    y = S(t)
    if word_index is not None:
        ell = table.entry(word_index).length if weight is None else weight
        rhs = (r**ell) * table.eval(word_index, y)
        return np.linalg.solve(dS, rhs)
    out = []
    for j, i in enumerate(selection.indices):
        rhs = (r ** selection.weights[j]) * table.eval(i, y)
        out.append(np.linalg.solve(dS, rhs))
    return np.stack(out, axis=0)


def pullback_check(table, selection, x, r, t_samples, eta=0.5, epsilon=0.5,
                   seed=0, fd_step=1e-7, method="auto", tol=DEFAULT_TOL):
    """Verifies the pulled-back frame hat-Y_{i_j} = d_{t_j} + O(||t||_I):
    reports the largest |a_j^k(t)| / ||t||_I over the samples."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(np.random.Philox(key=seed))
    count = t_samples if isinstance(t_samples, int) else len(t_samples)
    if isinstance(t_samples, int):
        t_samples = selection.sample_box(epsilon * eta, count, rng)
    best = 0.0
    rows = []
    for t in t_samples:
        coeffs = pullback_coefficients(
            table, selection, x, r, t, fd_step=fd_step, method=method, tol=tol
        )
        A = coeffs - np.eye(len(t))
        tnorm = selection.norm(t)
        normalized = float(np.max(np.abs(A))) / tnorm if tnorm > 0 else 0.0
        best = max(best, normalized)
        rows.append({"t_norm": tnorm, "max_a": float(np.max(np.abs(A))),
                     "normalized_a": normalized})
    return VerificationReport(
        name="pullback",
        passed=True,
        fitted={"fitted_c_over_eta": best},
        rows=rows,
    )


# ---------------------------------------------------------------------------
# inversion


def invert_E(table, selection, x, target, guess=None, tol=1e-9, max_iter=50,
             fd_step=1e-7, method="auto", flow_tol=DEFAULT_TOL):
    """Newton inversion of E_{I,x} with finite-difference Jacobians.

    Plain damped Newton (step halving on residual increase): the Jacobian is
    uniformly nondegenerate inside maximal boxes, so no trust region."""
    target = np.asarray(target, dtype=float)
    h = np.zeros(len(selection.indices)) if guess is None else np.array(guess, dtype=float)

    def residual(hh):
        return almost_exponential(table, selection, x, hh, method=method, tol=flow_tol) - target

    res = residual(h)
    for _ in range(max_iter):
        norm = float(np.linalg.norm(res))
        if norm <= tol:
            return h
        J = jacobian_E(table, selection, x, h, fd_step=fd_step, method=method, tol=flow_tol)
        try:
            step = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(
                "singular Jacobian during Newton inversion",
                last_iterate=h, residual=norm,
            ) from exc
        damping = 1.0
        for _ in range(20):
            trial = h + damping * step
            trial_res = residual(trial)
            if float(np.linalg.norm(trial_res)) < norm:
                h, res = trial, trial_res
                break
            damping *= 0.5
        else:
            break
    norm = float(np.linalg.norm(res))
    if norm <= tol:
        return h
    raise NonConvergenceError(
        f"Newton inversion stalled at residual {norm:.3e}",
        last_iterate=h, residual=norm,
    )
