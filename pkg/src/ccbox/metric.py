"""Control-distance estimation, ball measures and ball-box verification.

The control distance d(x,y) is the infimal r such that a unit-time path with
velocity sum_j b_j X_j, |b_j| <= r, joins x to y.  Upper bounds come from an
optimizer over piecewise-constant controls; lower bounds from the speed limit
or a grid-reachability oracle.  The weighted distance rho additionally allows
legs along every commutator Y_i with budget r^{l_i}.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .approxexp import almost_exponential, invert_E
from .errors import NonConvergenceError, UnreachableWithinBudgetError
from .flow import _rk4_fixed
from .reports import VerificationReport

import heapq


# ---------------------------------------------------------------------------
# piecewise-constant control paths


def _endpoints_batch(family, x, controls, nsteps=6):
    """Endpoints of unit-time paths gamma' = sum_j b_j X_j(gamma) for a batch
    of piecewise-constant controls with shape (batch, pieces, m)."""
    controls = np.asarray(controls, dtype=float)
    batch, pieces, m = controls.shape
    y = np.broadcast_to(np.asarray(x, dtype=float), (batch, family.n)).copy()
    h = (1.0 / pieces) / nsteps

    def f(states, b):
        out = np.zeros_like(states)
        for j in range(m):
            out += b[:, j, None] * family.coeffs[j](states)
        return out

    for p in range(pieces):
        b = controls[:, p, :]
        for _ in range(nsteps):
            k1 = f(y, b)
            k2 = f(y + 0.5 * h * k1, b)
            k3 = f(y + 0.5 * h * k2, b)
            k4 = f(y + h * k3, b)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def path_endpoint(family, x, controls, nsteps=6):
    """Endpoint of a single piecewise-constant control path (pieces, m)."""
    return _endpoints_batch(family, x, np.asarray(controls)[None], nsteps)[0]


@dataclass
class DistanceEstimate:
    upper: float
    lower: float
    witness: np.ndarray  # (pieces, m) control matrix achieving `upper`
    residual: float = 0.0  # endpoint mismatch of the witness

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError("lower bound exceeds upper bound")


def cc_lower(family, x, y):
    """Speed-limit bound: |x - y| <= d(x,y) * m * sup|f_j|."""
    gap = float(np.linalg.norm(np.asarray(y, dtype=float) - np.asarray(x, dtype=float)))
    sup = family.sup_coeff_norm()
    if sup == 0.0:
        return 0.0
    return gap / (family.m * sup)


def cc_upper(family, x, y, budget_iterations=20, pieces=8, max_pieces=64,
             match_tol=1e-6, seeds=None, nsteps=4, restarts=3, seed=0):
    """Upper bound on d(x,y) by optimizing piecewise-constant controls.

    First solves the endpoint-matching problem with unconstrained least
    squares (doubling the piece count on stagnation), then bisects on the
    sup-norm control bound to tighten the achieved width.  Raises
    UnreachableWithinBudgetError when no admissible path is found — a budget
    statement, not a claim of unreachability."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lower = cc_lower(family, x, y)
    if np.allclose(x, y, atol=1e-14):
        return DistanceEstimate(upper=0.0, lower=0.0,
                                witness=np.zeros((pieces, family.m)))

    m = family.m
    solves = 0

    def resid_fn(P):
        def fun(b):
            return _endpoints_batch(family, x, b.reshape(1, P, m), nsteps)[0] - y
        return fun

    def jac_fn(P):
        def jac(b):
            eps = 1e-7
            base = b.reshape(P, m)
            batch = [base]
            for k in range(P * m):
                pert = base.copy().reshape(-1)
                pert[k] += eps
                batch.append(pert.reshape(P, m))
            ends = _endpoints_batch(family, x, np.stack(batch), nsteps)
            return (ends[1:] - ends[0]).T / eps
        return jac

    best = None  # (width, controls, residual)
    P = pieces
    rng = np.random.default_rng(np.random.Philox(key=seed))
    gap = float(np.max(np.abs(y - x)))
    # restart scale covers commutator-generated directions (width ~ gap^{1/s})
    start_scale = max(gap, gap ** (1.0 / family.s))
    while P <= max_pieces and solves < budget_iterations:
        starts = [np.zeros((P, m))]
        if seeds is not None:
            for s in seeds:
                s = np.asarray(s, dtype=float)
                reps = int(np.ceil(P / len(s)))
                starts.append(np.repeat(s, reps, axis=0)[:P] * len(s) / P)
        for _ in range(restarts):
            starts.append((2.0 * rng.random((P, m)) - 1.0) * start_scale)
        for b0 in starts:
            sol = least_squares(resid_fn(P), b0.ravel(), jac=jac_fn(P),
                                xtol=1e-10, ftol=1e-10, gtol=1e-12, max_nfev=60)
            solves += 1
            res = float(np.linalg.norm(sol.fun))
            if res <= match_tol:
                width = float(np.max(np.abs(sol.x)))
                if best is None or width < best[0]:
                    best = (width, sol.x.reshape(P, m), res)
                break
            if solves >= budget_iterations:
                break
        if best is not None:
            break
        P *= 2
    if best is None:
        raise UnreachableWithinBudgetError(
            f"no control path from {x} to {y} matched within {match_tol:g} "
            f"after {solves} solves (up to {min(P, max_pieces)} pieces)"
        )

    # tighten: bisect on the control bound
    width, controls, res = best
    P = controls.shape[0]
    lo, hi = max(lower, 0.0), width
    while solves < budget_iterations and hi - lo > 0.1 * hi:
        mid = 0.5 * (lo + hi)
        b0 = np.clip(controls, -mid, mid)
        sol = least_squares(resid_fn(P), b0.ravel(), jac=jac_fn(P),
                            bounds=(-mid, mid), xtol=1e-10, ftol=1e-10,
                            gtol=1e-12, max_nfev=60)
        solves += 1
        if float(np.linalg.norm(sol.fun)) <= match_tol:
            controls = sol.x.reshape(P, m)
            hi = float(np.max(np.abs(sol.x)))
            res = float(np.linalg.norm(sol.fun))
        else:
            lo = mid
    return DistanceEstimate(upper=hi, lower=min(lower, hi), witness=controls,
                            residual=res)


# ---------------------------------------------------------------------------
# weighted-distance sampling


def rho_sample(table, x, r, count, pieces=None, seed=0, nsteps=8,
               return_witness=False):
    """Endpoints of random piecewise paths admissible for the weighted
    distance: each piece flows along a single commutator Y_i with constant
    coefficient |c| <= r^{l_i}, so every endpoint lies in B_rho(x, r).
    Escaping samples are discarded."""
    family = table.family
    x = np.asarray(x, dtype=float)
    if r == 0.0:
        pts = [x.copy() for _ in range(count)]
        return (pts, []) if return_witness else pts
    if pieces is None:
        pieces = max(4, table.q)
    rng = np.random.default_rng(np.random.Philox(key=seed))
    out, witnesses = [], []
    lengths = [table.entry(i).length for i in range(1, table.q + 1)]
    while len(out) < count:
        legs = []
        y = x.copy()
        ok = True
        for _ in range(pieces):
            i = int(rng.integers(1, table.q + 1))
            c = float((2.0 * rng.random() - 1.0) * r ** lengths[i - 1])
            legs.append((i, c))

            def f(z, i=i, c=c):
                return c * table.eval(i, z)

            y = _rk4_fixed(f, y, 1.0 / pieces, nsteps)
            if not family.contains(y):
                ok = False
                break
        if ok:
            out.append(y)
            witnesses.append(legs)
    return (out, witnesses) if return_witness else out


# ---------------------------------------------------------------------------
# grid-reachability ball oracle


@dataclass
class BallEstimate:
    center: np.ndarray
    radius: float
    cell_size: np.ndarray  # per-axis lattice spacing
    reached_cells: int
    measure: float  # reached_cells * prod(cell_size)
    frontier: bool  # trajectory clipped by omega_outer: measure unreliable
    cells: set = field(default_factory=set, repr=False)


def reachable_grid(family, x, r, cell_size, dt=None, method="auto", subdiv=2):
    """Dijkstra estimate of the control ball B(x, r) and its measure.

    Unit-speed legs along +-X_j with additive time cost (equivalent to
    unit-time paths with |b_j| <= r, by reparametrization); lattice cells
    whose representative is settled at cost <= r are counted.  States live on
    a `subdiv`-times-finer sub-lattice and each edge flows until the state
    changes, so slow directions cannot stall inside a settled cell."""
    x = np.asarray(x, dtype=float)
    cell = np.broadcast_to(np.asarray(cell_size, dtype=float), (family.n,)).copy()
    if np.max(cell) > r / 8.0 * (1 + 1e-9):
        raise ValueError("cell_size must be at most r/8 along every axis")
    if dt is None:
        dt = r / 32.0
    sub = cell / subdiv

    def cell_of(p):
        return tuple(int(round(v)) for v in (p - x) / cell)

    def state_of(p):
        return tuple(int(round(v)) for v in (p - x) / sub)

    def step(p, j, sign):
        if method == "auto" and family.exact_flows and j in family.exact_flows:
            return np.asarray(family.exact_flows[j](p, sign * dt), dtype=float)
        v = family.field_value(j, p)
        mid = p + sign * dt * v
        return p + sign * dt * 0.5 * (v + family.field_value(j, mid))

    start = state_of(x)
    best = {start: (0.0, x)}
    heap = [(0.0, 0, start)]
    counter = 1
    settled = set()
    reached = {}
    frontier = False
    while heap:
        cost, _, s = heapq.heappop(heap)
        if s in settled:
            continue
        settled.add(s)
        p = best[s][1]
        c = cell_of(p)
        if c not in reached or cost < reached[c]:
            reached[c] = cost
        for j in range(1, family.m + 1):
            for sign in (1.0, -1.0):
                pp, extra = p, 0.0
                while cost + extra < r:
                    pp = step(pp, j, sign)
                    extra += dt
                    if state_of(pp) != s:
                        break
                else:
                    continue
                if not family.contains(pp):
                    frontier = True
                    continue
                s2 = state_of(pp)
                prev = best.get(s2)
                if s2 not in settled and (prev is None or cost + extra < prev[0]):
                    best[s2] = (cost + extra, pp)
                    heapq.heappush(heap, (cost + extra, counter, s2))
                    counter += 1
    cells = set(reached)
    return BallEstimate(
        center=x, radius=float(r), cell_size=cell,
        reached_cells=len(cells),
        measure=float(len(cells) * np.prod(cell)),
        frontier=frontier, cells=cells,
    )


# ---------------------------------------------------------------------------
# ball-box verification


def _box_norm(selection, h):
    return max(abs(h[j]) ** (1.0 / selection.weights[j]) for j in range(len(h)))


def injectivity_fit(table, selection, x, r, epsilon, pair_budget, seed=0):
    """Fitted separation constant c_inj with |E(h) - E(h')| >= c_inj |h - h'|
    over sampled pairs in Q_I(epsilon * r); returns (c_inj, pairs used)."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(np.random.Philox(key=seed))
    n_distinct = max(8, int(np.ceil(np.sqrt(2.0 * pair_budget))) + 1)
    hs = selection.sample_box(epsilon * r, n_distinct, rng)
    ys = [almost_exponential(table, selection, x, h) for h in hs]
    c_inj = np.inf
    pairs = 0
    for a in range(n_distinct):
        for b in range(a + 1, n_distinct):
            dh = float(np.linalg.norm(hs[a] - hs[b]))
            if dh == 0.0:
                continue
            c_inj = min(c_inj, float(np.linalg.norm(ys[a] - ys[b])) / dh)
            pairs += 1
            if pairs >= pair_budget:
                break
        if pairs >= pair_budget:
            break
    return (0.0 if not np.isfinite(c_inj) else c_inj), pairs


def ballbox_verify(table, selection, x, r, epsilon, sample_count=200, seed=0,
                   c_fit_grid=None, forward_samples=8, pair_budget=None):
    """Sampled check of the anisotropic ball-box correspondence for E_{I,x}.

    (a) surjectivity: rho-samples at budget c_fit * eps^s * r must invert
        under E with box norm <= eps * r for >= 99% of targets; the largest
        passing c_fit <= 1 is reported.
    (b) forward: |E(h)| stays within control distance C_fwd * |h|_I of x,
        C_fwd fitted over samples of Q_I(eps * r).
    (c) injectivity: fitted c_inj with |E(h) - E(h')| >= c_inj |h - h'|
        over sampled pairs in Q_I(eps * r)."""
    family = table.family
    x = np.asarray(x, dtype=float)
    s = family.s
    if c_fit_grid is None:
        c_fit_grid = [round(0.1 * k, 10) for k in range(10, 0, -1)]
    rng = np.random.default_rng(np.random.Philox(key=seed))
    rows = []

    # (a) surjectivity
    c_fit = 0.0
    failures_at_fit = 0
    for level, c in enumerate(c_fit_grid):
        delta = c * epsilon**s * r
        targets = rho_sample(table, x, delta, sample_count, seed=seed + level)
        bad = 0
        for y in targets:
            try:
                h = invert_E(table, selection, x, np.asarray(y))
            except NonConvergenceError:
                bad += 1
                continue
            if _box_norm(selection, h) > epsilon * r * (1 + 1e-9):
                bad += 1
        rows.append({"check": "surjectivity", "c_fit": c, "delta": delta,
                     "failures": bad, "samples": sample_count})
        if bad <= 0.01 * sample_count:
            c_fit = c
            failures_at_fit = bad
            break

    # (b) forward inclusion
    C_fwd = 0.0
    fwd_fail = 0
    for _ in range(forward_samples):
        h = selection.sample_box(epsilon * r, 1, rng)[0]
        hn = _box_norm(selection, h)
        if hn == 0.0:
            continue
        y = almost_exponential(table, selection, x, h)
        try:
            est = cc_upper(family, x, y)
            C_fwd = max(C_fwd, est.upper / hn)
            rows.append({"check": "forward", "h_norm": hn, "d_upper": est.upper,
                         "ratio": est.upper / hn})
        except UnreachableWithinBudgetError:
            fwd_fail += 1

    # (c) injectivity
    if pair_budget is None:
        pair_budget = sample_count
    c_inj, pairs = injectivity_fit(table, selection, x, r, epsilon,
                                   pair_budget, seed=seed + 1000)
    rows.append({"check": "injectivity", "c_inj": c_inj, "pairs": pairs})

    passed = (c_fit > 0.0) and (fwd_fail == 0) and (c_inj > 0.0)
    return VerificationReport(
        name=f"ballbox[{family.name}]",
        passed=passed,
        fitted={
            "c_fit": c_fit, "C_fwd": C_fwd, "c_inj": c_inj,
            "inversion_failures": failures_at_fit, "pairs": pairs,
        },
        rows=rows,
    )


# ---------------------------------------------------------------------------
# doubling


def doubling_estimate(family, table, x, r_list, cells_per_axis=20, seed=0,
                      method="auto"):
    """Doubling ratios |B(x,2r)|/|B(x,r)| and the flatness of |B(x,r)| against
    the determinant scale Lambda(x,r), via the grid oracle.

    Each ball gets its own anisotropic lattice, probed from weighted-path
    samples at its own radius with a fixed cell count per axis: both balls
    then carry the same relative one-cell boundary inflation, which cancels
    in the doubling ratio."""
    from .maximality import big_lambda

    def ball(r):
        probe = np.asarray(rho_sample(table, x, r, 100, seed=seed))
        extent = np.maximum(np.max(np.abs(probe - x), axis=0), 1e-6)
        cell = np.minimum(extent / cells_per_axis, r / 8.0)
        return reachable_grid(family, x, r, cell, method=method)

    x = np.asarray(x, dtype=float)
    rows = []
    ratios = []
    lam_ratios = []
    for r in r_list:
        ball_r = ball(r)
        ball_2r = ball(2.0 * r)
        lam, _ = big_lambda(table, x, r)
        row = {
            "r": r,
            "measure_r": ball_r.measure,
            "measure_2r": ball_2r.measure,
            "frontier": ball_r.frontier or ball_2r.frontier,
            "Lambda": lam,
        }
        if not row["frontier"] and ball_r.measure > 0:
            row["doubling_ratio"] = ball_2r.measure / ball_r.measure
            row["ball_over_Lambda"] = ball_r.measure / lam
            ratios.append(row["doubling_ratio"])
            lam_ratios.append(row["ball_over_Lambda"])
        rows.append(row)
    passed = len(ratios) >= 2
    if passed:
        spread = max(ratios) / min(ratios)
        lam_spread = max(lam_ratios) / min(lam_ratios)
        passed = spread < 1.25 and lam_spread < 1.3
    else:
        spread = lam_spread = float("nan")
    return VerificationReport(
        name=f"doubling[{family.name}]",
        passed=passed,
        fitted={
            "mean_ratio": float(np.mean(ratios)) if ratios else float("nan"),
            "ratio_spread": spread,
            "lambda_spread": lam_spread,
        },
        rows=rows,
    )
