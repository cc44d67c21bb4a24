"""Determinant scales, eta-maximal tuple selection and stratification.

lambda_I(x) is the determinant of a selected commutator n-tuple and
Lambda(x, r) the maximum of |lambda_K(x)| r^{l(K)}; the argmax tuple is
eta-maximal for every eta < 1.  The injectivity-radius stratification peels
the grid by the first nonvanishing determinant layer.
"""

from dataclasses import dataclass, field
import heapq
import itertools

import numpy as np

from .approxexp import TupleSelection
from .errors import DegenerateBasisError, HormanderViolationError
from .reports import VerificationReport


# ---------------------------------------------------------------------------
# determinants


def lambda_det(table, indices, x):
    """det(Y_{i_1}, .., Y_{i_n})(x) for 1-based table indices."""
    x = np.asarray(x, dtype=float)
    ys = table.eval_all(x)
    mat = np.stack([ys[i - 1] for i in indices], axis=-1)
    return float(np.linalg.det(mat))


def increasing_tuples(table):
    """Strictly increasing index tuples: repeats give lambda = 0 and
    permutations only flip the sign, so the scan of {1..q}^n reduces to
    combinations without changing any maximum of |lambda_K| r^{l(K)}."""
    return list(itertools.combinations(range(1, table.q + 1), table.family.n))


def _tuple_weight(table, indices):
    return sum(table.entry(i).length for i in indices)


def _all_lambdas(table, x):
    ys = table.eval_all(np.asarray(x, dtype=float))
    out = {}
    for combo in increasing_tuples(table):
        mat = np.stack([ys[i - 1] for i in combo], axis=-1)
        out[combo] = float(np.linalg.det(mat))
    return out


def big_lambda(table, x, r):
    """Lambda(x, r) = max over tuples of |lambda_K(x)| r^{l(K)}, with the
    argmax; ties break toward smaller weight, then lexicographic indices."""
    if r <= 0:
        raise ValueError("radius must be positive")
    lams = _all_lambdas(table, x)
    best_val, best_key = -1.0, None
    for combo in sorted(lams, key=lambda c: (_tuple_weight(table, c), c)):
        val = abs(lams[combo]) * r ** _tuple_weight(table, combo)
        if val > best_val + 0.0:
            best_val, best_key = val, combo
    if best_val <= 0.0:
        raise HormanderViolationError(
            f"Lambda({np.asarray(x)}, {r}) = 0: no commutator tuple spans R^n here"
        )
    return best_val, best_key


@dataclass
class MaximalityReport:
    selection: TupleSelection
    lambda_I: float
    Lambda: float
    eta_achieved: float
    runner_up: tuple  # (indices, value) of the next-best tuple
    radius: float


def select_maximal(table, x, r, eta=0.5):
    """Argmax tuple of |lambda_K(x)| r^{l(K)} (eta-maximal for every eta < 1),
    plus the runner-up ratio."""
    lams = _all_lambdas(table, x)
    scored = []
    for combo in sorted(lams, key=lambda c: (_tuple_weight(table, c), c)):
        scored.append((abs(lams[combo]) * r ** _tuple_weight(table, combo), combo))
    scored.sort(key=lambda p: -p[0])
    best_val, best = scored[0]
    if best_val <= 0.0:
        raise HormanderViolationError(f"Lambda({np.asarray(x)}, {r}) = 0")
    runner = scored[1] if len(scored) > 1 else (0.0, None)
    sel = TupleSelection.from_table(table, best)
    return MaximalityReport(
        selection=sel,
        lambda_I=lams[best],
        Lambda=best_val,
        eta_achieved=1.0,
        runner_up=(runner[1], runner[0]),
        radius=float(r),
    )


# ---------------------------------------------------------------------------
# subunit paths and stability


def integrate_subunit(family, x, controls, nsteps_per_piece=8):
    """Unit-time path with piecewise-constant controls (P, m): returns the
    endpoint of gamma' = sum_j b_j X_j(gamma), or None if it leaves Omega."""
    y = np.array(x, dtype=float)
    P = len(controls)
    for b in controls:
        def f(z):
            return sum(b[j] * family.field_value(j + 1, z) for j in range(family.m))

        h = (1.0 / P) / nsteps_per_piece
        for _ in range(nsteps_per_piece):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not family.contains(y):
            return None
    return y


def stability_check(table, indices, x, r, eta, path_samples, budget=None,
                    epsilon_grid=None, pieces=8, seed=0):
    """Empirical stability of eta-maximality along subunit paths.

    Draws random piecewise-constant subunit paths (|b_j| <= eps*eta*r, unit
    time) from x and reports the largest eps <= 1 such that all endpoints y
    satisfy |lambda_I(y) - lambda_I(x)| <= |lambda_I(x)|/2, together with the
    fitted constant for |lambda_I(y)| r^{l(I)} > C^{-1} eta Lambda(y, r).
    With an explicit `budget` only that single control bound is tested."""
    family = table.family
    x = np.asarray(x, dtype=float)
    lam_x = lambda_det(table, indices, x)
    if lam_x == 0.0:
        raise DegenerateBasisError("lambda_I(x) = 0: triple cannot be eta-maximal")
    ell = _tuple_weight(table, indices)
    if epsilon_grid is None:
        epsilon_grid = [round(0.1 * k, 10) for k in range(10, 0, -1)]
    if budget is not None:
        epsilon_grid = [budget / (eta * r)]
    rng = np.random.default_rng(np.random.Philox(key=seed))

    eps_star = 0.0
    fitted_c = 0.0
    escaped_total = 0
    rows = []
    for eps in epsilon_grid:
        bound = eps * eta * r
        worst_dev = 0.0
        needed_c = 0.0
        escaped = 0
        ok = True
        for _ in range(path_samples):
            controls = (2.0 * rng.random((pieces, family.m)) - 1.0) * bound
            y = integrate_subunit(family, x, controls)
            if y is None:
                escaped += 1
                continue
            lam_y = lambda_det(table, indices, y)
            dev = abs(lam_y - lam_x)
            worst_dev = max(worst_dev, dev)
            if dev > 0.5 * abs(lam_x):
                ok = False
            lam_term = abs(lam_y) * r**ell
            if lam_term > 0:
                val, _ = big_lambda(table, y, r)
                needed_c = max(needed_c, eta * val / lam_term)
            else:
                ok = False
        escaped_total += escaped
        rows.append({
            "epsilon": eps, "budget": bound, "worst_dev": worst_dev,
            "dev_allowed": 0.5 * abs(lam_x), "aceto_ok": ok, "escaped": escaped,
        })
        if ok:
            eps_star = eps
            fitted_c = needed_c
            break
    return VerificationReport(
        name="maximality_stability",
        passed=eps_star > 0.0,
        fitted={
            "epsilon_star": eps_star,
            "fitted_c": fitted_c,
            "lambda_x": lam_x,
            "escaped": escaped_total,
        },
        rows=rows,
    )


# ---------------------------------------------------------------------------
# basis resolution


def resolve_in_basis(table, indices, y, j, r=None, eta=None):
    """Coefficients a with Y_j(y) = sum_k a_k Y_{i_k}(y), by Cramer's rule.

    When r is given, the report row carries the magnitudes normalized by
    r^{l_{i_k} - l_j} (the corollary's bound is C/eta in that scale)."""
    y = np.asarray(y, dtype=float)
    ys = table.eval_all(y)
    U = np.stack([ys[i - 1] for i in indices], axis=-1)
    det_U = float(np.linalg.det(U))
    if abs(det_U) < 1e-12:
        raise DegenerateBasisError(f"|lambda_I(y)| = {abs(det_U):.3e} below 1e-12")
    target = ys[j - 1]
    coeffs = np.empty(len(indices))
    for k in range(len(indices)):
        M = U.copy()
        M[:, k] = target
        coeffs[k] = np.linalg.det(M) / det_U
    if r is None:
        return coeffs
    ell_j = table.entry(j).length
    normalized = np.array([
        abs(coeffs[k]) / r ** (table.entry(indices[k]).length - ell_j)
        for k in range(len(indices))
    ])
    return coeffs, normalized


# ---------------------------------------------------------------------------
# stratification


@dataclass
class Stratification:
    points: np.ndarray          # grid points covering K
    layer_weights: list         # attained tuple weights D_1 < .. < D_p
    mu: np.ndarray              # (N, p) layer values
    j_index: np.ndarray         # first nonvanishing layer per point (1-based)
    chosen: list                # argmax tuple per point
    r_x: np.ndarray             # c^{-1} |lambda_{I_x}(x)|
    strata: list = field(default_factory=list)  # peeling records
    r_tilde0: float = 0.0
    stratify_c: float = 10.0
    mu_tol: float = 0.0

    def rows(self):
        out = []
        for i, p in enumerate(self.points):
            out.append({
                "point": " ".join(format(v, ".10g") for v in p),
                "j": int(self.j_index[i]),
                "I": "-".join(str(k) for k in self.chosen[i]),
                "r_x": float(self.r_x[i]),
            })
        return out


def _grid_points(box, resolution):
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), [a[1] - a[0] for a in axes]


def _metric_neighborhood(family, points, spacing, sources_idx, budget, dt=None,
                         method="auto", subdiv=2):
    """Grid-point mask reachable from the source points within control cost
    `budget`, by multi-source Dijkstra along +-X_j flow legs.

    States live on a sub-lattice (`subdiv` cuts per grid cell) and each edge
    flows along one field until the state crosses into a new sub-cell, so
    slow directions (coefficients vanishing at the point) cannot stall the
    walk inside an already-settled cell."""
    if budget <= 0 or len(sources_idx) == 0:
        return np.zeros(len(points), dtype=bool)
    if dt is None:
        dt = budget / 32.0
    lo = points.min(axis=0)
    cell = np.asarray(spacing, dtype=float)
    sub = cell / subdiv

    def cell_of(p):
        return tuple(int(round(v)) for v in (p - lo) / cell)

    def state_of(p):
        return tuple(int(round(v)) for v in (p - lo) / sub)

    cell_index = {}
    for i, p in enumerate(points):
        cell_index[cell_of(p)] = i

    def step(p, j, sign):
        if method == "auto" and family.exact_flows and j in family.exact_flows:
            return np.asarray(family.exact_flows[j](p, sign * dt), dtype=float)
        v = family.field_value(j, p)
        mid = p + sign * dt * v
        return p + sign * dt * 0.5 * (v + family.field_value(j, mid))

    best = {}
    heap = []
    counter = 0
    for i in sources_idx:
        s = state_of(points[i])
        best[s] = (0.0, points[i])
        heapq.heappush(heap, (0.0, counter, s))
        counter += 1
    reached = np.zeros(len(points), dtype=bool)
    settled = set()
    while heap:
        cost, _, s = heapq.heappop(heap)
        if s in settled:
            continue
        settled.add(s)
        ci = cell_index.get(cell_of(best[s][1]))
        if ci is not None:
            reached[ci] = True
        p = best[s][1]
        for j in range(1, family.m + 1):
            for sign in (1.0, -1.0):
                # flow until the sub-cell changes or the budget runs out
                pp, extra = np.array(p), 0.0
                while cost + extra < budget:
                    pp = step(pp, j, sign)
                    extra += dt
                    if state_of(pp) != s:
                        break
                else:
                    continue
                if not family.contains(pp):
                    continue
                s2 = state_of(pp)
                prev = best.get(s2)
                if s2 not in settled and (prev is None or cost + extra < prev[0]):
                    best[s2] = (cost + extra, pp)
                    heapq.heappush(heap, (cost + extra, counter, s2))
                    counter += 1
    return reached


def stratify(family, table, grid, stratify_c=10.0, mu_tol_factor=1e-9,
             method="auto"):
    """Injectivity-radius stratification over a grid covering K.

    Per point: the first layer j with mu_j above tolerance, the argmax tuple
    of that weight, and r_x = c^{-1} |lambda_{I_x}(x)|.  The peeling loop
    takes the deepest nonempty stratum, removes its metric neighborhoods of
    radius r_(k), and recurses; r~0 is the minimum of the per-stratum radii."""
    points, spacing = _grid_points(family.omega_inner, grid)
    combos = increasing_tuples(table)
    weights = sorted({_tuple_weight(table, c) for c in combos})
    by_weight = {D: [c for c in combos if _tuple_weight(table, c) == D] for D in weights}
    N = len(points)
    p = len(weights)
    mu = np.zeros((N, p))
    lam_by_combo = {c: np.zeros(N) for c in combos}
    for i, x in enumerate(points):
        ys = table.eval_all(x)
        for c in combos:
            mat = np.stack([ys[k - 1] for k in c], axis=-1)
            lam_by_combo[c][i] = np.linalg.det(mat)
    for jw, D in enumerate(weights):
        mu[:, jw] = sum(np.abs(lam_by_combo[c]) for c in by_weight[D])
    scale = float(np.max(mu)) if np.max(mu) > 0 else 1.0
    mu_tol = mu_tol_factor * scale

    j_index = np.zeros(N, dtype=int)
    chosen = [None] * N
    r_x = np.zeros(N)
    for i in range(N):
        nz = np.nonzero(mu[i] > mu_tol)[0]
        if len(nz) == 0:
            raise HormanderViolationError(
                f"all layer values vanish at grid point {points[i]}"
            )
        jw = int(nz[0])
        j_index[i] = jw + 1
        D = weights[jw]
        best = max(by_weight[D], key=lambda c: abs(lam_by_combo[c][i]))
        chosen[i] = best
        r_x[i] = abs(lam_by_combo[best][i]) / stratify_c

    # peeling loop: deepest nonempty stratum first
    sigma_rank = j_index  # point belongs to Sigma_k for every k <= j_index
    removed = np.zeros(N, dtype=bool)
    strata = []
    k = int(np.max(sigma_rank))
    while k >= 1:
        mask = (sigma_rank >= k) & ~removed
        if not np.any(mask):
            k -= 1
            continue
        idx = np.nonzero(mask)[0]
        r_k = float(np.min(r_x[idx]))
        neigh = _metric_neighborhood(
            family, points, spacing, idx, r_k, method=method
        )
        strata.append({
            "k": k,
            "r_k": r_k,
            "stratum_indices": idx,
            "neighborhood": neigh,
        })
        removed |= neigh
        removed[idx] = True
        k -= 1
    if not strata:
        raise HormanderViolationError("no stratum found")
    r_tilde0 = float(min(s["r_k"] for s in strata))
    return Stratification(
        points=points, layer_weights=weights, mu=mu, j_index=j_index,
        chosen=chosen, r_x=r_x, strata=strata, r_tilde0=r_tilde0,
        stratify_c=stratify_c, mu_tol=mu_tol,
    )
