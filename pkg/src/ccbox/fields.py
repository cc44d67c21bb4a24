"""Vector field families, iterated commutators and built-in examples.

A family holds the m horizontal fields X_j = f_j . grad on a pair of nested
boxes Omega' strictly inside Omega.  Commutator coefficient vectors follow the
right-nested recursion f_{kw} = X_k f_w - X_w f_k, with Jacobians taken
analytically at depth one when available and by finite differences above.
"""

from dataclasses import dataclass, field
import itertools
import warnings

import numpy as np
import yaml

from .errors import (
    ConfigError,
    DomainError,
    HormanderWarning,
    UnsupportedDepthError,
)
from .expressions import compile_vector

FD_BASE_STEP = 1e-6


# ---------------------------------------------------------------------------
# core types


@dataclass(frozen=True)
class Word:
    """A bracket word j1..jl with letters in 1..m; X_w is the right-nested
    commutator [X_{j1},[...,[X_{j_{l-1}},X_{jl}]]]."""

    letters: tuple

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(j) for j in self.letters))
        if not self.letters:
            raise ValueError("empty word")

    @property
    def length(self):
        return len(self.letters)

    def __str__(self):
        return "".join(str(j) for j in self.letters)


@dataclass
class VectorFieldFamily:
    n: int
    m: int
    s: int
    coeffs: list
    jac: list | None = None
    omega_inner: np.ndarray = None
    omega_outer: np.ndarray = None
    smoothness_class: str = "smooth"
    kinks: tuple = ()  # (coordinate index 0-based, location) pairs
    exact_flows: dict | None = None  # field index (1-based) -> flow(x, t)
    name: str = "custom"

    def __post_init__(self):
        self.omega_inner = np.asarray(self.omega_inner, dtype=float)
        self.omega_outer = np.asarray(self.omega_outer, dtype=float)
        if self.omega_inner.shape != (self.n, 2) or self.omega_outer.shape != (self.n, 2):
            raise ValueError("domain boxes must have shape (n, 2)")
        if not (
            np.all(self.omega_inner[:, 0] > self.omega_outer[:, 0])
            and np.all(self.omega_inner[:, 1] < self.omega_outer[:, 1])
        ):
            raise ValueError("omega_inner must be strictly inside omega_outer")
        if len(self.coeffs) != self.m:
            raise ValueError("need exactly m coefficient maps")
        if self.jac is not None and len(self.jac) != self.m:
            raise ValueError("need exactly m Jacobian maps when jac is given")
        if self.s < 2:
            raise ValueError("step must be >= 2")

    # -- geometry helpers

    def contains(self, x, inner=False):
        box = self.omega_inner if inner else self.omega_outer
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= box[:, 0]) and np.all(x <= box[:, 1]))

    def margin(self):
        """Smallest axis gap between the inner and outer boxes."""
        return float(
            min(
                np.min(self.omega_inner[:, 0] - self.omega_outer[:, 0]),
                np.min(self.omega_outer[:, 1] - self.omega_inner[:, 1]),
            )
        )

    def sample_points(self, count, rng, inner=True):
        box = self.omega_inner if inner else self.omega_outer
        u = rng.random((count, self.n))
        return box[:, 0] + u * (box[:, 1] - box[:, 0])

    def sup_coeff_norm(self, grid_resolution=9):
        pts = _box_grid(self.omega_outer, grid_resolution)
        best = 0.0
        for j in range(self.m):
            best = max(best, float(np.max(np.abs(self.coeffs[j](pts)))))
        return best

    def flow_horizon(self):
        """Conservative surrogate t0 = min(1, margin / (2 sup|f_j|))."""
        sup = self.sup_coeff_norm()
        if sup == 0.0:
            return 1.0
        return min(1.0, self.margin() / (2.0 * sup))

    # -- derivative oracles

    def field_value(self, j, x):
        """f_j(x) for a 1-based field index."""
        return np.asarray(self.coeffs[j - 1](np.asarray(x, dtype=float)), dtype=float)

    def field_jacobian(self, j, x):
        """Jacobian of f_j at x: analytic when declared, else finite differences."""
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac[j - 1](x), dtype=float)
        return fd_jacobian(self.coeffs[j - 1], x, kinks=self.kinks)

    def validate(self, seed=0):
        """Spot-check the declared invariants; raises on violation."""
        rng = np.random.default_rng(seed)
        pts = self.sample_points(100, rng, inner=False)
        for j in range(self.m):
            vals = self.coeffs[j](pts)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"field {j + 1} not finite on omega_outer")
        if self.jac is not None:
            pts = self.sample_points(100, rng, inner=True)
            for j in range(1, self.m + 1):
                for x in pts:
                    ana = self.field_jacobian(j, x)
                    num = fd_jacobian(self.coeffs[j - 1], x, kinks=self.kinks)
                    scale = max(1.0, float(np.max(np.abs(ana))))
                    if np.max(np.abs(ana - num)) > 1e-6 * scale:
                        raise ValueError(
                            f"analytic Jacobian of field {j} disagrees with finite "
                            f"differences at {x}"
                        )
        return True


def _box_grid(box, resolution):
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def fd_step(xk):
    return max(FD_BASE_STEP, FD_BASE_STEP * abs(float(xk)))


def fd_jacobian(func, x, kinks=()):
    """Columnwise finite-difference Jacobian of a vector map.

    Central differences by default; one-sided on coordinates whose value sits
    within two steps of a declared kink location (|.|-type coefficients make
    central differences silently wrong across the kink set)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    f0 = None
    cols = []
    kink_map = {}
    for axis, loc in kinks:
        kink_map.setdefault(int(axis), []).append(float(loc))
    for k in range(n):
        h = fd_step(x[k])
        one_sided = any(abs(x[k] - loc) < 2.0 * h for loc in kink_map.get(k, ()))
        e = np.zeros(n)
        e[k] = h
        if one_sided:
            sign = 1.0 if x[k] >= min(kink_map[k], key=lambda L: abs(x[k] - L)) else -1.0
            if f0 is None:
                f0 = np.asarray(func(x), dtype=float)
            f1 = np.asarray(func(x + sign * e), dtype=float)
            f2 = np.asarray(func(x + 2.0 * sign * e), dtype=float)
            cols.append(sign * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h))
        else:
            fp = np.asarray(func(x + e), dtype=float)
            fm = np.asarray(func(x - e), dtype=float)
            cols.append((fp - fm) / (2.0 * h))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# commutator evaluation


def _word_value(family, letters, x, memo):
    if letters in memo:
        return memo[letters]
    if len(letters) == 1:
        val = family.field_value(letters[0], x)
    else:
        k, rest = letters[0], letters[1:]
        fk = family.field_value(k, x)
        frest = _word_value(family, rest, x, memo)
        jrest = _word_jacobian(family, rest, x, memo)
        jk = family.field_jacobian(k, x)
        val = jrest @ fk - jk @ frest
    memo[letters] = val
    return val


def _word_jacobian(family, letters, x, memo):
    key = ("jac", letters)
    if key in memo:
        return memo[key]
    if len(letters) == 1:
        jac = family.field_jacobian(letters[0], x)
    else:
        jac = fd_jacobian(
            lambda y: _word_value(family, letters, np.asarray(y), {}),
            x,
            kinks=family.kinks,
        )
    memo[key] = jac
    return jac


def eval_commutator(family, word, x):
    """Coefficient vector f_w(x) of the right-nested commutator X_w."""
    if not isinstance(word, Word):
        word = Word(tuple(word))
    if word.length > family.s:
        raise UnsupportedDepthError(
            f"word {word} has length {word.length} > step {family.s}"
        )
    x = np.asarray(x, dtype=float)
    if not family.contains(x):
        raise DomainError(f"point {x} outside omega_outer")
    return _word_value(family, word.letters, x, {})


# ---------------------------------------------------------------------------
# commutator table


@dataclass(frozen=True)
class TableEntry:
    index: int  # 1-based position in the enumeration Y_1..Y_q
    word: Word

    @property
    def length(self):
        return self.word.length


@dataclass
class CommutatorTable:
    family: VectorFieldFamily
    entries: list = field(default_factory=list)

    @property
    def q(self):
        return len(self.entries)

    def entry(self, i):
        """Table entry for a 1-based index."""
        return self.entries[i - 1]

    def eval(self, i, x):
        """Y_i(x) for a 1-based index."""
        return eval_commutator(self.family, self.entry(i).word, x)

    def eval_all(self, x):
        """(q, n) matrix of all Y_i(x), sharing sub-bracket work."""
        x = np.asarray(x, dtype=float)
        if not self.family.contains(x):
            raise DomainError(f"point {x} outside omega_outer")
        memo = {}
        return np.stack(
            [_word_value(self.family, e.word.letters, x, memo) for e in self.entries]
        )

    def lengths(self):
        return np.array([e.length for e in self.entries])


def reduced_words(m, s):
    """Right-nested Hall-type words up to length s.

    Length 1: all letters.  Length 2: (j,k) with j < k (repeats vanish and
    (k,j) is the antisymmetric duplicate).  Length >= 3: any letter prepended
    to a retained shorter word."""
    by_len = {1: [(j,) for j in range(1, m + 1)]}
    if s >= 2:
        by_len[2] = [(j, k) for j in range(1, m + 1) for k in range(j + 1, m + 1)]
    for ell in range(3, s + 1):
        by_len[ell] = [
            (k,) + w for w in by_len[ell - 1] for k in range(1, m + 1)
        ]
    out = []
    for ell in range(1, s + 1):
        out.extend(sorted(by_len.get(ell, [])))
    return out


def all_words(m, s):
    out = []
    for ell in range(1, s + 1):
        out.extend(itertools.product(range(1, m + 1), repeat=ell))
    return out


def build_table(family, full_words=False):
    """Enumerate the commutators Y_1..Y_q with |w| <= s.

    Deterministic order: by length, then lexicographic letters.  By default
    only the reduced right-nested word set is kept; the full enumeration is
    available behind the flag for conformance checks."""
    words = all_words(family.m, family.s) if full_words else reduced_words(family.m, family.s)
    words = sorted(words, key=lambda w: (len(w), w))
    entries = [TableEntry(i + 1, Word(w)) for i, w in enumerate(words)]
    return CommutatorTable(family=family, entries=entries)


# ---------------------------------------------------------------------------
# regularity constants


@dataclass
class RegularityConstants:
    L: float
    nu: float
    estimation_grid: int
    hormander_ok: bool = True


def _directional_derivative(family, func, direction_field, x):
    """(X_k g)(x) by finite differences along f_k."""
    v = family.field_value(direction_field, x)
    h = FD_BASE_STEP

    def along(t):
        return np.asarray(func(x + t * v), dtype=float)

    return (along(h) - along(-h)) / (2.0 * h)


def estimate_constants(family, grid_resolution=16):
    """Grid estimates of the derivative bound L and the spanning constant nu.

    L sums three sup terms: Euclidean derivatives of the f_j up to order s-2,
    order s-1 derivatives, and the second horizontal derivatives of the top
    bracket coefficients.  nu is the grid minimum of Lambda(x, 1).  Both are
    estimates: a sup attained on a null set can be undershot."""
    shrink = 0.02 * (family.omega_outer[:, 1] - family.omega_outer[:, 0])
    box = np.stack(
        [family.omega_outer[:, 0] + shrink, family.omega_outer[:, 1] - shrink], axis=-1
    )
    pts = _box_grid(box, grid_resolution)

    # term 1 + term 2: Euclidean derivatives of f_j up to order s-1
    term12 = 0.0
    for j in range(1, family.m + 1):
        term12 = max(term12, float(np.max(np.abs(family.coeffs[j - 1](pts)))))
    # derivative orders 1..s-1 by nested finite differences on a subsample
    sub = pts[:: max(1, len(pts) // 500)]
    for j in range(1, family.m + 1):
        funcs = [family.coeffs[j - 1]]
        for order in range(1, family.s):
            next_funcs = []
            for fprev in funcs:
                for axis in range(family.n):
                    def dax(y, fprev=fprev, axis=axis):
                        y = np.asarray(y, dtype=float)
                        h = FD_BASE_STEP
                        e = np.zeros(family.n)
                        e[axis] = h
                        return (
                            np.asarray(fprev(y + e), dtype=float)
                            - np.asarray(fprev(y - e), dtype=float)
                        ) / (2.0 * h)

                    next_funcs.append(dax)
                    for x in sub[:: max(1, len(sub) // 60)]:
                        term12 = max(term12, float(np.max(np.abs(dax(x)))))
            funcs = next_funcs

    # term 3: |X_k X_j f_w| for |w| = s - 1
    term3 = 0.0
    top_words = [w for w in reduced_words(family.m, family.s) if len(w) == family.s - 1]
    for w in top_words:
        def fw(y, w=w):
            return _word_value(family, w, np.asarray(y, dtype=float), {})

        for j in range(1, family.m + 1):
            def xj_fw(y, j=j):
                return _directional_derivative(family, fw, j, np.asarray(y, dtype=float))

            for k in range(1, family.m + 1):
                for x in sub[:: max(1, len(sub) // 40)]:
                    val = _directional_derivative(family, xj_fw, k, x)
                    term3 = max(term3, float(np.max(np.abs(val))))

    L = term12 + term3

    # nu = min over the grid of Lambda(x, 1)
    table = build_table(family)
    lengths = table.lengths()
    nu = np.inf
    combos = list(itertools.combinations(range(1, table.q + 1), family.n))
    coarse = _box_grid(box, max(4, grid_resolution // 2)) if family.n >= 3 else pts
    for x in coarse:
        ys = table.eval_all(x)
        lam_max = 0.0
        for combo in combos:
            mat = np.stack([ys[i - 1] for i in combo], axis=-1)
            lam_max = max(lam_max, abs(float(np.linalg.det(mat))))
        nu = min(nu, lam_max)
    nu = float(nu)

    ok = nu > 1e-12
    if not ok:
        warnings.warn(
            f"family {family.name!r}: estimated nu = {nu:.3e} <= 1e-12; the family "
            "may fail the Hormander condition on Omega",
            HormanderWarning,
            stacklevel=2,
        )
    return RegularityConstants(L=L, nu=nu, estimation_grid=grid_resolution, hormander_ok=ok)


# ---------------------------------------------------------------------------
# built-in families


def _builtin_heisenberg():
    def f1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        out[..., 2] = -x[..., 1] / 2.0
        return out

    def f2(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = 1.0
        out[..., 2] = x[..., 0] / 2.0
        return out

    def j1(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (3, 3))
        J[..., 2, 1] = -0.5
        return J

    def j2(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (3, 3))
        J[..., 2, 0] = 0.5
        return J

    def flow1(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0] + t, x[1], x[2] - t * x[1] / 2.0])

    def flow2(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0], x[1] + t, x[2] + t * x[0] / 2.0])

    return VectorFieldFamily(
        n=3, m=2, s=2,
        coeffs=[f1, f2], jac=[j1, j2],
        omega_inner=[[-1, 1]] * 3, omega_outer=[[-1.5, 1.5]] * 3,
        exact_flows={1: flow1, 2: flow2},
        name="heisenberg",
    )


def _builtin_grushin():
    def f1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        return out

    def f2(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = x[..., 0]
        return out

    def j1(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (2, 2))

    def j2(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 1, 0] = 1.0
        return J

    def flow1(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0] + t, x[1]])

    def flow2(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0], x[1] + t * x[0]])

    return VectorFieldFamily(
        n=2, m=2, s=2,
        coeffs=[f1, f2], jac=[j1, j2],
        omega_inner=[[-1, 1]] * 2, omega_outer=[[-1.5, 1.5]] * 2,
        exact_flows={1: flow1, 2: flow2},
        name="grushin",
    )


def _builtin_martinet():
    def f1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        return out

    def f2(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = 1.0
        out[..., 2] = x[..., 0] ** 2
        return out

    def j1(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (3, 3))

    def j2(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (3, 3))
        J[..., 2, 0] = 2.0 * x[..., 0]
        return J

    def flow1(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0] + t, x[1], x[2]])

    def flow2(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0], x[1] + t, x[2] + t * x[0] ** 2])

    return VectorFieldFamily(
        n=3, m=2, s=3,
        coeffs=[f1, f2], jac=[j1, j2],
        omega_inner=[[-1, 1]] * 3, omega_outer=[[-1.5, 1.5]] * 3,
        exact_flows={1: flow1, 2: flow2},
        name="martinet",
    )


def _profile_family_step2(a, aprime, name, kinks=(), smoothness_class="smooth"):
    """X1 = d_1, X2 = a(x1) d_2 on a square domain."""

    def f1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        return out

    def f2(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 1] = a(x[..., 0])
        return out

    def j1(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (2, 2))

    def j2(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 1, 0] = aprime(x[..., 0])
        return J

    def flow1(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0] + t, x[1]])

    def flow2(x, t):
        x = np.asarray(x, dtype=float)
        return np.array([x[0], x[1] + t * a(x[0])])

    return VectorFieldFamily(
        n=2, m=2, s=2,
        coeffs=[f1, f2], jac=[j1, j2],
        omega_inner=[[-0.5, 0.5]] * 2, omega_outer=[[-0.75, 0.75]] * 2,
        smoothness_class=smoothness_class, kinks=kinks,
        exact_flows={1: flow1, 2: flow2},
        name=name,
    )


BUILTIN_NAMES = ("heisenberg", "grushin", "martinet", "wright", "nonsmooth_step2")


def builtin_family(name, c=1.0):
    """Fully-populated example family with analytic Jacobians and exact flows.

    `wright` is X1 = d_1, X2 = (x1 + x1^2) d_2; `nonsmooth_step2` replaces the
    profile with a(s) = s + c s|s|, which is of class A_2 but not C^2."""
    if name == "heisenberg":
        return _builtin_heisenberg()
    if name == "grushin":
        return _builtin_grushin()
    if name == "martinet":
        return _builtin_martinet()
    if name == "wright":
        return _profile_family_step2(
            a=lambda s: s + s**2, aprime=lambda s: 1.0 + 2.0 * s, name="wright"
        )
    if name == "nonsmooth_step2":
        return _profile_family_step2(
            a=lambda s: s + c * s * np.abs(s),
            aprime=lambda s: 1.0 + 2.0 * c * np.abs(s),
            name="nonsmooth_step2",
            kinks=((0, 0.0),),
            smoothness_class="a_s",
        )
    raise ConfigError(
        f"unknown builtin family {name!r}; available: {', '.join(BUILTIN_NAMES)}"
    )


# ---------------------------------------------------------------------------
# family definition files


def load_family(path):
    """Load a family from a YAML definition file.

    Schema (see README): dimension, step, fields (list of m component-
    expression lists), optional jacobians (m lists of n lists), omega_inner /
    omega_outer, optional smoothness_class and kinks."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("family file must be a mapping")
    if isinstance(raw.get("builtin"), str):
        return builtin_family(raw["builtin"])
    try:
        n = int(raw["dimension"])
        s = int(raw["step"])
        field_exprs = raw["fields"]
        inner = raw["omega_inner"]
        outer = raw["omega_outer"]
    except KeyError as exc:
        raise ConfigError(f"family file missing key {exc}") from exc
    coeffs = []
    for comps in field_exprs:
        if len(comps) != n:
            raise ConfigError("each field needs exactly n component expressions")
        coeffs.append(compile_vector(comps, n))
    jac = None
    if "jacobians" in raw:
        jac = []
        for rows in raw["jacobians"]:
            flat = [e for row in rows for e in row]
            vec = compile_vector(flat, n)

            def jfun(x, vec=vec):
                return vec(np.asarray(x, dtype=float)).reshape(n, n)

            jac.append(jfun)
    kinks = tuple((int(a), float(b)) for a, b in raw.get("kinks", []))
    fam = VectorFieldFamily(
        n=n, m=len(coeffs), s=s,
        coeffs=coeffs, jac=jac,
        omega_inner=inner, omega_outer=outer,
        smoothness_class=str(raw.get("smoothness_class", "smooth")),
        kinks=kinks,
        name=str(raw.get("name", "custom")),
    )
    return fam
