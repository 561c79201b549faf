"""Point-set generators and the Diophantine machinery behind the infinite-type set."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from .errors import CapacityError, ParameterError
from .geom import DEFAULT_TOL, TolerancePolicy
from .pointset import DEFAULT_CAPACITY, PeriodicSpec, PointSet, SlabWindow, realize_window


def _require_radius(window_radius, minimum):
    if window_radius < minimum:
        raise ParameterError(f"window_radius must be at least {minimum}", window_radius=window_radius)


def gen_cubic(d: int, window_radius: float, capacity: int = DEFAULT_CAPACITY, tol: TolerancePolicy = DEFAULT_TOL) -> PointSet:
    """``Z^d`` inside a ball about the origin."""
    if d < 1:
        raise ParameterError("dimension must be at least 1", d=d)
    spec = PeriodicSpec(np.eye(d), np.zeros((1, d)))
    ps = realize_window(spec, window_radius, capacity=capacity, tol=tol)
    ps.provenance = {"generator": "cubic", "dimension": d, "window_radius": float(window_radius)}
    return ps


def cross_spec() -> PeriodicSpec:
    """Period-2 cubic lattice with the six points of {0,1}^3 that are neither all-even nor all-odd."""
    motif = [p for p in itertools.product((0, 1), repeat=3) if 0 < sum(p) < 3]
    return PeriodicSpec(2 * np.eye(3), np.array(motif, dtype=float) / 2)


def gen_cross_example(window_radius: float, capacity: int = DEFAULT_CAPACITY, tol: TolerancePolicy = DEFAULT_TOL) -> PointSet:
    """``Z^3`` minus ``2Z^3`` minus ``2Z^3 + (1,1,1)``: a regular system whose 1-clusters are planar crosses."""
    _require_radius(window_radius, 4)
    ps = realize_window(cross_spec(), window_radius, capacity=capacity, tol=tol)
    ps.provenance = {
        "generator": "cross",
        "rule": "Z^3 \\ (2Z^3 U (2Z^3 + (1,1,1)))",
        "window_radius": float(window_radius),
        "r": 0.5,
        "R": 1.0,
        "t": 1.0,
    }
    return ps


def punctured_spec() -> PeriodicSpec:
    return PeriodicSpec(2 * np.eye(2), np.array([[1, 0], [0, 1], [1, 1]], dtype=float) / 2)


def gen_punctured_grid(window_radius: float, capacity: int = DEFAULT_CAPACITY, tol: TolerancePolicy = DEFAULT_TOL) -> PointSet:
    """``Z^2`` without the points whose coordinates are both even (two orbits)."""
    _require_radius(window_radius, 4)
    ps = realize_window(punctured_spec(), window_radius, capacity=capacity, tol=tol)
    ps.provenance = {"generator": "punctured", "rule": "Z^2 \\ 2Z^2", "window_radius": float(window_radius)}
    return ps


@dataclass(frozen=True)
class InfiniteTypeParams:
    """Parameters of the two-zigzag construction.

    ``a``/``b`` are the horizontal periods of the lower and upper zigzags (their
    ratio must be irrational; only the ``symbolic_ratio`` can certify that),
    ``c`` the vertical period of the connecting spine with ``k*t/c`` an integer.
    """

    t: float = 1.0
    k: int = 4
    a: float = 1.5
    b: float = 1.2 * math.sqrt(2)
    c: float = 4 / 3
    M: int = 2000
    symbolic_ratio: str | None = None

    def __post_init__(self):
        t, a, b, c = self.t, self.a, self.b, self.c
        checks = [
            (t > 0, "t > 0"),
            (isinstance(self.k, (int, np.integer)) and self.k >= 1, "k is a positive integer"),
            (t < a < 2 * t, "t < a < 2t"),
            (t < b < 2 * t, "t < b < 2t"),
            (t <= c < 2 * t, "t <= c < 2t"),
            (self.M >= 1, "M >= 1"),
        ]
        for ok, name in checks:
            if not ok:
                raise ParameterError(f"infinite-type parameters violate {name}", violated=name)
        if abs(self.n_int * c - self.k * t) > 1e-9 * max(1.0, self.k * t):
            raise ParameterError("infinite-type parameters violate c divides k*t", violated="c divides kt")
        if self.symbolic_ratio is None:
            if abs(a / b - round(a / b)) < 1e-12:
                raise ParameterError("a/b is an integer, hence rational", violated="a/b irrational")
        elif abs(float(sp.sympify(self.symbolic_ratio)) - b / a) > 1e-12:
            raise ParameterError("symbolic_ratio does not equal b/a", violated="symbolic ratio")

    @property
    def n_int(self) -> int:
        return int(round(self.k * self.t / self.c))

    @property
    def theta1(self) -> float:
        return math.sqrt(self.t**2 - self.a**2 / 4)

    @property
    def theta2(self) -> float:
        return math.sqrt(self.t**2 - self.b**2 / 4)

    @property
    def theta3(self) -> float:
        return math.sqrt(self.t**2 - self.c**2 / 4)

    @property
    def gap(self) -> float:
        return self.k * self.t

    def alpha(self):
        """``b/a`` as a sympy number when the preset is symbolic, otherwise a float."""
        if self.symbolic_ratio is not None:
            return sp.sympify(self.symbolic_ratio)
        return self.b / self.a

    def max_epsilon(self) -> float:
        """Sup of epsilon with chord half-length below ``b/4``."""
        return math.sqrt(self.gap**2 + (self.b / 4) ** 2) - self.gap

    def chord_half_length(self, epsilon: float) -> float:
        return math.sqrt((self.gap + epsilon) ** 2 - self.gap**2)

    def with_truncation(self, M: int) -> "InfiniteTypeParams":
        return InfiniteTypeParams(self.t, self.k, self.a, self.b, self.c, M, self.symbolic_ratio)

    def to_dict(self):
        return {
            "t": self.t,
            "k": self.k,
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "M": self.M,
            "n_int": self.n_int,
            "symbolic_ratio_b_over_a": self.symbolic_ratio,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta3": self.theta3,
        }


PRESETS = {"paper-default": InfiniteTypeParams(symbolic_ratio="4*sqrt(2)/5")}


def zigzag(period: float, altitude: float, base: float, count: int) -> np.ndarray:
    """Vertices ``i*period/2`` for ``|i| <= count``; odd ones displaced by ``altitude``."""
    i = np.arange(-count, count + 1)
    u = i * period / 2
    v = np.where(i % 2 == 0, base, base + altitude)
    return np.column_stack([u, v])


def infinite_type_parts(params: InfiniteTypeParams) -> dict[str, np.ndarray]:
    p = params
    x = zigzag(p.a, -p.theta1, 0.0, 2 * p.M)
    y = zigzag(p.b, p.theta2, p.gap, 2 * p.M)
    i = np.arange(1, 2 * p.n_int)  # z_0 = x_0 and z_2n = y_0 are already present
    z = np.column_stack([np.where(i % 2 == 0, 0.0, p.theta3), p.c * i / 2])
    return {"X1": x, "X2": y, "X3": z}


def gen_infinite_type(params: InfiniteTypeParams = PRESETS["paper-default"], tol: TolerancePolicy = DEFAULT_TOL) -> PointSet:
    """Two horizontal zigzags at distance ``k*t`` joined by a vertical zigzag spine.

    Points are ordered X1 (index ``i`` in ``-2M..2M`` at position ``i + 2M``),
    then X2 likewise, then the interior spine vertices. The window is the slab
    ``|u| <= M * min(a, b)`` in which both zigzags are complete.
    """
    parts = infinite_type_parts(params)
    points = np.vstack([parts["X1"], parts["X2"], parts["X3"]])
    n = 4 * params.M + 1
    ps = PointSet(
        points,
        window=SlabWindow(0, 0.0, params.M * min(params.a, params.b)),
        tol=tol,
    )
    ps.provenance = {
        "generator": "infinite-type",
        "params": params.to_dict(),
        "layout": {"X1": [0, n], "X2": [n, 2 * n], "X3": [2 * n, len(points)]},
    }
    return ps


def x_index(params: InfiniteTypeParams, i: int) -> int:
    """Point index of ``x_i`` in :func:`gen_infinite_type` output."""
    if abs(i) > 2 * params.M:
        raise ParameterError("x index beyond truncation", i=i, M=params.M)
    return i + 2 * params.M


def y_index(params: InfiniteTypeParams, j: int) -> int:
    if abs(j) > 2 * params.M:
        raise ParameterError("y index beyond truncation", j=j, M=params.M)
    return 4 * params.M + 1 + j + 2 * params.M


@dataclass(frozen=True)
class Convergent:
    p: int
    q: int
    err: float

    def to_dict(self):
        return {"p": self.p, "q": self.q, "err": self.err}


@dataclass
class ConvergentList:
    """Convergents in order; ``terminated`` is set when ``alpha`` turned out rational."""

    convergents: list[Convergent]
    terminated: bool = False
    next_q: int | None = None

    def __len__(self):
        return len(self.convergents)

    def __iter__(self):
        return iter(self.convergents)

    def __getitem__(self, k):
        return self.convergents[k]

    def pairs(self):
        return [(c.p, c.q) for c in self.convergents]


def _partial_quotients(alpha, limit):
    """Up to ``limit`` terms; exact for rationals and sympy algebraic numbers."""
    if isinstance(alpha, sp.Basic):
        if alpha.is_rational:
            alpha = Fraction(int(alpha.p), int(alpha.q))
        else:
            return list(itertools.islice(sp.continued_fraction_iterator(alpha), limit)), False
    if isinstance(alpha, float):
        alpha = Fraction(alpha)
    x = Fraction(alpha)
    terms = []
    while len(terms) < limit:
        a = math.floor(x)
        terms.append(a)
        frac = x - a
        if frac == 0:
            return terms, True
        x = 1 / frac
    return terms, False


def _error(alpha, p, q) -> float:
    if isinstance(alpha, sp.Basic):
        return float(sp.Abs(alpha - sp.Rational(p, q)).evalf(30))
    return float(abs(Fraction(alpha) - Fraction(p, q)))


def continued_fraction_convergents(alpha, count: int) -> ConvergentList:
    """First ``count`` convergents ``p_n/q_n`` of ``alpha > 0``.

    ``alpha`` may be an int, Fraction, float (expanded exactly as the binary
    rational it is) or a sympy number such as ``sp.sqrt(2)``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if isinstance(alpha, str):
        alpha = sp.sympify(alpha)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    terms, terminated = _partial_quotients(alpha, count + 1)
    p_prev, p = 1, terms[0]
    q_prev, q = 0, 1
    seq = [(p, q)]
    for a in terms[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        seq.append((p, q))
    out = [Convergent(int(pn), int(qn), _error(alpha, pn, qn)) for pn, qn in seq[:count]]
    next_q = int(seq[count][1]) if len(seq) > count else None
    return ConvergentList(out, terminated=terminated and len(seq) <= count, next_q=next_q)


def find_close_pairs(a: float, b: float, delta: float, p_max: int) -> list[tuple[int, int]]:
    """All ``(p, q)`` with ``1 <= p <= p_max``, ``q >= 1`` and ``|p*a - q*b| < delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    p = np.arange(1, p_max + 1)
    lo = np.maximum(np.ceil((p * a - delta) / b), 1).astype(np.int64)
    hi = np.floor((p * a + delta) / b).astype(np.int64)
    out = []
    for pi, l, h in zip(p.tolist(), lo.tolist(), hi.tolist()):
        for q in range(l, h + 1):
            if abs(pi * a - q * b) < delta:
                out.append((pi, q))
    return out


@dataclass
class DemoReport:
    params: dict
    epsilon: float
    delta: float
    clearance_p: float
    convergents: list[dict]
    admissible: list[dict]
    nonequivalence: list[dict]
    obstruction: list[dict]
    windows: list[dict]
    kt_threshold_index: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "schema": "tbond.infinite_demo/1",
            "params": self.params,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "spine_clearance_p": self.clearance_p,
            "kt_threshold_index": self.kt_threshold_index,
            "convergents": self.convergents,
            "admissible": self.admissible,
            "nonequivalence": self.nonequivalence,
            "obstruction": self.obstruction,
            "windows": self.windows,
            "notes": self.notes,
        }


def default_windows(M: int) -> list[int]:
    return [max(1, M // 8), max(1, M // 4), max(1, M // 2), M]


def infinite_type_demo(
    params: InfiniteTypeParams = PRESETS["paper-default"],
    epsilon: float | None = None,
    n_convergents: int = 12,
    windows: list[int] | None = None,
    jobs: int = 1,
    require: int = 3,
) -> DemoReport:
    """Exhibit N(kt) staying finite while N(kt + epsilon) grows with the window.

    Convergent centers ``x_{p_n} = (p_n a, 0)`` whose cluster meets the upper
    line are located, their ``(kt + epsilon)``-clusters are checked pairwise
    non-equivalent, and class counts are tabulated on nested truncations.
    """
    from .cluster import classify, cluster_at, clusters_equivalent

    eps_max = params.max_epsilon()
    if epsilon is None:
        epsilon = eps_max / 2
    if not 0 < epsilon < eps_max:
        raise ParameterError(
            "epsilon must satisfy 0 < epsilon and chord half-length < b/4",
            epsilon=epsilon,
            max_epsilon=eps_max,
        )
    delta = params.chord_half_length(epsilon)
    rho = params.gap + epsilon
    clearance = (rho + params.theta3) / params.a
    alpha = params.alpha()
    convs = continued_fraction_convergents(alpha, n_convergents)
    qs = [c.q for c in convs] + ([convs.next_q] if convs.next_q else [])

    ps = gen_infinite_type(params)
    reach = params.M * min(params.a, params.b) - rho
    conv_rows, admissible = [], []
    for n, c in enumerate(convs):
        q_next = qs[n + 1] if n + 1 < len(qs) else None
        offset = c.p * params.a - c.q * params.b
        # |pa - qb| < a/q_next suffices for |pa - qb| < delta
        captured = abs(offset) < delta
        row = {
            "n": n,
            "p": c.p,
            "q": c.q,
            "err": c.err,
            "q_next": q_next,
            "offset": offset,
            "captured": captured,
            "q_next_bound_met": q_next is not None and q_next > params.a / delta,
            "clear_of_spine": c.p > clearance,
            "inside_window": c.p * params.a <= reach,
        }
        conv_rows.append(row)
        if captured and row["clear_of_spine"] and row["inside_window"]:
            admissible.append(row)
    if len(admissible) < require:
        needed = None
        for row in conv_rows:
            if row["captured"] and row["clear_of_spine"]:
                needed = row["p"]
                if sum(1 for r in conv_rows if r["captured"] and r["clear_of_spine"] and r["p"] <= needed) >= require:
                    break
        need_M = None if needed is None else math.ceil((needed * params.a + rho) / min(params.a, params.b))
        raise CapacityError(
            "truncation too small to contain the requested convergent centers",
            admissible=len(admissible),
            required=require,
            required_M=need_M,
        )

    clusters = {}
    for row in admissible:
        idx = x_index(params, 2 * row["p"])
        cl = cluster_at(ps, idx, rho)
        clusters[row["p"]] = cl
        row["cluster_size"] = len(cl)
        row["contains_y_q"] = bool(np.any(cl.member_indices == y_index(params, 2 * row["q"])))
    noneq, obstruction = [], []
    for r1, r2 in itertools.combinations(admissible, 2):
        g = clusters_equivalent(clusters[r1["p"]], clusters[r2["p"]], ps.tol)
        noneq.append({"p": r1["p"], "p_prime": r2["p"], "equivalent": g is not None})
        obstruction.append(
            {
                "p": r1["p"],
                "p_prime": r2["p"],
                "shift_defect": abs((r1["p"] - r2["p"]) * params.a - (r1["q"] - r2["q"]) * params.b),
                "reflection_defect": abs((r1["p"] + r2["p"]) * params.a - (r1["q"] + r2["q"]) * params.b),
            }
        )

    notes = []
    defects = [min(row["shift_defect"], row["reflection_defect"]) for row in obstruction]
    if defects and min(defects) < 1e3 * ps.tol.eps_geom:
        notes.append(
            f"smallest congruence defect {min(defects):.3g} is within 1e3 * eps_geom; "
            "non-equivalence of the largest convergents is near geometric resolution"
        )

    table = []
    for M in windows or default_windows(params.M):
        sub = gen_infinite_type(params.with_truncation(M))
        # same center set at both radii: interior at the larger one
        n_kt = classify(sub, params.gap, level=rho, jobs=jobs).count
        n_eps = classify(sub, rho, level=rho, jobs=jobs)
        table.append(
            {
                "M": M,
                "interior_count": n_eps.interior_count,
                "N_kt": n_kt,
                "N_kt_eps": n_eps.count,
            }
        )
    return DemoReport(
        params=params.to_dict(),
        epsilon=float(epsilon),
        delta=delta,
        clearance_p=clearance,
        convergents=conv_rows,
        admissible=admissible,
        nonequivalence=noneq,
        obstruction=obstruction,
        windows=table,
        kt_threshold_index=2 * (params.gap + params.theta3) / params.a,
        notes=notes,
    )
