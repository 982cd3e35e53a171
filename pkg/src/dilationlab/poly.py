"""Dissipation operators, regular Laurent polynomials and positivity scans.

Subsets ``K`` of ``{0, ..., d-1}`` are plain tuples of sorted indices.  A
partition pair ``(C1, C2)`` of ``K`` allows empty parts, so every ``K`` has
exactly ``2**len(K)`` of them.
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Sequence, Tuple

import numpy as np

from .approximants import approximant_family
from .config import DEFAULTS
from .linalg import PsdVerdict, hermitian_adjoint, is_positive_semidefinite, matrix_exponential_batch, operator_norm
from .semigroup import CommutingFamily, evaluate, is_dissipative
from .stochastic import sample

Exponent = Tuple[int, ...]


def partition_pairs(K: Sequence[int]) -> Iterator[tuple]:
    """All ordered pairs ``(C1, C2)`` with ``C1 + C2 = K`` disjoint.

    Bit ``b`` of the mask sends ``K[b]`` to ``C1``.
    """
    K = tuple(K)
    for mask in range(1 << len(K)):
        C1 = tuple(k for b, k in enumerate(K) if mask >> b & 1)
        C2 = tuple(k for b, k in enumerate(K) if not mask >> b & 1)
        yield C1, C2


def all_subsets(d: int) -> list:
    return [K for r in range(d + 1) for K in itertools.combinations(range(d), r)]


def _prod(mats: Iterable[np.ndarray], dim: int) -> np.ndarray:
    out = np.eye(dim, dtype=complex)
    for M in mats:
        out = out @ M
    return out


def dissipation_operator(fam, K: Sequence[int]) -> np.ndarray:
    """``(-1/2)^|K| sum_{(C1,C2)} (prod_{C1} A_i)* prod_{C2} A_j``."""
    mats = fam.matrices if isinstance(fam, CommutingFamily) else [np.asarray(m, dtype=complex) for m in fam]
    dim = mats[0].shape[0]
    K = tuple(sorted(K))
    total = np.zeros((dim, dim), dtype=complex)
    for C1, C2 in partition_pairs(K):
        left = _prod((mats[i] for i in C1), dim)
        right = _prod((mats[j] for j in C2), dim)
        total += hermitian_adjoint(left) @ right
    return (-0.5) ** len(K) * total


@dataclass
class DissipativityReport:
    verdicts: Dict[tuple, PsdVerdict]

    @property
    def passed(self) -> bool:
        return all(v.is_psd for v in self.verdicts.values())

    @property
    def worst(self) -> tuple:
        """``(K, verdict)`` with the smallest relative margin."""
        return min(self.verdicts.items(), key=lambda kv: kv[1].min_eigenvalue / max(1.0, kv[1].scale))

    def failing(self) -> list:
        return [K for K, v in self.verdicts.items() if not v.is_psd]


def complete_dissipativity_report(fam, tol: float = DEFAULTS.psd_tol) -> DissipativityReport:
    d = fam.d if isinstance(fam, CommutingFamily) else len(fam)
    if d > DEFAULTS.max_subsets_d:
        raise ValueError(f"d={d} needs 2^{d} subsets; refusing")
    return DissipativityReport({K: is_positive_semidefinite(dissipation_operator(fam, K), tol) for K in all_subsets(d)})


class LaurentPolynomial:
    """Finite map from exponent vectors in ``Z^d`` to complex coefficients."""

    def __init__(self, d: int, terms=None):
        self.d = int(d)
        self.terms: Dict[Exponent, complex] = {}
        for n, c in (terms or {}).items():
            n = tuple(int(x) for x in n)
            if len(n) != self.d:
                raise ValueError(f"exponent {n} does not have length {self.d}")
            c = complex(c)
            if c != 0:
                self.terms[n] = self.terms.get(n, 0) + c
        self.terms = {n: c for n, c in self.terms.items() if c != 0}

    @classmethod
    def constant(cls, d: int, c=1.0) -> "LaurentPolynomial":
        return cls(d, {(0,) * d: c})

    @classmethod
    def monomial(cls, exponents: Sequence[int], c=1.0) -> "LaurentPolynomial":
        return cls(len(exponents), {tuple(exponents): c})

    @classmethod
    def variable(cls, d: int, i: int, power: int = 1) -> "LaurentPolynomial":
        n = [0] * d
        n[i] = power
        return cls.monomial(n)

    def __repr__(self):
        return f"LaurentPolynomial(d={self.d}, terms={self.terms!r})"

    def __eq__(self, other):
        return isinstance(other, LaurentPolynomial) and self.d == other.d and self.terms == other.terms

    def __add__(self, other):
        if not isinstance(other, LaurentPolynomial):
            other = LaurentPolynomial.constant(self.d, other)
        merged = dict(self.terms)
        for n, c in other.terms.items():
            merged[n] = merged.get(n, 0) + c
        return LaurentPolynomial(self.d, merged)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPolynomial(self.d, {n: -c for n, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, LaurentPolynomial) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, LaurentPolynomial):
            return LaurentPolynomial(self.d, {n: c * other for n, c in self.terms.items()})
        out: Dict[Exponent, complex] = {}
        for (n, a), (m, b) in itertools.product(self.terms.items(), other.terms.items()):
            k = tuple(x + y for x, y in zip(n, m))
            out[k] = out.get(k, 0) + a * b
        return LaurentPolynomial(self.d, out)

    __rmul__ = __mul__

    @property
    def absolute_degree(self) -> int:
        return max((max((abs(x) for x in n), default=0) for n in self.terms), default=0)

    def adjoint(self) -> "LaurentPolynomial":
        """``p*``: conjugate coefficients, negated exponents.  Regular evaluation
        of a degree-<=1 polynomial commutes with this involution."""
        return LaurentPolynomial(self.d, {tuple(-x for x in n): np.conj(c) for n, c in self.terms.items()})

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        diff = self - self.adjoint()
        return all(abs(c) <= tol for c in diff.terms.values())

    def on_torus(self, theta: np.ndarray) -> np.ndarray:
        """Evaluate at ``lambda_i = exp(i theta_i)``; ``theta`` has shape ``(..., d)``."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape[:-1], dtype=complex)
        for n, c in self.terms.items():
            out += c * np.exp(1j * (theta @ np.asarray(n, dtype=float)))
        return out

    def to_json(self) -> list:
        return [{"exponents": list(n), "coeff": [c.real, c.imag]} for n, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, items: list, d: int = None) -> "LaurentPolynomial":
        if d is None:
            if not items:
                raise ValueError("cannot infer d from an empty polynomial")
            d = len(items[0]["exponents"])
        terms: Dict[Exponent, complex] = {}
        for item in items:
            n = tuple(item["exponents"])
            re, im = item["coeff"]
            terms[n] = terms.get(n, 0) + complex(re, im)
        return cls(d, terms)


def _matrix_power(S: np.ndarray, k: int) -> np.ndarray:
    return np.linalg.matrix_power(S, k) if k else np.eye(S.shape[0], dtype=complex)


def regular_poly_eval(p: LaurentPolynomial, ops: Sequence[np.ndarray]) -> np.ndarray:
    """Regular evaluation: ``prod X_i^{n_i} -> (prod_{n_i<0} S_i^{-n_i})* (prod_{n_i>0} S_i^{n_i})``."""
    ops = [np.asarray(S, dtype=complex) for S in ops]
    if len(ops) != p.d:
        raise ValueError(f"polynomial in {p.d} variables, got {len(ops)} operators")
    dim = ops[0].shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for n, c in p.terms.items():
        neg = _prod((_matrix_power(ops[i], -k) for i, k in enumerate(n) if k < 0), dim)
        pos = _prod((_matrix_power(ops[i], k) for i, k in enumerate(n) if k > 0), dim)
        out += c * hermitian_adjoint(neg) @ pos
    return out


def p_K_polynomial(K: Sequence[int], d: int) -> LaurentPolynomial:
    """Partition-sum form ``sum_{(C1,C2)} prod_{C1}(1 - X_i^-1) prod_{C2}(1 - X_j)``."""
    one = LaurentPolynomial.constant(d)
    total = LaurentPolynomial(d)
    for C1, C2 in partition_pairs(sorted(K)):
        term = one
        for i in C1:
            term = term * (one - LaurentPolynomial.variable(d, i, -1))
        for j in C2:
            term = term * (one - LaurentPolynomial.variable(d, j, 1))
        total = total + term
    return total


def p_K_product_form(K: Sequence[int], d: int) -> LaurentPolynomial:
    """``prod_{i in K} (2 - X_i - X_i^-1)``."""
    out = LaurentPolynomial.constant(d)
    for i in K:
        out = out * (2 - LaurentPolynomial.variable(d, i) - LaurentPolynomial.variable(d, i, -1))
    return out


def p_K_operator(ops: Sequence[np.ndarray], K: Sequence[int]) -> np.ndarray:
    """``p_K`` evaluated regularly, summed in partition form with ``I - S_i`` factors."""
    dim = np.asarray(ops[0]).shape[0]
    eye = np.eye(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for C1, C2 in partition_pairs(sorted(K)):
        left = _prod((eye - ops[i] for i in C1), dim)
        right = _prod((eye - ops[j] for j in C2), dim)
        out += hermitian_adjoint(left) @ right
    return out


# -- torus supremum -----------------------------------------------------------

@dataclass
class TorusSup:
    sup_estimate: float
    upper_bound: float
    argmax: np.ndarray
    cells: int = 0

    def __iter__(self):
        return iter((self.sup_estimate, self.upper_bound))


def _quadratic_box_extremes(v, g, Q, r):
    """Exact max and min of ``v + g.x + x.Q.x/2`` over the boxes ``|x_i| <= r_i``.

    Every extremum sits in the relative interior of some face, where the free
    coordinates solve a linear system; faces with singular blocks are covered
    by their boundary faces.  Shapes: v (C,), g (C,d), Q (C,d,d), r (d,).
    """
    C, d = g.shape
    hi = np.full(C, -np.inf)
    lo = np.full(C, np.inf)
    for pattern in itertools.product((-1, 0, 1), repeat=d):
        pattern = np.array(pattern)
        free = np.flatnonzero(pattern == 0)
        x = np.broadcast_to(pattern * r, (C, d)).copy()
        ok = np.ones(C, dtype=bool)
        if free.size:
            fixed = np.flatnonzero(pattern != 0)
            QFF = Q[:, free[:, None], free[None, :]]
            rhs = -(g[:, free] + np.einsum("cij,cj->ci", Q[:, free[:, None], fixed[None, :]], x[:, fixed]))
            det = np.linalg.det(QFF)
            scale = np.abs(QFF).max(axis=(1, 2)) ** free.size + 1e-300
            ok = np.abs(det) > 1e-12 * scale
            QFF = np.where(ok[:, None, None], QFF, np.eye(free.size))
            x[:, free] = np.linalg.solve(QFF, rhs[..., None])[..., 0]
            ok &= np.all(np.abs(x[:, free]) <= r[free] * (1 + 1e-12), axis=1)
        f = v + np.einsum("ci,ci->c", g, x) + 0.5 * np.einsum("ci,cij,cj->c", x, Q, x)
        hi = np.where(ok, np.maximum(hi, f), hi)
        lo = np.where(ok, np.minimum(lo, f), lo)
    return hi, lo


def _cell_bounds(p: LaurentPolynomial, centres: np.ndarray, radius: np.ndarray) -> tuple:
    """Values at centres and upper bounds of ``|p|`` on each cell ``c + [-r, r]``.

    Complex ``p``: ``|p(c) + grad p(c).x|`` maximised over vertices plus the
    second-order remainder ``sum_n |a_n| (sum_i |n_i| r_i)^2 / 2``.  Real-valued
    (self-adjoint) ``p`` with ``d <= 4``: the second-order Taylor polynomial is
    extremised exactly and only the third-order remainder is added, which keeps
    the bound tight along large level sets.
    """
    d = p.d
    exps = np.array(list(p.terms.keys()), dtype=float).reshape(-1, d)
    coeffs = np.array(list(p.terms.values()), dtype=complex)
    phases = np.exp(1j * centres @ exps.T) * coeffs          # (cells, terms)
    value = phases.sum(axis=1)
    grad = 1j * phases @ exps                                 # (cells, d)
    reach = np.abs(exps) @ radius                             # sum_i |n_i| r_i per term
    if p.is_self_adjoint() and d <= 4:
        hess = -np.einsum("ct,ti,tj->cij", phases, exps, exps).real
        hi, lo = _quadratic_box_extremes(value.real, grad.real, hess, radius)
        remainder = np.abs(coeffs) @ reach**3 / 6
        return np.abs(value), np.maximum(hi, -lo) + remainder
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
    vertex = np.abs(value[:, None] + grad @ (signs * radius).T).max(axis=1)
    return np.abs(value), vertex + np.abs(coeffs) @ reach**2 / 2


def torus_sup(p: LaurentPolynomial, resolution: int = 64, refinement_rounds: int = 20,
              budget: int = 2_000_000, max_active: int = 2_000_000, chunk: int = 50_000,
              rel_gap: float = 1e-12) -> TorusSup:
    """Grid maximum of ``|p|`` on ``T^d`` plus a certified upper bound.

    Branch and bound: start from a uniform grid with ``resolution`` points per
    circle (cells centred on the points), then split every cell whose bound
    exceeds the best value seen.  Pruned cells cannot hold anything above the
    best value, so the returned upper bound stays valid.  Refinement stops when
    the gap is below ``rel_gap``, after ``refinement_rounds`` or when more than
    ``max_active`` cells would be needed.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8 points per circle")
    d = p.d
    if not p.terms:
        return TorusSup(0.0, 0.0, np.zeros(d))
    if d == 0:
        v = abs(next(iter(p.terms.values())))
        return TorusSup(v, v, np.zeros(0))
    if resolution**d > budget:
        raise ValueError(f"{resolution}^{d} grid points exceed the budget of {budget}")

    def bounds_of(centres, radius):
        vals, bnds = [], []
        for start in range(0, centres.shape[0], chunk):
            v, b = _cell_bounds(p, centres[start:start + chunk], radius)
            vals.append(v)
            bnds.append(b)
        return np.concatenate(vals), np.concatenate(bnds)

    h = 2 * np.pi / resolution
    axes = [np.arange(resolution) * h] * d
    centres = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    radius = np.full(d, h / 2)
    values, bounds = bounds_of(centres, radius)
    best_idx = int(np.argmax(values))
    best, argmax = float(values[best_idx]), centres[best_idx].copy()
    total_cells = centres.shape[0]
    l1 = float(sum(abs(c) for c in p.terms.values()))
    if best * (1 + rel_gap) >= l1:
        return TorusSup(best, l1, np.mod(argmax, 2 * np.pi), total_cells)
    offsets = np.array(list(itertools.product((-0.5, 0.5), repeat=d)))
    for _ in range(refinement_rounds):
        keep = bounds > best * (1 + rel_gap) + 1e-300
        centres, bounds = centres[keep], bounds[keep]
        if centres.shape[0] == 0 or centres.shape[0] * 2**d > max_active:
            break
        radius = radius / 2
        centres = (centres[:, None, :] + offsets[None, :, :] * 2 * radius).reshape(-1, d)
        values, bounds = bounds_of(centres, radius)
        total_cells += centres.shape[0]
        i = int(np.argmax(values))
        if values[i] > best:
            best, argmax = float(values[i]), centres[i].copy()
        if best * (1 + rel_gap) >= l1:
            return TorusSup(best, l1, np.mod(argmax, 2 * np.pi), total_cells)
    # pruned cells are only known to stay below best * (1 + rel_gap)
    upper = min(l1, max(best * (1 + rel_gap), float(bounds.max()) if bounds.size else 0.0))
    return TorusSup(best, upper, np.mod(argmax, 2 * np.pi), total_cells)


# -- checks on families ---------------------------------------------------------

@dataclass
class BoundCheck:
    passed: bool
    norm: float
    sup_estimate: float
    upper_bound: float
    t: tuple

    def as_dict(self) -> dict:
        return {"passed": self.passed, "norm": self.norm, "sup_estimate": self.sup_estimate,
                "upper_bound": self.upper_bound, "t": list(self.t)}


def family_values(fam: CommutingFamily, t: Sequence[float]) -> list:
    return [evaluate(g, ti) for g, ti in zip(fam.generators, t)]


def regular_polynomial_bound_check(fam: CommutingFamily, t: Sequence[float], p: LaurentPolynomial,
                                   tol: float = 1e-9, sup: TorusSup = None) -> BoundCheck:
    """``|p(T_1(t_1), ..., T_d(t_d))| <= sup_{T^d} |p|`` using the certified upper bound."""
    sup = torus_sup(p) if sup is None else sup
    norm = operator_norm(regular_poly_eval(p, family_values(fam, t)))
    return BoundCheck(norm <= sup.upper_bound + tol, norm, sup.sup_estimate, sup.upper_bound, tuple(map(float, t)))


def default_t_grid(d: int, low: int = -10, high: int = 4, max_points: int = 10_000) -> list:
    """``{0, 2^low, ..., 2^high}^d``, thinned to at most ``max_points`` points."""
    axis = [0.0] + [2.0**k for k in range(low, high + 1)]
    while len(axis) ** d > max_points:
        axis = axis[:1] + axis[1::2]
    return [tuple(t) for t in itertools.product(axis, repeat=d)]


def uniform_t_grid(d: int, low: int = -10, high: int = 4) -> list:
    return [(0.0,) * d] + [(2.0**k,) * d for k in range(low, high + 1)]


@dataclass
class ScanReport:
    verdicts: Dict[tuple, PsdVerdict] = field(default_factory=dict)   # key: (K, t)

    @property
    def passed(self) -> bool:
        return all(v.is_psd for v in self.verdicts.values())

    @property
    def worst(self) -> tuple:
        return min(self.verdicts.items(), key=lambda kv: kv[1].min_eigenvalue / max(1.0, kv[1].scale))

    def failing(self) -> list:
        return [key for key, v in self.verdicts.items() if not v.is_psd]


def pK_positivity_scan(fam: CommutingFamily, t_grid: Sequence[Sequence[float]] = None,
                       tol: float = DEFAULTS.psd_tol, subsets=None) -> ScanReport:
    """PSD verdict of ``p_K(T_1(t_1), ..., T_d(t_d))`` for every ``K`` and grid point."""
    t_grid = default_t_grid(fam.d) if t_grid is None else [tuple(map(float, t)) for t in t_grid]
    subsets = [K for K in all_subsets(fam.d) if K] if subsets is None else [tuple(sorted(K)) for K in subsets]
    cache: Dict[tuple, np.ndarray] = {}

    def T(i, s):
        key = (i, s)
        if key not in cache:
            cache[key] = evaluate(fam.generators[i], s)
        return cache[key]

    report = ScanReport()
    for t in t_grid:
        ops = [T(i, s) for i, s in enumerate(t)]
        for K in subsets:
            report.verdicts[(K, t)] = is_positive_semidefinite(p_K_operator(ops, K), tol)
    return report


# -- transfer to approximants ---------------------------------------------------

@dataclass
class TransferReport:
    positivity_applicable: bool
    source_psd: bool
    approximant_psd: bool
    worst_approximant_eig: float
    mc_rows: list = field(default_factory=list)   # {"t", "deviation", "mc_error"}

    @property
    def transfer_holds(self) -> bool:
        return not (self.positivity_applicable and self.source_psd) or self.approximant_psd

    def mc_passed(self, sigmas: float = DEFAULTS.mc_sigmas) -> bool:
        return all(r["deviation"] <= sigmas * r["mc_error"] + 1e-12 for r in self.mc_rows)

    @property
    def passed(self) -> bool:
        return self.transfer_holds and self.mc_passed()


def _batched_regular_eval(p: LaurentPolynomial, stacks: Sequence[np.ndarray]) -> np.ndarray:
    """Regular evaluation on stacks ``(n, dim, dim)`` for a degree-<=1 polynomial."""
    n, dim = stacks[0].shape[0], stacks[0].shape[1]
    eye = np.broadcast_to(np.eye(dim, dtype=complex), (n, dim, dim))
    out = np.zeros((n, dim, dim), dtype=complex)
    for expo, c in p.terms.items():
        neg, pos = eye, eye
        for i, k in enumerate(expo):
            if k < 0:
                neg = neg @ stacks[i]
            elif k > 0:
                pos = pos @ stacks[i]
        out += c * np.conj(np.swapaxes(neg, 1, 2)) @ pos
    return out


def transfer_check(fam: CommutingFamily, kinds: Sequence, p: LaurentPolynomial, t_grid: Sequence[Sequence[float]],
                   n: int = 100_000, tol: float = 1e-8, seed: int = 0, mc_grid: Sequence[Sequence[float]] = None,
                   chunk: int = 20_000) -> TransferReport:
    """Positivity transfer and the expectation identity for ``p`` of degree <= 1.

    (i) when ``p`` is self-adjoint and ``p(T(t))`` is PSD on ``t_grid``, the
    approximant evaluation must be PSD there too; (ii) on ``mc_grid`` (default
    ``t_grid``) ``p(T^(lam)(t))`` is compared with the Monte Carlo mean of
    ``p(T_1(theta_1), ..., T_d(theta_d))`` with independent per-member draws.
    """
    if p.absolute_degree > 1:
        raise ValueError(f"transfer identity needs absolute degree <= 1, got {p.absolute_degree}")
    if p.d != fam.d:
        raise ValueError("polynomial and family disagree on d")
    for g in fam.generators:
        if not is_dissipative(g):
            raise ValueError("transfer_check needs a dissipative family")
    approx = approximant_family(fam, kinds)
    applicable = p.is_self_adjoint()
    source_psd, approx_psd, worst = True, True, np.inf
    if applicable:
        for t in t_grid:
            src = is_positive_semidefinite(regular_poly_eval(p, family_values(fam, t)), tol)
            dst = is_positive_semidefinite(regular_poly_eval(p, family_values(approx, t)), tol)
            source_psd &= src.is_psd
            approx_psd &= dst.is_psd
            worst = min(worst, dst.min_eigenvalue)
    rows = []
    for t in (t_grid if mc_grid is None else mc_grid):
        t = tuple(map(float, t))
        lhs = regular_poly_eval(p, family_values(approx, t))
        draws = [sample(k.law(), ti, n, seed=seed + 7919 * i).values for i, (k, ti) in enumerate(zip(kinds, t))]
        total = np.zeros((fam.dim, fam.dim), dtype=complex)
        second = np.zeros((fam.dim, fam.dim))
        for start in range(0, n, chunk):
            sl = slice(start, start + chunk)
            stacks = [matrix_exponential_batch(g.A, th[sl]) for g, th in zip(fam.generators, draws)]
            vals = _batched_regular_eval(p, stacks)
            total += vals.sum(axis=0)
            second += (np.abs(vals) ** 2).sum(axis=0)
        mean = total / n
        var = np.maximum(second / n - np.abs(mean) ** 2, 0.0) * n / max(n - 1, 1)
        err = float(np.sqrt(np.sum(var / n)))
        rows.append({"t": list(t), "deviation": operator_norm(lhs - mean), "mc_error": err})
    return TransferReport(applicable, bool(source_psd), bool(approx_psd), float(worst), rows)
