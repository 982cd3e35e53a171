"""Discrete functional calculus with a Gram-kernel positivity test, and the
Phillips-le Merdy calculus by tensor midpoint quadrature.

A *representation* is any callable ``T(g) -> matrix`` defined on the
submonoid of a positivity structure, e.g. ``x -> prod_i T_i(x_i)`` for a
commuting family on ``R^d``.  The discrete calculus of a finitely supported
``f`` is ``sum_x f(x) T(x^-)* T(x^+)``.
"""
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence

import numpy as np

from .config import DEFAULTS
from .linalg import (
    PsdVerdict,
    hermitian_adjoint,
    is_positive_semidefinite,
    matrix_exponential_batch,
    operator_norm,
    resolvent,
)
from .monoid import Euclidean, GroupElement, PositivityStructure, group_mul, inverse
from .semigroup import CommutingFamily, family_product


class QuadratureBudgetError(ValueError):
    pass


def family_representation(fam: CommutingFamily) -> Callable:
    """``x -> T_1(x_1) ... T_d(x_d)`` on ``R_{>=0}^d`` (rounding noise clipped)."""
    def T(g: GroupElement) -> np.ndarray:
        x = np.asarray(g.coords, dtype=float)
        if np.any(x < -1e-12):
            raise ValueError(f"representation evaluated outside the monoid: {x}")
        return family_product(fam, np.maximum(x, 0.0))
    T.dim = fam.dim
    return T


class FinitelySupportedFunction:
    """``f`` in ``c00(G)``: support points with complex coefficients.

    Points are keyed by their exact coordinate tuples; duplicates merge and
    zero coefficients are dropped.
    """

    def __init__(self, group, items=()):
        self.group = group
        self.coeffs: Dict[tuple, complex] = {}
        for g, c in items:
            if isinstance(g, GroupElement):
                if g.group != group:
                    raise TypeError("support point from a different group")
                key = tuple(map(float, g.coords))
            else:
                key = tuple(map(float, g))
            self.coeffs[key] = self.coeffs.get(key, 0) + complex(c)
        self.coeffs = {k: c for k, c in self.coeffs.items() if c != 0}

    @classmethod
    def delta(cls, g: GroupElement, c=1.0) -> "FinitelySupportedFunction":
        return cls(g.group, [(g, c)])

    def items(self):
        for key, c in self.coeffs.items():
            yield GroupElement(self.group, np.array(key)), c

    def __len__(self):
        return len(self.coeffs)

    def __add__(self, other):
        return FinitelySupportedFunction(self.group, list(self.items()) + list(other.items()))

    def __mul__(self, scalar):
        return FinitelySupportedFunction(self.group, [(g, scalar * c) for g, c in self.items()])

    __rmul__ = __mul__

    def involution(self) -> "FinitelySupportedFunction":
        """``f*(x) = conj(f(x^{-1}))`` (unimodular groups only)."""
        return FinitelySupportedFunction(self.group, [(inverse(g), np.conj(c)) for g, c in self.items()])

    def allclose(self, other, tol: float = 1e-12) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeffs.get(k, 0) - other.coeffs.get(k, 0)) <= tol for k in keys)


def convolution(f: FinitelySupportedFunction, g: FinitelySupportedFunction) -> FinitelySupportedFunction:
    """``(f * g)(x) = sum_y f(y) g(y^{-1} x)``, i.e. ``delta_y * delta_z = delta_{yz}``."""
    if f.group != g.group:
        raise TypeError("convolution of functions on different groups")
    return FinitelySupportedFunction(f.group, [(group_mul(y, z), a * b) for (y, a), (z, b)
                                               in itertools.product(f.items(), g.items())])


def regular_value(T: Callable, ps: PositivityStructure, g: GroupElement) -> np.ndarray:
    """``T(g^-)* T(g^+)``."""
    return hermitian_adjoint(T(ps.negative_part(g))) @ T(ps.positive_part(g))


def discrete_calculus_eval(T: Callable, ps: PositivityStructure, f: FinitelySupportedFunction) -> np.ndarray:
    dim = T.dim if hasattr(T, "dim") else T(ps.group.identity()).shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for g, c in f.items():
        out += c * regular_value(T, ps, g)
    return out


def multiplicativity_check(T: Callable, ps: PositivityStructure, f: FinitelySupportedFunction,
                           g: FinitelySupportedFunction) -> float:
    """``|Phi(f * g) - Phi(f) Phi(g)|``; zero for unitary-valued ``T``, reported otherwise."""
    lhs = discrete_calculus_eval(T, ps, convolution(f, g))
    return operator_norm(lhs - discrete_calculus_eval(T, ps, f) @ discrete_calculus_eval(T, ps, g))


@dataclass
class GramVerdict:
    verdict: PsdVerdict
    points: list
    eigvec: np.ndarray = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.verdict.is_psd

    def as_dict(self) -> dict:
        return {**self.verdict.as_dict(), "points": [list(map(float, p)) for p in self.points]}


def gram_matrix(T: Callable, ps: PositivityStructure, points: Sequence[GroupElement]) -> np.ndarray:
    """Block matrix ``[T((x_i^{-1} x_j)^-)* T((x_i^{-1} x_j)^+)]_{ij}``."""
    n = len(points)
    blocks = [[None] * n for _ in range(n)]
    for i in range(n):
        blocks[i][i] = regular_value(T, ps, group_mul(inverse(points[i]), points[i]))
        for j in range(i + 1, n):
            B = regular_value(T, ps, group_mul(inverse(points[i]), points[j]))
            blocks[i][j] = B
            blocks[j][i] = hermitian_adjoint(B)
    return np.block(blocks)


def gram_kernel_test(T: Callable, ps: PositivityStructure, points: Sequence[GroupElement],
                     tol: float = DEFAULTS.psd_tol) -> GramVerdict:
    """PSD verdict of the Gram block matrix; a FAIL rules out a regular unitary dilation.

    The lower triangle is filled by adjoints of the upper triangle, which is
    exact when ``(x^{-1})^+ = x^-``; that holds by definition of ``x^-``.
    """
    keys = [tuple(p.coords) for p in points]
    if len(set(keys)) != len(keys):
        raise ValueError("Gram points must be distinct")
    G = gram_matrix(T, ps, points)
    verdict = is_positive_semidefinite(G, tol)
    H = (G + hermitian_adjoint(G)) / 2
    w, V = np.linalg.eigh(H)
    return GramVerdict(verdict, [p.coords.copy() for p in points], V[:, 0])


def lattice_points(group: Euclidean, h: float, levels: int = 2) -> list:
    """``{0, h, ..., (levels-1) h}^d``."""
    axis = [k * h for k in range(levels)]
    return [group.element(x) for x in itertools.product(axis, repeat=group.d)]


def default_gram_schedule(d: int, exponents=range(0, 9), levels: int = 2, random_clouds: int = 2,
                          cloud_size: int = 4, seed: int = 0, max_points: int = 32) -> list:
    """Point sets: lattices ``{0, h, ...}^d`` with ``h = 2^-k`` plus small random clouds near 0."""
    G = Euclidean(d)
    sets = []
    for k in exponents:
        lv = levels
        while lv**d > max_points and lv > 2:
            lv -= 1
        sets.append(lattice_points(G, 2.0**-k, lv))
    rng = np.random.default_rng(seed)
    for _ in range(random_clouds):
        pts = {tuple(np.zeros(d))}
        while len(pts) < cloud_size:
            pts.add(tuple(np.round(rng.uniform(0, 0.5, d), 6)))
        sets.append([G.element(p) for p in sorted(pts)])
    return sets


def gram_scan(fam: CommutingFamily, schedule=None, tol: float = DEFAULTS.psd_tol) -> list:
    """Gram verdicts over a point-set schedule for a family on ``R^d``."""
    schedule = default_gram_schedule(fam.d) if schedule is None else schedule
    ps = PositivityStructure(Euclidean(fam.d))
    T = family_representation(fam)
    return [gram_kernel_test(T, ps, pts, tol) for pts in schedule]


# -- Phillips-le Merdy calculus -------------------------------------------------

@dataclass(frozen=True)
class CompactlySupportedDensity:
    """Density on a box inside ``R_{>=0}^d``; ``density`` maps ``(n, d)`` points to ``(n,)``."""

    box: tuple                      # ((a_1, b_1), ..., (a_d, b_d))
    density: Callable
    resolution: int = 256

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        if any(a < 0 or b <= a for a, b in box):
            raise ValueError("the box must be a non-degenerate product of intervals in [0, inf)")
        object.__setattr__(self, "box", box)

    @property
    def d(self) -> int:
        return len(self.box)

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.box]))

    @classmethod
    def exponential(cls, rates: Sequence[float], cutoff: float, resolution: int = None):
        """``prod_i lam_i exp(-lam_i x_i)`` truncated to ``[0, cutoff]^d``."""
        rates = np.asarray(rates, dtype=float)
        if resolution is None:
            resolution = 2048 if rates.size == 1 else 512

        def f(x):
            return np.prod(rates * np.exp(-x * rates), axis=-1)
        return cls(tuple((0.0, cutoff) for _ in rates), f, resolution)

    @classmethod
    def normalised_indicator(cls, box, resolution: int = 64):
        vol = float(np.prod([b - a for a, b in box]))
        return cls(box, lambda x: np.full(x.shape[0], 1.0 / vol), resolution)

    @classmethod
    def zero(cls, d: int):
        return cls(((0.0, 1.0),) * d, lambda x: np.zeros(x.shape[0]), 8)


def _midpoint_rule(fam: CommutingFamily, f: CompactlySupportedDensity, n: int) -> np.ndarray:
    d, dim = fam.d, fam.dim
    axes, widths, stacks = [], [], []
    for (a, b), g in zip(f.box, fam.generators):
        h = (b - a) / n
        x = a + h * (np.arange(n) + 0.5)
        axes.append(x)
        widths.append(h)
        stacks.append(matrix_exponential_batch(g.A, x))
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    W = (f.density(grid) * np.prod(widths)).reshape((n,) * d)
    # contract the last axis first, then walk left: sum_x W(x) T_1(x_1) ... T_d(x_d)
    R = np.tensordot(W, stacks[-1], axes=([d - 1], [0]))
    for i in range(d - 2, -1, -1):
        R = np.einsum("aij,...ajk->...ik", stacks[i], R)
    return R.reshape(dim, dim)


def phillips_lemerdy_eval(fam: CommutingFamily, c: complex, f: CompactlySupportedDensity,
                          max_nodes: int = 20_000_000) -> tuple:
    """``(c I + int f(x) T(x) dx, error_estimate)``.

    Midpoint rule at ``n`` and ``2n`` nodes per axis; the returned value is
    the Richardson combination ``(4 Q_2n - Q_n)/3`` and the error estimate is
    ``|Q_2n - Q_n| / 3`` (the estimated error of ``Q_2n``).
    """
    if f.d != fam.d:
        raise ValueError("density and family dimensions differ")
    n = f.resolution
    if (2 * n) ** fam.d * fam.dim**2 > max_nodes:
        raise QuadratureBudgetError(f"{2 * n}^{fam.d} nodes exceed the quadrature budget")
    coarse = _midpoint_rule(fam, f, n)
    fine = _midpoint_rule(fam, f, 2 * n)
    value = c * np.eye(fam.dim) + (4 * fine - coarse) / 3
    return value, operator_norm(fine - coarse) / 3


def resolvent_product_oracle(fam: CommutingFamily, rates: Sequence[float], cutoff: float) -> tuple:
    """``(prod_i lam_i R(lam_i, A_i), tail_bound)`` for the truncated exponential density.

    For contractive ``T_i`` the mass beyond the cutoff is at most
    ``1 - prod_i (1 - exp(-lam_i cutoff))``.
    """
    out = np.eye(fam.dim, dtype=complex)
    for g, lam in zip(fam.generators, rates):
        out = out @ (lam * resolvent(g.A, lam))
    tail = -np.expm1(np.sum([np.log1p(-np.exp(-lam * cutoff)) for lam in rates]))
    return out, float(tail)


def approximate_unit_check(fam: CommutingFamily, ks: Sequence[int] = range(9), probes=None,
                           resolution: int = 32) -> list:
    """``e_k = max_xi |Phi(f_k) xi - xi|`` with ``f_k`` uniform on ``[0, 2^-k]^d``."""
    P = np.eye(fam.dim, dtype=complex) if probes is None else np.asarray(probes, dtype=complex).reshape(fam.dim, -1)
    errors = []
    for k in ks:
        f = CompactlySupportedDensity.normalised_indicator(((0.0, 2.0**-k),) * fam.d, resolution)
        value, _ = phillips_lemerdy_eval(fam, 0.0, f)
        errors.append(float(np.max(np.linalg.norm((value - np.eye(fam.dim)) @ P, axis=0))))
    return errors
