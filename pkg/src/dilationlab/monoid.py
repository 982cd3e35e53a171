"""Groups with positivity structures, e-joint witnesses and the CCR model.

Elements are flat coordinate vectors tagged with their group:

* ``Euclidean(d)``: ``R^d`` with ``M = R_{>=0}^d``.
* ``Heisenberg(d)``: ``(x, p, E)`` with
  ``(x,p,E)(x',p',E') = (x+x', p+p', E+E' + (<p,x'> - <p',x>)/2)`` and
  ``M = {x, p >= 0}`` (``E`` free).
* ``CorrelatedHeisenberg(C)``: ``(x, E)`` with
  ``(x,E)(x',E') = (x+x', E+E' + <Cx,x'>)`` and ``M = {x >= 0}``.
* ``Product(factors)``: coordinatewise.

Positive parts take ``x -> x+`` componentwise on the vector coordinates.  The
central coordinate needs a correction: with ``E -> E+`` alone the identity
``(g^-)^{-1} g^+ = g`` fails as soon as ``x`` and ``p`` have mixed signs, so
the map used here is ``E -> E+ + c(g)+`` where ``c(-g) = -c(g)`` absorbs the
cocycle (``c = (<p-,x+> - <p+,x->)/2`` resp. ``c = <Cx-, x+>``).  The literal
``E -> E+`` map is available through :func:`literal_structure` for comparison.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import operator_norm

MEMBERSHIP_TOL = 1e-12


def _pos(v):
    return np.maximum(v, 0.0)


def _neg(v):
    return np.maximum(-v, 0.0)


class Group:
    """Base class: subclasses define ``size`` and the group law on arrays."""

    name = "group"
    size: int

    def identity(self) -> "GroupElement":
        return GroupElement(self, np.zeros(self.size))

    def element(self, coords) -> "GroupElement":
        coords = np.asarray(coords, dtype=float).reshape(-1)
        if coords.size != self.size:
            raise ValueError(f"{self.name} elements have {self.size} coordinates, got {coords.size}")
        return GroupElement(self, coords)

    def random(self, rng: np.random.Generator, scale: float = 2.0) -> "GroupElement":
        return GroupElement(self, rng.uniform(-scale, scale, self.size))

    # array-level operations, overridden below
    def _mul(self, a, b):
        raise NotImplementedError

    def _inv(self, a):
        return -a

    def _pos(self, a):
        raise NotImplementedError

    def _pos_literal(self, a):
        return self._pos(a)

    def _member(self, a) -> bool:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"group": self.name}


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: Group
    coords: np.ndarray

    def __mul__(self, other):
        return group_mul(self, other)

    def inverse(self):
        return inverse(self)

    def allclose(self, other, tol: float = 1e-12) -> bool:
        return self.group == other.group and bool(np.all(np.abs(self.coords - other.coords) <= tol))

    def __repr__(self):
        return f"{self.group.name}{tuple(np.round(self.coords, 12))}"


class Euclidean(Group):
    name = "euclidean"

    def __init__(self, d: int):
        self.d = self.size = int(d)

    def __eq__(self, other):
        return isinstance(other, Euclidean) and other.d == self.d

    __hash__ = object.__hash__

    def _mul(self, a, b):
        return a + b

    def _pos(self, a):
        return _pos(a)

    def _member(self, a):
        return bool(np.all(a >= -MEMBERSHIP_TOL))

    def describe(self):
        return {"group": self.name, "d": self.d}


class Heisenberg(Group):
    name = "heisenberg"

    def __init__(self, d: int):
        self.d = int(d)
        self.size = 2 * self.d + 1

    def __eq__(self, other):
        return isinstance(other, Heisenberg) and other.d == self.d

    __hash__ = object.__hash__

    def split(self, a):
        d = self.d
        return a[:d], a[d:2 * d], a[2 * d]

    def _mul(self, a, b):
        x, p, E = self.split(a)
        y, q, F = self.split(b)
        return np.concatenate([x + y, p + q, [E + F + 0.5 * (p @ y - q @ x)]])

    def cocycle(self, a) -> float:
        x, p, _ = self.split(a)
        return 0.5 * (_neg(p) @ _pos(x) - _pos(p) @ _neg(x))

    def _pos(self, a):
        x, p, E = self.split(a)
        return np.concatenate([_pos(x), _pos(p), [max(E, 0.0) + max(self.cocycle(a), 0.0)]])

    def _pos_literal(self, a):
        x, p, E = self.split(a)
        return np.concatenate([_pos(x), _pos(p), [max(E, 0.0)]])

    def _member(self, a):
        x, p, _ = self.split(a)
        return bool(np.all(x >= -MEMBERSHIP_TOL) and np.all(p >= -MEMBERSHIP_TOL))

    def describe(self):
        return {"group": self.name, "d": self.d}


class CorrelatedHeisenberg(Group):
    """``H_{d,C}`` in ``(x, E)`` coordinates; ``C = D - D^T`` with ``D`` strictly upper."""

    name = "heisenberg-c"

    def __init__(self, C=None, D=None):
        if D is not None:
            D = np.asarray(D, dtype=float)
            if np.any(np.tril(D) != 0):
                raise ValueError("D must be strictly upper triangular")
            C = D - D.T
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C must be square")
        if np.any(C != -C.T):
            raise ValueError("C must be antisymmetric")
        self.C = C
        self.D = np.triu(C, 1)
        self.d = C.shape[0]
        self.size = self.d + 1

    @classmethod
    def with_random_correlation(cls, d: int, rng: np.random.Generator) -> "CorrelatedHeisenberg":
        return cls(D=np.triu(rng.standard_normal((d, d)), 1))

    def __eq__(self, other):
        return isinstance(other, CorrelatedHeisenberg) and np.array_equal(other.C, self.C)

    __hash__ = object.__hash__

    def _mul(self, a, b):
        x, E = a[:-1], a[-1]
        y, F = b[:-1], b[-1]
        return np.concatenate([x + y, [E + F + (self.C @ x) @ y]])

    def cocycle(self, a) -> float:
        x = a[:-1]
        return float((self.C @ _neg(x)) @ _pos(x))

    def _pos(self, a):
        return np.concatenate([_pos(a[:-1]), [max(a[-1], 0.0) + max(self.cocycle(a), 0.0)]])

    def _pos_literal(self, a):
        return np.concatenate([_pos(a[:-1]), [max(a[-1], 0.0)]])

    def _member(self, a):
        return bool(np.all(a[:-1] >= -MEMBERSHIP_TOL))

    def describe(self):
        return {"group": self.name, "C": self.C.tolist()}


class Product(Group):
    name = "product"

    def __init__(self, factors: Sequence[Group]):
        self.factors = tuple(factors)
        self.sizes = [f.size for f in self.factors]
        self.size = sum(self.sizes)
        self._cuts = np.cumsum([0] + self.sizes)

    def __eq__(self, other):
        return isinstance(other, Product) and other.factors == self.factors

    __hash__ = object.__hash__

    def parts(self, a):
        return [a[lo:hi] for lo, hi in zip(self._cuts[:-1], self._cuts[1:])]

    def _apply(self, method, *arrays):
        pieces = zip(*(self.parts(a) for a in arrays))
        return np.concatenate([getattr(f, method)(*ps) for f, ps in zip(self.factors, pieces)])

    def _mul(self, a, b):
        return self._apply("_mul", a, b)

    def _inv(self, a):
        return self._apply("_inv", a)

    def _pos(self, a):
        return self._apply("_pos", a)

    def _pos_literal(self, a):
        return self._apply("_pos_literal", a)

    def _member(self, a):
        return all(f._member(x) for f, x in zip(self.factors, self.parts(a)))

    def describe(self):
        return {"group": self.name, "factors": [f.describe() for f in self.factors]}


def _check_same(a: GroupElement, b: GroupElement):
    if a.group != b.group:
        raise TypeError(f"cannot combine {a.group.name} and {b.group.name} elements")


def group_mul(a: GroupElement, b: GroupElement) -> GroupElement:
    _check_same(a, b)
    return GroupElement(a.group, a.group._mul(a.coords, b.coords))


def inverse(a: GroupElement) -> GroupElement:
    return GroupElement(a.group, a.group._inv(a.coords))


@dataclass(frozen=True)
class PositivityStructure:
    """A group with a positive-part map into its submonoid.

    ``map`` overrides the default positive part; used for the literal table
    map and for mutation tests.
    """

    group: Group
    map: Optional[Callable] = field(default=None, compare=False)
    label: str = "corrected"

    def positive_part(self, g: GroupElement) -> GroupElement:
        if g.group != self.group:
            raise TypeError("element does not belong to this structure's group")
        f = self.map or self.group._pos
        return GroupElement(self.group, np.asarray(f(g.coords), dtype=float))

    def negative_part(self, g: GroupElement) -> GroupElement:
        return self.positive_part(inverse(g))

    def in_monoid(self, g: GroupElement) -> bool:
        return self.group._member(g.coords)


def positive_part(ps: PositivityStructure, g: GroupElement) -> GroupElement:
    return ps.positive_part(g)


def literal_structure(group: Group) -> PositivityStructure:
    """Positive part applied coordinatewise with no cocycle correction."""
    return PositivityStructure(group, group._pos_literal, label="literal")


def mutated_structure(group: Group, kind: str = "identity") -> PositivityStructure:
    """Deliberately broken maps: ``identity`` (``x+ := x``) or ``abs``."""
    maps = {"identity": lambda a: a.copy(), "abs": np.abs}
    return PositivityStructure(group, maps[kind], label=f"mutated-{kind}")


@dataclass
class AxiomReport:
    samples: int
    failures: dict          # axiom name -> count
    worst: dict             # axiom name -> largest coordinate deviation
    examples: dict          # axiom name -> first failing element coordinates

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())

    def as_dict(self) -> dict:
        return {"samples": self.samples, "passed": self.passed, "failures": self.failures,
                "worst": self.worst, "examples": self.examples}


AXIOMS = ("identity", "idempotent", "representation", "plus_minus_trivial", "membership")


def axioms_check(ps: PositivityStructure, samples: int = 1000, seed: int = 0, tol: float = 1e-12,
                 scale: float = 2.0) -> AxiomReport:
    """Check ``e+ = e``, ``x++ = x+``, ``(x-)^{-1} x+ = x``, ``x+- = e`` and ``x+ in M``.

    Samples mix uniform coordinates with sign patterns that put zeros and
    mixed signs in every block.
    """
    rng = np.random.default_rng(seed)
    G = ps.group
    failures = {a: 0 for a in AXIOMS}
    worst = {a: 0.0 for a in AXIOMS}
    examples = {}

    def record(name, dev, g):
        worst[name] = max(worst[name], float(dev))
        if dev > tol:
            failures[name] += 1
            examples.setdefault(name, g.coords.tolist())

    e = G.identity()
    record("identity", np.max(np.abs(ps.positive_part(e).coords)) if G.size else 0.0, e)
    for k in range(samples):
        coords = rng.uniform(-scale, scale, G.size)
        if k % 4 == 1:
            coords = np.round(coords)          # exact zeros and integer ties
        g = GroupElement(G, coords)
        gp = ps.positive_part(g)
        gm = ps.negative_part(g)
        record("idempotent", np.max(np.abs(ps.positive_part(gp).coords - gp.coords)), g)
        rebuilt = group_mul(inverse(gm), gp)
        record("representation", np.max(np.abs(rebuilt.coords - g.coords)), g)
        record("plus_minus_trivial", np.max(np.abs(ps.negative_part(gp).coords)), g)
        record("membership", 0.0 if ps.in_monoid(gp) else 1.0, g)
    return AxiomReport(samples, failures, worst, examples)


def e_joint_witness(variant: str, epsilon: float, d: int = 1) -> tuple:
    """Open box inside ``U cap M`` for ``U = (-eps, eps)^n`` and its Lebesgue measure."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eps = float(epsilon)
    if variant == "euclidean":
        box = [(0.0, eps)] * d
    elif variant == "heisenberg":
        box = [(0.0, eps)] * (2 * d) + [(-eps, eps)]
    elif variant == "heisenberg-c":
        box = [(0.0, eps)] * d + [(-eps, eps)]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    measure = float(np.prod([hi - lo for lo, hi in box]))
    return box, measure


# -- weighted shifts satisfying the Weyl relations ---------------------------------

@dataclass(frozen=True, eq=False)
class CcrFamily:
    """Unit-step weighted shifts on ``C^{N^m}`` (grid ``{0..N-1}^m``, zero padding).

    ``(S_i f)(x) = exp(lam <alpha_i, x>) f(x + u_i)``; ``T_i(k) = S_i^k``.
    """

    m: int
    N: int
    shifts: np.ndarray      # (d, m) non-negative integers
    weights: np.ndarray     # (d, m)
    lam: complex
    steps: tuple = field(repr=False)   # unit-step matrices S_i

    @property
    def d(self) -> int:
        return self.shifts.shape[0]

    @property
    def dim(self) -> int:
        return self.N**self.m

    @property
    def C(self) -> np.ndarray:
        a, u = self.weights, self.shifts
        return 0.5 * (a @ u.T - (a @ u.T).T)

    @property
    def D(self) -> np.ndarray:
        return np.triu(self.C, 1)

    def T(self, i: int, k: int) -> np.ndarray:
        if int(k) != k or k < 0:
            raise ValueError("the grid model only offers non-negative integer times")
        return np.linalg.matrix_power(self.steps[i], int(k))

    def U(self, E: float) -> np.ndarray:
        return np.exp(self.lam * E) * np.eye(self.dim, dtype=complex)

    def group(self) -> CorrelatedHeisenberg:
        return CorrelatedHeisenberg(D=self.D)


def build_ccr_family(m: int, N: int, shifts, weights, lam: complex) -> CcrFamily:
    shifts = np.atleast_2d(np.asarray(shifts))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    if shifts.shape != weights.shape or shifts.shape[1] != m:
        raise ValueError("shifts and weights must both have shape (d, m)")
    if not np.all(np.equal(np.mod(shifts, 1), 0)) or np.any(shifts < 0):
        raise ValueError("shift vectors must be non-negative integer grid steps")
    shifts = shifts.astype(int)
    lam = complex(lam)
    if lam.real > 0:
        raise ValueError("need Re lambda <= 0")
    if lam.real < 0 and np.any(weights < 0):
        raise ValueError("with Re lambda < 0 the weights must be non-negative")
    points = np.array(np.unravel_index(np.arange(N**m), (N,) * m)).T     # (N^m, m)
    steps = []
    for u, a in zip(shifts, weights):
        S = np.zeros((N**m, N**m), dtype=complex)
        target = points + u
        inside = np.all(target < N, axis=1)
        rows = np.flatnonzero(inside)
        cols = np.ravel_multi_index(target[inside].T, (N,) * m)
        S[rows, cols] = np.exp(lam * (points[inside] @ a))
        steps.append(S)
    return CcrFamily(m, N, shifts, weights, lam, tuple(steps))


def ccr_relation_check(fam: CcrFamily, s: int, t: int, i: int, j: int) -> float:
    """``|T_j(t) T_i(s) - exp(2 s t lam C_ij) T_i(s) T_j(t)|``."""
    lhs = fam.T(j, t) @ fam.T(i, s)
    rhs = np.exp(2 * s * t * fam.lam * fam.C[i, j]) * fam.T(i, s) @ fam.T(j, t)
    return operator_norm(lhs - rhs)


def heisenberg_representation(fam: CcrFamily, g: GroupElement) -> np.ndarray:
    """``T(x, E) = U(E + <Dx, x>) T_1(x_1) ... T_d(x_d)`` for grid-aligned ``x >= 0``."""
    x, E = g.coords[:-1], g.coords[-1]
    if np.any(x < 0) or not np.all(np.equal(np.mod(x, 1), 0)):
        raise ValueError("x must be a non-negative integer vector")
    out = fam.U(E + (fam.D @ x) @ x)
    for i, xi in enumerate(x):
        out = out @ fam.T(i, int(xi))
    return out


def heisenberg_homomorphism(fam: CcrFamily, g1: GroupElement, g2: GroupElement) -> float:
    """``|T(g1) T(g2) - T(g1 g2)|`` on ``H+_{d,C}``."""
    G = fam.group()
    if g1.group != G or g2.group != G:
        raise TypeError("elements must live in the family's correlated Heisenberg group")
    lhs = heisenberg_representation(fam, g1) @ heisenberg_representation(fam, g2)
    return operator_norm(lhs - heisenberg_representation(fam, group_mul(g1, g2)))


def random_ccr_family(rng: np.random.Generator, m: int = 2, N: int = 6, d: int = 2, max_shift: int = 2) -> CcrFamily:
    shifts = rng.integers(0, max_shift + 1, (d, m))
    shifts[shifts.sum(axis=1) == 0, 0] = 1
    weights = rng.uniform(0.0, 1.0, (d, m))
    lam = complex(-rng.uniform(0.05, 0.5), rng.uniform(-1.0, 1.0))
    return build_ccr_family(m, N, shifts, weights, lam)
