"""Semigroups with bounded generators and commuting families of them."""
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULTS
from .linalg import (
    PsdVerdict,
    as_matrix,
    hermitian_adjoint,
    is_positive_semidefinite,
    matrix_exponential,
    operator_norm,
)


class NonCommutingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundedGenerator:
    """Generator ``A`` of the semigroup ``T(t) = exp(tA)``."""

    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A))
        self.A.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return evaluate(self, t)


def _as_generator(g) -> BoundedGenerator:
    return g if isinstance(g, BoundedGenerator) else BoundedGenerator(g)


@dataclass(frozen=True, eq=False)
class CommutingFamily:
    """``d`` bounded generators on one space with a commutator certificate.

    Construction rejects families whose largest pairwise commutator exceeds
    ``commutator_tol * max|A_i|^2`` unless ``allow_noncommuting`` is set.
    """

    generators: tuple
    commutator_tol: float = DEFAULTS.commutator_tol
    allow_noncommuting: bool = False
    commutator_bound: float = field(init=False)

    def __post_init__(self):
        gens = tuple(_as_generator(g) for g in self.generators)
        if not gens:
            raise ValueError("a family needs at least one generator")
        dims = {g.dim for g in gens}
        if len(dims) != 1:
            raise ValueError(f"generators live on different dimensions: {sorted(dims)}")
        object.__setattr__(self, "generators", gens)
        bound = 0.0
        for a, b in itertools.combinations(gens, 2):
            bound = max(bound, operator_norm(a.A @ b.A - b.A @ a.A))
        object.__setattr__(self, "commutator_bound", bound)
        scale = max(operator_norm(g.A) for g in gens) ** 2
        if bound > self.commutator_tol * max(scale, 1.0) and not self.allow_noncommuting:
            raise NonCommutingError(
                f"commutator bound {bound:.3g} exceeds {self.commutator_tol:g} * {scale:.3g}"
            )

    @classmethod
    def from_matrices(cls, matrices: Sequence, **kw) -> "CommutingFamily":
        return cls(tuple(BoundedGenerator(m) for m in matrices), **kw)

    @property
    def d(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    @property
    def matrices(self) -> list:
        return [g.A for g in self.generators]

    def subfamily(self, indices: Sequence[int]) -> "CommutingFamily":
        return CommutingFamily(
            tuple(self.generators[i] for i in indices),
            commutator_tol=self.commutator_tol,
            allow_noncommuting=self.allow_noncommuting,
        )


def evaluate(g, t: float) -> np.ndarray:
    """``T(t) = exp(tA)`` for ``t >= 0``."""
    if t < 0:
        raise ValueError(f"semigroups are only defined for t >= 0, got {t}")
    return matrix_exponential(_as_generator(g).A, t)


def family_product(fam: CommutingFamily, t: Sequence[float], order=None) -> np.ndarray:
    """``prod_i T_i(t_i)``, multiplied left to right in ``order`` (default 0..d-1)."""
    t = np.asarray(t, dtype=float)
    if t.shape != (fam.d,):
        raise ValueError(f"expected {fam.d} times, got shape {t.shape}")
    order = range(fam.d) if order is None else order
    out = np.eye(fam.dim, dtype=complex)
    for i in order:
        out = out @ evaluate(fam.generators[i], t[i])
    return out


def is_dissipative(g, tol: float = DEFAULTS.psd_tol) -> PsdVerdict:
    """``A`` is dissipative iff ``-(A + A*)/2`` is positive semidefinite."""
    A = _as_generator(g).A
    return is_positive_semidefinite(-(A + hermitian_adjoint(A)) / 2, tol)


def growth_bound(g) -> float:
    """Spectral abscissa ``max Re spec(A)``; equals the growth bound for matrices."""
    return float(np.max(np.linalg.eigvals(_as_generator(g).A).real))


def time_average(g, t: float) -> np.ndarray:
    """``(1/t) int_0^t T(s) ds`` as the series ``sum_k (tA)^k / (k+1)!``.

    For large ``|tA|`` the series is evaluated on ``t / 2^s`` and lifted with
    ``M(2h) = M(h) (I + T(h)) / 2``, which keeps every partial sum well
    conditioned.  Exact for nilpotent ``A``.
    """
    if t <= 0:
        raise ValueError("time_average needs t > 0")
    A = _as_generator(g).A
    dim = A.shape[0]
    norm = operator_norm(t * A)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 1 else 0
    h = t / 2**s
    hA = h * A
    term = np.eye(dim, dtype=complex)
    M = term.copy()
    for k in range(1, 200):
        term = term @ hA / (k + 1)
        M = M + term
        if operator_norm(term) <= 1e-17 * operator_norm(M):
            break
    for _ in range(s):
        M = M @ (np.eye(dim) + matrix_exponential(A, h)) / 2
        h *= 2
    return M


def multi_time_average_check(fam: CommutingFamily, t: Sequence[float], K) -> float:
    """Residual of the product formula for ``(prod_{k in K} A_k) prod_i M_i``.

    ``M_i`` is the time average of ``T_i`` over ``[0, t_i]``.  The right hand
    side replaces ``M_i`` by ``(T_i(t_i) - I)/t_i`` for ``i in K``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("all t_i must be positive")
    K = sorted(set(K))
    dim = fam.dim
    averages = [time_average(g, ti) for g, ti in zip(fam.generators, t)]
    lhs = np.eye(dim, dtype=complex)
    for k in K:
        lhs = lhs @ fam.generators[k].A
    for M in averages:
        lhs = lhs @ M
    rhs = np.eye(dim, dtype=complex)
    for i, (g, ti) in enumerate(zip(fam.generators, t)):
        if i in K:
            rhs = rhs @ ((evaluate(g, ti) - np.eye(dim)) / ti)
        else:
            rhs = rhs @ averages[i]
    return operator_norm(lhs - rhs)
