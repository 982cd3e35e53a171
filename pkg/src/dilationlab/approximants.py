"""Hille and Yosida approximants and their stochastic representations.

Hille: ``A_lam = lam (T(1/lam) - I)``, matched with the scaled Poisson law.
Yosida: ``A_lam = lam A R(lam, A) = lam^2 R(lam, A) - lam I``, matched with
the auxiliary Poisson law.  In both cases ``exp(t A_lam) = E[T(theta_t)]``.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .config import DEFAULTS
from .linalg import hermitian_adjoint, matrix_exponential, matrix_exponential_batch, operator_norm, resolvent
from .semigroup import BoundedGenerator, CommutingFamily, _as_generator, evaluate, growth_bound, is_dissipative
from .stochastic import AuxiliaryPoisson, MCEstimate, ScaledPoisson, mc_average, sample

HILLE = "hille"
YOSIDA = "yosida"


@dataclass(frozen=True)
class ApproximantKind:
    variant: str
    rate: float

    def __post_init__(self):
        if self.variant not in (HILLE, YOSIDA):
            raise ValueError(f"variant must be {HILLE!r} or {YOSIDA!r}")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def law(self, scale: float = 1.0):
        """Distribution semigroup representing this approximant (rate scaled by ``scale``)."""
        cls = ScaledPoisson if self.variant == HILLE else AuxiliaryPoisson
        return cls(self.rate * scale)


def hille_generator(g, lam: float) -> BoundedGenerator:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    A = _as_generator(g).A
    return BoundedGenerator(lam * (matrix_exponential(A, 1.0 / lam) - np.eye(A.shape[0])))


def yosida_generator(g, lam: float, margin: float = DEFAULTS.yosida_margin) -> BoundedGenerator:
    """``lam^2 R(lam, A) - lam I``; requires ``lam > max(0, omega_0) + margin``."""
    A = _as_generator(g).A
    bound = max(0.0, growth_bound(A))
    if not lam > bound + margin:
        raise ValueError(f"Yosida approximant needs lambda > {bound + margin:.6g}, got {lam}")
    R = resolvent(A, lam)
    return BoundedGenerator(lam**2 * R - lam * np.eye(A.shape[0]))


def yosida_forms_gap(g, lam: float) -> float:
    """``|lam A R - (lam^2 R - lam I)|``: the two closed forms must agree."""
    A = _as_generator(g).A
    R = resolvent(A, lam)
    return operator_norm(lam * A @ R - (lam**2 * R - lam * np.eye(A.shape[0])))


def approximant_generator(g, kind: ApproximantKind) -> BoundedGenerator:
    if kind.variant == HILLE:
        return hille_generator(g, kind.rate)
    return yosida_generator(g, kind.rate)


def approximant_evaluate(g, kind: ApproximantKind, t: float) -> np.ndarray:
    return evaluate(approximant_generator(g, kind), t)


def hille_series(g, lam: float, t: float, tail_tol: float = 1e-15) -> np.ndarray:
    """Deterministic ``sum_n P[N = n] T(n/lam)`` with ``N ~ Poisson(lam t)``.

    Truncated once the Poisson tail beyond the current term (times
    ``sup |T|``, which is at most 1 for a contraction) drops below
    ``tail_tol``; past the mode the tail is at most ``p_n (n+1)/(n+1-mu)``.
    """
    A = _as_generator(g).A
    dim = A.shape[0]
    mu = lam * t
    step = matrix_exponential(A, 1.0 / lam)
    sup_T = max(1.0, operator_norm(step))
    power = np.eye(dim, dtype=complex)
    out = np.zeros((dim, dim), dtype=complex)
    n = 0
    while True:
        p = np.exp(n * np.log(mu) - mu - gammaln(n + 1)) if mu > 0 else float(n == 0)
        out += p * power
        if n > mu and p * (n + 1) / (n + 1 - mu) * sup_T**n < tail_tol:
            break
        if mu == 0:
            break
        power = power @ step
        n += 1
    return out


def _mc_semigroup(A, theta) -> MCEstimate:
    return mc_average(theta, lambda u: matrix_exponential_batch(A, u))


def expectation_identity_check(g, kind: ApproximantKind, t: float, n: int, seed: int = 0) -> tuple:
    """``(deviation, mc_error)`` between ``exp(t A_lam)`` and ``E[T(theta)]``.

    The deviation is an operator norm; ``mc_error`` is the Frobenius norm of
    the entrywise standard errors, which dominates it in expectation.
    """
    g = _as_generator(g)
    if not is_dissipative(g):
        raise ValueError("expectation identities are checked for dissipative generators")
    lhs = approximant_evaluate(g, kind, t)
    if t == 0:
        return operator_norm(lhs - np.eye(g.dim)), 0.0
    est = _mc_semigroup(g.A, sample(kind.law(), t, n, seed).values)
    return operator_norm(lhs - est.mean), est.error


def adjoint_identity_check(g, kind: ApproximantKind, t: float, n: int, seed: int = 0) -> tuple:
    """``(deviation, mc_error)`` for ``exp(t A_lam)* = E[T(theta)*]``."""
    g = _as_generator(g)
    if not is_dissipative(g):
        raise ValueError("expectation identities are checked for dissipative generators")
    lhs = hermitian_adjoint(approximant_evaluate(g, kind, t))
    if t == 0:
        return operator_norm(lhs - np.eye(g.dim)), 0.0
    theta = sample(kind.law(), t, n, seed).values
    est = mc_average(theta, lambda u: np.conj(np.swapaxes(matrix_exponential_batch(g.A, u), 1, 2)))
    return operator_norm(lhs - est.mean), est.error


def scaled_time_identity_check(g, kind: ApproximantKind, r: float, t: float, n: int, seed: int = 0) -> tuple:
    """``(deviation, mc_error)`` for ``T_lam(r t) = E[T(r theta)]``.

    ``theta`` is drawn at the re-parameterised rate ``r lam`` (scaled Poisson
    for Hille, auxiliary Poisson for Yosida).
    """
    g = _as_generator(g)
    if not r > 0:
        raise ValueError("r must be positive")
    if not is_dissipative(g):
        raise ValueError("expectation identities are checked for dissipative generators")
    lhs = approximant_evaluate(g, kind, r * t)
    if t == 0:
        return operator_norm(lhs - np.eye(g.dim)), 0.0
    theta = sample(kind.law(scale=r), t, n, seed).values
    est = _mc_semigroup(g.A, r * theta)
    return operator_norm(lhs - est.mean), est.error


def default_lambda_grid(g, count: int = 11) -> list:
    """Geometric ``{1, 2, 4, ...} * max(1, |A|)``."""
    base = max(1.0, operator_norm(_as_generator(g).A))
    return [base * 2.0**k for k in range(count)]


def convergence_profile(g, variant: str, lambda_grid: Sequence[float], t_grid: Sequence[float], probes=None) -> list:
    """Rows ``{"lambda", "sup_error"}`` with the sup over ``t_grid`` and probes.

    ``probes`` are column vectors; the default is the standard basis, in which
    case the error is the largest column norm of the difference.
    """
    g = _as_generator(g)
    if not is_dissipative(g):
        raise ValueError("convergence profiles are defined for dissipative generators")
    P = np.eye(g.dim, dtype=complex) if probes is None else np.asarray(probes, dtype=complex).reshape(g.dim, -1)
    rows = []
    for lam in lambda_grid:
        gen = approximant_generator(g, ApproximantKind(variant, lam))
        worst = 0.0
        for t in t_grid:
            diff = (evaluate(gen, t) - evaluate(g, t)) @ P
            worst = max(worst, float(np.max(np.linalg.norm(diff, axis=0))))
        rows.append({"lambda": float(lam), "sup_error": worst})
    return rows


def profile_is_decreasing(rows: Sequence[dict]) -> bool:
    errs = [r["sup_error"] for r in rows]
    return all(b < a for a, b in zip(errs, errs[1:]))


def approximant_family(fam: CommutingFamily, kinds: Sequence[ApproximantKind]) -> CommutingFamily:
    """Per-member approximant generators, still a commuting family."""
    if len(kinds) != fam.d:
        raise ValueError("need one approximant kind per family member")
    gens = [approximant_generator(g, k) for g, k in zip(fam.generators, kinds)]
    return CommutingFamily(tuple(gens), commutator_tol=fam.commutator_tol,
                           allow_noncommuting=fam.allow_noncommuting)


def is_contractive_on_grid(g, kind: ApproximantKind, t_grid: Sequence[float], tol: float = 1e-9) -> bool:
    gen = approximant_generator(g, kind)
    return all(operator_norm(evaluate(gen, t)) <= 1 + tol for t in t_grid)
