"""Known-answer commuting families: tensor products, simultaneously
diagonalisable families, and the block counterexample that fails only at
full order."""
import numpy as np

from .linalg import random_isometry, random_unitary
from .semigroup import CommutingFamily, growth_bound, is_dissipative


class InvalidFamilyError(ValueError):
    pass


def random_dissipative(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """``-P + i H`` with ``P`` positive semidefinite, ``H`` Hermitian."""
    Z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    P = Z @ Z.conj().T / dim
    W = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    H = (W + W.conj().T) / 2
    return scale * (-P + 1j * H)


def tensor_family(dims, rng: np.random.Generator, scale: float = 1.0) -> CommutingFamily:
    """``A_i = I x ... x B_i x ... x I`` with dissipative ``B_i`` (doubly commuting)."""
    blocks = [random_dissipative(k, rng, scale) for k in dims]
    gens = []
    for i, B in enumerate(blocks):
        M = np.ones((1, 1), dtype=complex)
        for j, k in enumerate(dims):
            M = np.kron(M, B if i == j else np.eye(k))
        gens.append(M)
    return CommutingFamily.from_matrices(gens)


def diagonalisable_family(d: int, dim: int, rng: np.random.Generator, scale: float = 1.0) -> CommutingFamily:
    """``A_i = U diag(z_i) U*`` with ``Re z_i <= 0``: normal, hence completely dissipative."""
    U = random_unitary(dim, rng)
    gens = []
    for _ in range(d):
        z = scale * (-rng.exponential(1.0, dim) + 1j * rng.standard_normal(dim))
        gens.append(U @ np.diag(z) @ U.conj().T)
    return CommutingFamily.from_matrices(gens)


def alpha_interval(d: int) -> tuple:
    return 1 / np.sqrt(d), (1 / np.sqrt(d - 1) if d > 1 else np.inf)


def build_counterexample(d: int, dim1: int, dim2: int, alpha: float, seed: int = 0,
                         check: bool = True) -> CommutingFamily:
    """``A_i = -I + [[0, 2 alpha V_i], [0, 0]]`` on ``C^dim1 + C^dim2``.

    ``V_i`` are random isometries ``C^dim2 -> C^dim1``.  The nilpotent parts
    multiply to zero pairwise, so the family commutes exactly.  For ``alpha``
    in ``(1/sqrt(d), 1/sqrt(d-1))`` every proper subfamily is completely
    dissipative and the full family is not.
    """
    if d < 2:
        raise ValueError("the counterexample needs d >= 2")
    if not dim1 >= dim2 >= 1:
        raise ValueError("need dim1 >= dim2 >= 1")
    lo, hi = alpha_interval(d)
    if not lo < alpha < hi:
        raise ValueError(f"alpha must lie in ({lo:.6g}, {hi:.6g}), got {alpha}")
    rng = np.random.default_rng(seed)
    dim = dim1 + dim2
    gens = []
    for _ in range(d):
        N = np.zeros((dim, dim), dtype=complex)
        N[:dim1, dim1:] = 2 * alpha * random_isometry(dim1, dim2, rng)
        gens.append(-np.eye(dim) + N)
    fam = CommutingFamily.from_matrices(gens)
    if check:
        validate_counterexample(fam)
    return fam


def validate_counterexample(fam: CommutingFamily, tol: float = 1e-9) -> None:
    """Construction gates: exact commutation, dissipativity, spectrum ``{-1}``."""
    if fam.commutator_bound > tol:
        raise InvalidFamilyError(f"commutator bound {fam.commutator_bound:.3g}")
    for i, g in enumerate(fam.generators):
        if not is_dissipative(g):
            raise InvalidFamilyError(f"generator {i} is not dissipative")
        # A + I is nilpotent, so the spectrum is exactly {-1}.
        N = g.A + np.eye(g.dim)
        if np.linalg.norm(N @ N) > tol:
            raise InvalidFamilyError(f"generator {i}: A + I is not square-zero")
        if abs(growth_bound(g) + 1) > 1e-6:
            raise InvalidFamilyError(f"generator {i}: spectral abscissa {growth_bound(g)}")


def spectrum_deviation(A: np.ndarray) -> float:
    """Distance of the spectrum of ``A`` from ``{-1}``, via ``A + I`` nilpotency."""
    N = np.asarray(A) + np.eye(A.shape[0])
    return float(np.linalg.norm(N @ N, 2))
