"""Dense complex linear algebra primitives.

Every operator in the package is a square ``complex128`` numpy array.  The
functions here are pure; none of them mutate their inputs.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import DEFAULTS


class SingularResolventError(np.linalg.LinAlgError):
    """Raised when ``lambda`` lies in the spectrum of the generator."""


class NonHermitianError(ValueError):
    """Raised when a matrix handed to a positivity check is far from Hermitian."""


@dataclass(frozen=True)
class PsdVerdict:
    is_psd: bool
    min_eigenvalue: float
    scale: float
    tol: float = DEFAULTS.psd_tol

    @property
    def threshold(self) -> float:
        return -self.tol * max(1.0, self.scale)

    def __bool__(self):
        return self.is_psd

    def as_dict(self) -> dict:
        return {
            "is_psd": self.is_psd,
            "min_eigenvalue": self.min_eigenvalue,
            "scale": self.scale,
            "tol": self.tol,
        }


def as_matrix(M) -> np.ndarray:
    """Coerce to a finite square complex matrix."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def hermitian_adjoint(M: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(M))


def operator_norm(M: np.ndarray) -> float:
    """Largest singular value."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def matrix_exponential(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Return ``exp(t A)``.

    Scaling-and-squaring with a Pade core (scipy's Al-Mohy/Higham
    implementation).  Raises ``OverflowError`` when the result has
    non-finite entries.
    """
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    A = np.asarray(A, dtype=complex)
    if t == 0:
        return np.eye(A.shape[-1], dtype=complex)
    E = scipy.linalg.expm(t * A)
    if not np.all(np.isfinite(E)):
        raise OverflowError(f"exp(tA) overflowed for t={t}, |A|={operator_norm(A):.3g}")
    return E


def matrix_exponential_batch(A: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Stack of ``exp(t_k A)`` for a 1-d array of times, shape (n, dim, dim).

    Uses an eigendecomposition when ``A`` is well-conditioned diagonalizable
    and falls back to a batched Pade evaluation otherwise.
    """
    A = np.asarray(A, dtype=complex)
    times = np.asarray(times, dtype=float)
    dim = A.shape[0]
    w, V = np.linalg.eig(A)
    cond = np.linalg.cond(V)
    if np.isfinite(cond) and cond < 1e4:
        Vinv = np.linalg.inv(V)
        z = np.exp(np.outer(times, w))
        return np.einsum("ij,nj,jk->nik", V, z, Vinv)
    out = np.empty((times.size, dim, dim), dtype=complex)
    chunk = 20000
    for start in range(0, times.size, chunk):
        sl = slice(start, start + chunk)
        out[sl] = scipy.linalg.expm(times[sl, None, None] * A)
    return out


def resolvent(A: np.ndarray, lam: complex) -> np.ndarray:
    """``(lam I - A)^{-1}``; raises ``SingularResolventError`` on the spectrum."""
    A = np.asarray(A, dtype=complex)
    dim = A.shape[0]
    M = lam * np.eye(dim) - A
    # LinAlgError only fires on exact singularity; catch near-singular too.
    if np.linalg.cond(M) > 1e14:
        raise SingularResolventError(f"lambda={lam} is (numerically) in the spectrum")
    try:
        return np.linalg.solve(M, np.eye(dim, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularResolventError(str(exc)) from exc


def is_positive_semidefinite(M: np.ndarray, tol: float = DEFAULTS.psd_tol) -> PsdVerdict:
    """Positivity verdict for a formally self-adjoint matrix.

    The matrix is symmetrised as ``(M + M*)/2`` before the eigen-solve; an
    anti-Hermitian part larger than ``hermitian_tol * |M|`` is a caller bug.
    The acceptance threshold is relative: ``-tol * max(1, |M|)``.
    """
    M = np.asarray(M, dtype=complex)
    scale = operator_norm(M)
    skew = operator_norm(M - hermitian_adjoint(M)) / 2
    if skew > DEFAULTS.hermitian_tol * max(scale, 1e-300) and skew > 1e-14:
        raise NonHermitianError(f"anti-Hermitian part {skew:.3g} vs norm {scale:.3g}")
    H = (M + hermitian_adjoint(M)) / 2
    min_eig = float(np.linalg.eigvalsh(H)[0]) if H.size else 0.0
    return PsdVerdict(min_eig >= -tol * max(1.0, scale), min_eig, scale, tol)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    Z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Isometry C^cols -> C^rows (``V* V = I``) from a QR factorisation."""
    if cols > rows:
        raise ValueError("an isometry needs cols <= rows")
    Z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    Q, _ = np.linalg.qr(Z)
    return Q[:, :cols]
