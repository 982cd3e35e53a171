"""Finite-horizon unitary power dilation of a single contraction.

For ``|S| <= 1`` and horizon ``N`` the block matrix on ``(N+1)`` copies

    [ S    0  ...  0  D_{S*} ]
    [ D_S  0  ...  0  -S*    ]
    [ 0    I  ...  0  0      ]
    [ ...          ...       ]
    [ 0    0  ...  I  0      ]

is unitary and its ``k``-th power compresses to ``S^k`` on the first copy
for ``k = 0..N`` (Egervary's construction).  ``D_S = (I - S*S)^{1/2}``.
"""
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, hermitian_adjoint, operator_norm


class NotAContractionError(ValueError):
    pass


def defect_operator(S: np.ndarray) -> np.ndarray:
    """``(I - S* S)^{1/2}`` via a Hermitian eigendecomposition.

    Eigenvalues at rounding level are set to zero: their square roots would
    otherwise inject ~1e-8 errors into an exactly unitary ``S``.
    """
    n = S.shape[0]
    M = np.eye(n) - hermitian_adjoint(S) @ S
    w, V = np.linalg.eigh((M + hermitian_adjoint(M)) / 2)
    w = np.where(w > 16 * n * np.finfo(float).eps, w, 0.0)
    return (V * np.sqrt(w)) @ hermitian_adjoint(V)


@dataclass
class PowerDilation:
    U: np.ndarray
    embedding: np.ndarray      # isometry onto the first copy, shape ((N+1) n, n)
    unitarity_residual: float
    compression_residual: float

    @property
    def horizon(self) -> int:
        return self.U.shape[0] // self.embedding.shape[1] - 1


def finite_power_dilation(S, N: int, tol: float = 1e-10) -> PowerDilation:
    S = as_matrix(S)
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    norm = operator_norm(S)
    if norm > 1 + tol:
        raise NotAContractionError(f"|S| = {norm:.12g} > 1")
    n = S.shape[0]
    Sstar = hermitian_adjoint(S)
    U = np.zeros(((N + 1) * n, (N + 1) * n), dtype=complex)

    def block(i, j, M):
        U[i * n:(i + 1) * n, j * n:(j + 1) * n] = M

    block(0, 0, S)
    block(0, N, defect_operator(Sstar))
    block(1, 0, defect_operator(S))
    block(1, N, -Sstar)
    for k in range(2, N + 1):
        block(k, k - 1, np.eye(n))
    P = np.zeros(((N + 1) * n, n), dtype=complex)
    P[:n] = np.eye(n)
    unitarity = operator_norm(hermitian_adjoint(U) @ U - np.eye(U.shape[0]))
    worst, power, Sk = 0.0, np.eye(U.shape[0], dtype=complex), np.eye(n, dtype=complex)
    for _ in range(N + 1):
        worst = max(worst, operator_norm(hermitian_adjoint(P) @ power @ P - Sk))
        power, Sk = U @ power, S @ Sk
    return PowerDilation(U, P, unitarity, worst)


def random_contraction(dim: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """Random matrix rescaled to operator norm ``radius * u`` with ``u ~ U(0.2, 1)``."""
    Z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return Z * (radius * rng.uniform(0.2, 1.0) / operator_norm(Z))
