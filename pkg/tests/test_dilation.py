import numpy as np
import pytest
from hypothesis import given, strategies as st

from dilationlab.dilation import NotAContractionError, defect_operator, finite_power_dilation, random_contraction
from dilationlab.linalg import random_unitary


def test_unitary_input_has_zero_residual(rng):
    S = random_unitary(3, rng)
    dil = finite_power_dilation(S, 4)
    assert np.linalg.norm(defect_operator(S)) == 0.0
    assert dil.unitarity_residual <= 1e-12
    assert dil.compression_residual <= 1e-12


def test_zero_scalar_gives_permutation():
    dil = finite_power_dilation(np.zeros((1, 1)), 2)
    assert dil.U.shape == (3, 3)
    assert np.array_equal(np.abs(dil.U), np.abs(dil.U).round())
    assert np.allclose(np.abs(dil.U).sum(axis=0), 1)
    P = dil.embedding
    compressions = [(P.conj().T @ np.linalg.matrix_power(dil.U, k) @ P)[0, 0] for k in range(3)]
    assert np.allclose(compressions, [1, 0, 0], atol=0)
    assert dil.horizon == 2


def test_half_diagonal_horizon_eight():
    dil = finite_power_dilation(np.diag([0.5, 0.5]), 8)
    assert dil.unitarity_residual <= 1e-10
    assert dil.compression_residual <= 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_random_contractions(seed, dim):
    S = random_contraction(dim, np.random.default_rng(seed))
    dil = finite_power_dilation(S, 16)
    assert dil.unitarity_residual <= 1e-10
    assert dil.compression_residual <= 1e-8


def test_rejects_non_contraction_and_bad_horizon():
    with pytest.raises(NotAContractionError):
        finite_power_dilation(np.diag([1.1]), 3)
    with pytest.raises(ValueError):
        finite_power_dilation(np.eye(2), 0)
