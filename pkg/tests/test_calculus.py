import numpy as np
import pytest
from hypothesis import given, strategies as st

from dilationlab.calculus import (
    CompactlySupportedDensity,
    FinitelySupportedFunction,
    QuadratureBudgetError,
    approximate_unit_check,
    convolution,
    default_gram_schedule,
    discrete_calculus_eval,
    family_representation,
    gram_kernel_test,
    gram_scan,
    multiplicativity_check,
    phillips_lemerdy_eval,
    resolvent_product_oracle,
)
from dilationlab.families import build_counterexample, diagonalisable_family, random_dissipative, tensor_family
from dilationlab.linalg import hermitian_adjoint, matrix_exponential, operator_norm, random_unitary
from dilationlab.monoid import Euclidean, Heisenberg, PositivityStructure, group_mul, heisenberg_representation, \
    random_ccr_family
from dilationlab.semigroup import CommutingFamily, family_product

seeds = st.integers(0, 2**32 - 1)


def _line(fam):
    G = Euclidean(fam.d)
    return G, PositivityStructure(G), family_representation(fam)


def _random_function(G, rng, n=4, integer=False):
    pts = [rng.integers(-3, 4, G.size).astype(float) if integer else np.round(rng.uniform(-1, 1, G.size), 3)
           for _ in range(n)]
    return FinitelySupportedFunction(G, [(p, complex(*rng.normal(size=2))) for p in pts])


def test_finitely_supported_function_merges_and_drops():
    G = Euclidean(1)
    f = FinitelySupportedFunction(G, [([1.0], 2), ([1.0], -2), ([2.0], 1), ([3.0], 0)])
    assert list(f.coeffs) == [(2.0,)]


def test_discrete_calculus_examples(rng):
    fam = CommutingFamily.from_matrices([random_dissipative(3, rng)])
    G, ps, T = _line(fam)
    assert np.array_equal(discrete_calculus_eval(T, ps, FinitelySupportedFunction.delta(G.identity())), np.eye(3))
    Tt = matrix_exponential(fam.matrices[0], 0.7)
    assert np.allclose(discrete_calculus_eval(T, ps, FinitelySupportedFunction.delta(G.element([0.7]))), Tt,
                       atol=1e-14)
    assert np.allclose(discrete_calculus_eval(T, ps, FinitelySupportedFunction.delta(G.element([-0.7]))),
                       hermitian_adjoint(Tt), atol=1e-14)


@given(seeds)
def test_linearity_and_self_adjointness(seed):
    rng = np.random.default_rng(seed)
    fam = tensor_family([2, 2], rng)
    G, ps, T = _line(fam)
    f, g = _random_function(G, rng), _random_function(G, rng)
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    lhs = discrete_calculus_eval(T, ps, a * f + b * g)
    assert operator_norm(lhs - a * discrete_calculus_eval(T, ps, f) - b * discrete_calculus_eval(T, ps, g)) <= 1e-12
    assert operator_norm(discrete_calculus_eval(T, ps, f.involution())
                         - hermitian_adjoint(discrete_calculus_eval(T, ps, f))) <= 1e-12


@given(seeds)
def test_self_adjointness_on_correlated_heisenberg(seed):
    rng = np.random.default_rng(seed)
    fam = random_ccr_family(rng)
    G = fam.group()
    ps = PositivityStructure(G)

    def T(g):
        return heisenberg_representation(fam, g)
    f = _random_function(G, rng, integer=True)
    assert operator_norm(discrete_calculus_eval(T, ps, f.involution())
                         - hermitian_adjoint(discrete_calculus_eval(T, ps, f))) <= 1e-12


def test_convolution_examples(rng):
    H = Heisenberg(1)
    x, y = H.random(rng), H.random(rng)
    prod = convolution(FinitelySupportedFunction.delta(x), FinitelySupportedFunction.delta(y))
    assert prod.allclose(FinitelySupportedFunction.delta(group_mul(x, y)))
    f = _random_function(H, rng)
    assert convolution(FinitelySupportedFunction.delta(H.identity()), f).allclose(f)
    E = Euclidean(2)
    f, g = _random_function(E, rng), _random_function(E, rng)
    assert convolution(f, g).allclose(convolution(g, f), 1e-12)
    with pytest.raises(TypeError):
        convolution(f, FinitelySupportedFunction.delta(x))


def test_multiplicativity_on_the_monoid(rng):
    fam = CommutingFamily.from_matrices([random_dissipative(3, rng)])
    G, ps, T = _line(fam)
    e = FinitelySupportedFunction.delta(G.identity())
    assert multiplicativity_check(T, ps, e, e) == 0.0
    s, t = (FinitelySupportedFunction.delta(G.element([v])) for v in (0.3, 1.1))
    assert multiplicativity_check(T, ps, s, t) <= 1e-12


@given(seeds)
def test_multiplicativity_for_unitary_families(seed):
    rng = np.random.default_rng(seed)
    U = random_unitary(3, rng)
    fam = CommutingFamily.from_matrices([U @ np.diag(1j * rng.normal(size=3)) @ U.conj().T for _ in range(2)])
    G, ps, T = _line(fam)
    f, g = _random_function(G, rng), _random_function(G, rng)
    assert multiplicativity_check(T, ps, f, g) <= 1e-11


def test_multiplicativity_fails_for_non_unitary_splitting(rng):
    # T(s)* T(t) differs from T(t - s) for a strict contraction: reported, not an identity
    fam = CommutingFamily.from_matrices([np.diag([-1.0, -0.5])])
    G, ps, T = _line(fam)
    f, g = (FinitelySupportedFunction.delta(G.element([v])) for v in (-0.5, 1.0))
    assert multiplicativity_check(T, ps, f, g) > 1e-3


def test_gram_single_point_is_identity(rng):
    fam = tensor_family([2], rng)
    G, ps, T = _line(fam)
    v = gram_kernel_test(T, ps, [G.identity()])
    assert v.passed and v.verdict.min_eigenvalue == pytest.approx(1.0)


@pytest.mark.parametrize("shift", [-0.5, 0.0, 0.05, 0.5])
def test_gram_two_points_schur_oracle(rng, shift):
    A = random_dissipative(3, rng) + shift * np.eye(3)
    fam = CommutingFamily.from_matrices([A])
    G, ps, T = _line(fam)
    t = 0.4
    v = gram_kernel_test(T, ps, [G.identity(), G.element([t])])
    norm = operator_norm(matrix_exponential(A, t))
    assert v.verdict.min_eigenvalue == pytest.approx(1 - norm, abs=1e-12)
    assert v.passed == (norm <= 1 + 1e-9)


def test_gram_rejects_duplicates(rng):
    fam = tensor_family([2], rng)
    G, ps, T = _line(fam)
    with pytest.raises(ValueError):
        gram_kernel_test(T, ps, [G.identity(), G.identity()])


@pytest.mark.parametrize("d,alpha", [(2, 0.8), (3, 0.65)])
def test_gram_scan_finds_counterexample_witness(d, alpha):
    fam = build_counterexample(d, 4, 2, alpha, seed=1)
    results = gram_scan(fam)
    assert any(not r.passed for r in results)
    assert min(r.verdict.min_eigenvalue for r in results) < -1e-6
    for C in [(0,), tuple(range(d - 1))]:
        assert all(r.passed for r in gram_scan(fam.subfamily(C)))


def test_gram_monotone_under_adding_points():
    fam = build_counterexample(2, 4, 2, 0.8, seed=1)
    G, ps, T = _line(fam)
    failing = next(r for r in gram_scan(fam) if not r.passed)
    pts = [G.element(p) for p in failing.points]
    extra = [G.element([0.7, 0.1]), G.element([0.2, 0.9])]
    bigger = gram_kernel_test(T, ps, pts + extra)
    assert not bigger.passed
    assert bigger.verdict.min_eigenvalue <= failing.verdict.min_eigenvalue + 1e-12


@given(seeds)
def test_gram_psd_for_unitary_families(seed):
    rng = np.random.default_rng(seed)
    U = random_unitary(3, rng)
    fam = CommutingFamily.from_matrices([U @ np.diag(1j * rng.normal(size=3)) @ U.conj().T for _ in range(2)])
    for r in gram_scan(fam, default_gram_schedule(2, exponents=range(0, 5))):
        assert r.verdict.min_eigenvalue >= -1e-10


def test_gram_passes_on_normal_family(rng):
    assert all(r.passed for r in gram_scan(diagonalisable_family(2, 3, rng)))


def test_phillips_lemerdy_zero_density(rng):
    fam = tensor_family([2, 2], rng)
    value, err = phillips_lemerdy_eval(fam, 2 - 1j, CompactlySupportedDensity.zero(2))
    assert np.array_equal(value, (2 - 1j) * np.eye(4)) and err == 0.0


@pytest.mark.parametrize("rates", [(1.5,), (3.0,), (2.0, 0.7)])
def test_phillips_lemerdy_matches_resolvent_product(rng, rates):
    d = len(rates)
    fam = tensor_family([2] * d, rng) if d > 1 else CommutingFamily.from_matrices([random_dissipative(4, rng)])
    cutoff = 12.0
    value, err = phillips_lemerdy_eval(fam, 0.0, CompactlySupportedDensity.exponential(rates, cutoff))
    oracle, tail = resolvent_product_oracle(fam, rates, cutoff)
    assert operator_norm(value - oracle) <= tail + 10 * err + 1e-12


def test_phillips_lemerdy_diagonal_scalar():
    a = np.array([-0.5 + 1j, -2.0])
    fam = CommutingFamily.from_matrices([np.diag(a)])
    lam, R = 3.0, 15.0
    value, err = phillips_lemerdy_eval(fam, 0.0, CompactlySupportedDensity.exponential([lam], R))
    expected = lam / (lam - a)
    tail = np.exp(-(lam - a.real) * R)
    assert np.all(np.abs(np.diag(value) - expected) <= tail * np.abs(expected) + 10 * err + 1e-12)


def test_phillips_lemerdy_homomorphism_on_exponentials(rng):
    fam = CommutingFamily.from_matrices([random_dissipative(3, rng)])
    lam, mu, R = 2.0, 3.0, 30.0
    f = CompactlySupportedDensity.exponential([lam], R)
    g = CompactlySupportedDensity.exponential([mu], R)

    def conv(x):
        x = x[:, 0]
        return lam * mu * (np.exp(-lam * x) - np.exp(-mu * x)) / (mu - lam)
    h = CompactlySupportedDensity(((0.0, R),), conv, 2048)
    Pf, ef = phillips_lemerdy_eval(fam, 0.0, f)
    Pg, eg = phillips_lemerdy_eval(fam, 0.0, g)
    Ph, eh = phillips_lemerdy_eval(fam, 0.0, h)
    tail = (mu * np.exp(-lam * R) - lam * np.exp(-mu * R)) / (mu - lam) + np.exp(-lam * R) + np.exp(-mu * R)
    assert operator_norm(Ph - Pf @ Pg) <= tail + 10 * (ef + eg + eh) + 1e-12


def test_quadrature_budget():
    fam = CommutingFamily.from_matrices([np.eye(4) * -1.0] * 3)
    with pytest.raises(QuadratureBudgetError):
        phillips_lemerdy_eval(fam, 0, CompactlySupportedDensity.exponential([1, 1, 1], 5.0, resolution=512))
    with pytest.raises(ValueError):
        CompactlySupportedDensity(((-1.0, 1.0),), lambda x: x[:, 0])


def test_approximate_unit_zero_generator():
    fam = CommutingFamily.from_matrices([np.zeros((2, 2))] * 2)
    assert max(approximate_unit_check(fam, ks=range(4))) <= 1e-13


def test_approximate_unit_scalar_closed_form():
    fam = CommutingFamily.from_matrices([np.array([[-1.0]])])
    errors = approximate_unit_check(fam, ks=range(9))
    for k, e in enumerate(errors):
        h = 2.0**-k
        assert e == pytest.approx(1 - (1 - np.exp(-h)) / h, abs=1e-8)
        assert e <= h / 2


@given(seeds)
def test_approximate_unit_decreasing(seed):
    rng = np.random.default_rng(seed)
    fam = tensor_family([2, 2], rng)
    errors = approximate_unit_check(fam, ks=range(9), resolution=16)
    assert all(b < a for a, b in zip(errors, errors[1:]))
    # the family product is identity at 0, so the error is bounded by the sup over the box
    h = 2.0**-8
    assert errors[-1] <= operator_norm(family_product(fam, [h, h]) - np.eye(4)) + 1e-10
