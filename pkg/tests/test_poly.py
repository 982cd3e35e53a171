import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dilationlab.approximants import HILLE, YOSIDA, ApproximantKind, approximant_family
from dilationlab.families import build_counterexample, diagonalisable_family, random_dissipative, tensor_family
from dilationlab.linalg import hermitian_adjoint, matrix_exponential, operator_norm, random_unitary
from dilationlab.poly import (
    LaurentPolynomial,
    all_subsets,
    complete_dissipativity_report,
    dissipation_operator,
    p_K_operator,
    p_K_polynomial,
    p_K_product_form,
    partition_pairs,
    pK_positivity_scan,
    regular_poly_eval,
    regular_polynomial_bound_check,
    torus_sup,
    transfer_check,
    uniform_t_grid,
)
from dilationlab.semigroup import CommutingFamily

seeds = st.integers(0, 2**32 - 1)


def _brute_partitions(K):
    """Independent enumeration: choose C1 by size, C2 is the complement."""
    out = []
    for r in range(len(K) + 1):
        for C1 in itertools.combinations(K, r):
            out.append((tuple(C1), tuple(k for k in K if k not in C1)))
    return out


@pytest.mark.parametrize("K", [(), (0,), (1, 3), (0, 2, 4), (0, 1, 2, 3, 4)])
def test_partition_pairs(K):
    pairs = list(partition_pairs(K))
    assert len(pairs) == 2 ** len(K)
    assert sorted(pairs) == sorted(_brute_partitions(K))
    for C1, C2 in pairs:
        assert set(C1).isdisjoint(C2) and set(C1) | set(C2) == set(K)


def test_dissipation_examples(rng):
    fam = tensor_family([2, 3], rng)
    assert np.array_equal(dissipation_operator(fam, ()), np.eye(6))
    A = fam.matrices[0]
    assert np.allclose(dissipation_operator(fam, (0,)), -(A + A.conj().T) / 2, atol=1e-15)
    a = np.array([-1.0 + 2j, -0.5, 0.0])
    assert np.allclose(dissipation_operator([np.diag(a)], (0,)), np.diag(-a.real))


@given(seeds, st.sampled_from([(0,), (0, 1), (1, 2), (0, 1, 2)]))
def test_dissipation_operator_hermitian_and_matches_brute_force(seed, K):
    fam = tensor_family([2, 2, 2], np.random.default_rng(seed))
    M = dissipation_operator(fam, K)
    assert operator_norm(M - hermitian_adjoint(M)) <= 1e-10 * max(operator_norm(M), 1e-300)
    ref = np.zeros_like(M)
    for C1, C2 in _brute_partitions(K):
        left = np.linalg.multi_dot([np.eye(8)] * 2 + [fam.matrices[i] for i in C1])
        right = np.linalg.multi_dot([np.eye(8)] * 2 + [fam.matrices[j] for j in C2])
        ref += left.conj().T @ right
    assert operator_norm(M - (-0.5) ** len(K) * ref) <= 1e-13 * max(1.0, operator_norm(ref))


def test_complete_dissipativity_examples(rng):
    diag = CommutingFamily.from_matrices([np.diag(-rng.uniform(0, 2, 4)) for _ in range(3)])
    assert complete_dissipativity_report(diag).passed
    rep = complete_dissipativity_report(build_counterexample(2, 4, 2, 0.8, seed=1))
    assert rep.verdicts[(0,)].is_psd and rep.verdicts[(1,)].is_psd
    assert rep.failing() == [(0, 1)]
    single = CommutingFamily.from_matrices([random_dissipative(3, rng)])
    assert complete_dissipativity_report(single).passed


def test_laurent_polynomial_basics():
    d = 2
    p = LaurentPolynomial(d, {(1, 0): 1.0, (0, -1): 2j, (1, 1): 0.0})
    assert (1, 1) not in p.terms
    assert p.absolute_degree == 1
    assert LaurentPolynomial(d).absolute_degree == 0
    assert LaurentPolynomial.monomial([2, -3]).absolute_degree == 3
    assert (p - p).terms == {}
    assert LaurentPolynomial.from_json(p.to_json()) == p
    q = 2 - LaurentPolynomial.variable(1, 0) - LaurentPolynomial.variable(1, 0, -1)
    assert q.is_self_adjoint() and not p.is_self_adjoint()
    theta = np.array([[0.0], [np.pi], [1.0]])
    assert np.allclose(q.on_torus(theta), 2 - 2 * np.cos(theta[:, 0]))
    with pytest.raises(ValueError):
        LaurentPolynomial(2, {(1,): 1.0})


def test_p_K_examples():
    assert p_K_polynomial((), 3) == LaurentPolynomial.constant(3)
    X = LaurentPolynomial.variable(1, 0)
    assert p_K_polynomial((0,), 1) == 2 - X - LaurentPolynomial.variable(1, 0, -1)
    for d in range(1, 5):
        for K in all_subsets(d):
            pK = p_K_polynomial(K, d)
            assert pK == p_K_product_form(K, d)
            assert pK.absolute_degree <= 1
            assert all(c.imag == 0 and c.real == int(c.real) for c in pK.terms.values())


def test_regular_eval_examples(rng):
    S1, S2 = random_unitary(3, rng) * 0.7, rng.standard_normal((3, 3))
    assert np.array_equal(regular_poly_eval(LaurentPolynomial.constant(2), [S1, S2]), np.eye(3))
    assert np.allclose(regular_poly_eval(LaurentPolynomial.monomial([-1, 0]), [S1, S2]), S1.conj().T)
    assert np.allclose(regular_poly_eval(LaurentPolynomial.monomial([-1, 1]), [S1, S2]), S1.conj().T @ S2)
    with pytest.raises(ValueError):
        regular_poly_eval(LaurentPolynomial.constant(2), [S1])


@given(seeds, st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3))
def test_degree_one_monomials(seed, eps):
    rng = np.random.default_rng(seed)
    ops = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(3)]
    neg, pos = np.eye(3), np.eye(3)
    for e, S in zip(eps, ops):
        if e == -1:
            neg = neg @ S
        elif e == 1:
            pos = pos @ S
    got = regular_poly_eval(LaurentPolynomial.monomial(eps), ops)
    assert np.allclose(got, neg.conj().T @ pos, atol=1e-12)


@given(seeds, st.sampled_from([(0,), (0, 1), (0, 2), (0, 1, 2)]))
def test_p_K_operator_matches_regular_eval(seed, K):
    fam = tensor_family([2, 2, 2], np.random.default_rng(seed))
    ops = [matrix_exponential(A, 0.3) for A in fam.matrices]
    a = p_K_operator(ops, K)
    b = regular_poly_eval(p_K_polynomial(K, 3), ops)
    assert operator_norm(a - b) <= 1e-12 * max(1.0, operator_norm(b))


@given(seeds, st.sampled_from([1.0, 3.0, 20.0]))
def test_scaled_dissipation_link_for_hille(seed, lam):
    rng = np.random.default_rng(seed)
    fam = tensor_family([2, 2, 2], rng)
    lams = [lam, 2 * lam, 0.5 * lam]
    approx = approximant_family(fam, [ApproximantKind(HILLE, r) for r in lams])
    ops = [matrix_exponential(A, 1 / r) for A, r in zip(fam.matrices, lams)]
    for K in all_subsets(3):
        lhs = dissipation_operator(approx, K)
        rhs = np.prod([lams[i] for i in K]) / 2 ** len(K) * p_K_operator(ops, K)
        assert operator_norm(lhs - rhs) <= 1e-9 * max(1.0, operator_norm(lhs))


def test_torus_sup_examples():
    s = torus_sup(LaurentPolynomial.variable(2, 0))
    assert s.sup_estimate == pytest.approx(1.0) and 1.0 <= s.upper_bound <= 1.0 + 1e-9
    q = p_K_polynomial((0,), 1)
    s = torus_sup(q)
    assert s.sup_estimate == pytest.approx(4.0, abs=1e-12)
    assert s.argmax[0] == pytest.approx(np.pi, abs=1e-5)
    for k in (1, 2, 3):
        s = torus_sup(p_K_polynomial(tuple(range(k)), k))
        assert s.sup_estimate == pytest.approx(4.0**k, rel=1e-12)
        assert s.upper_bound >= s.sup_estimate
        assert np.allclose(s.argmax, np.pi, atol=1e-4)
    with pytest.raises(ValueError):
        torus_sup(q, resolution=4)
    with pytest.raises(ValueError):
        torus_sup(p_K_polynomial((0, 1, 2, 3, 4), 5), resolution=64, budget=10**6)


@given(seeds, st.integers(1, 2))
def test_torus_upper_bound_dominates_dense_grid(seed, d):
    rng = np.random.default_rng(seed)
    terms = {tuple(rng.integers(-2, 3, d)): complex(*rng.standard_normal(2)) for _ in range(4)}
    p = LaurentPolynomial(d, terms)
    s = torus_sup(p, resolution=16)
    theta = rng.uniform(0, 2 * np.pi, (20_000, d))
    dense = np.abs(p.on_torus(theta)).max()
    assert dense <= s.upper_bound * (1 + 1e-12)
    assert s.sup_estimate <= s.upper_bound
    assert abs(p.on_torus(s.argmax)) == pytest.approx(s.sup_estimate, rel=1e-12)


def test_bound_check_examples(rng):
    fam = tensor_family([2, 2], rng)
    one = regular_polynomial_bound_check(fam, [0.3, 0.4], LaurentPolynomial.constant(2))
    assert one.passed and one.norm == pytest.approx(1.0)
    U = random_unitary(3, rng)
    H1, H2 = [U @ np.diag(1j * rng.standard_normal(3)) @ U.conj().T for _ in range(2)]
    unitary = CommutingFamily.from_matrices([H1, H2])
    chk = regular_polynomial_bound_check(unitary, [1.0, 2.0], LaurentPolynomial.variable(2, 0))
    assert chk.passed and chk.norm == pytest.approx(chk.sup_estimate, abs=1e-9)


def test_bound_check_fails_on_counterexample():
    fam = build_counterexample(2, 4, 2, 0.8, seed=1)
    scan = pK_positivity_scan(fam, [(2.0**-k, 2.0**-k) for k in range(3, 8)])
    (K, t), v = scan.worst
    c = 4 ** len(K) / 2
    chk = regular_polynomial_bound_check(fam, t, p_K_polynomial(K, 2) - c)
    assert not chk.passed
    assert chk.norm == pytest.approx(c - v.min_eigenvalue, rel=1e-9)


def test_scan_examples(rng):
    fam = tensor_family([2, 3], rng)
    at_zero = pK_positivity_scan(fam, [(0.0, 0.0)])
    for (K, _), v in at_zero.verdicts.items():
        assert v.min_eigenvalue == pytest.approx(0.0, abs=1e-15)
    single = CommutingFamily.from_matrices([random_dissipative(4, rng)])
    assert pK_positivity_scan(single, uniform_t_grid(1)).passed
    ce = build_counterexample(2, 4, 2, 0.8, seed=1)
    rep = pK_positivity_scan(ce, [(2.0**-k,) * 2 for k in range(3, 11)])
    assert not rep.passed
    assert {K for K, _ in rep.failing()} == {(0, 1)}
    assert min(max(t) for _, t in rep.failing()) <= 2.0**-10


def test_transfer_check_examples(rng):
    fam = tensor_family([2, 2], rng)
    grid = uniform_t_grid(2, -4, 2)
    one = transfer_check(fam, [ApproximantKind(HILLE, 4.0)] * 2, LaurentPolynomial.constant(2), grid,
                         n=100, mc_grid=grid[:2])
    assert one.passed and all(r["deviation"] <= 1e-14 for r in one.mc_rows)
    for K in ((0,), (0, 1)):
        for variant in (HILLE, YOSIDA):
            rep = transfer_check(fam, [ApproximantKind(variant, 8.0)] * 2, p_K_polynomial(K, 2), grid,
                                 n=20_000, seed=3, mc_grid=grid[-2:])
            assert rep.source_psd and rep.approximant_psd and rep.mc_passed()
    with pytest.raises(ValueError):
        transfer_check(fam, [ApproximantKind(HILLE, 1.0)] * 2, LaurentPolynomial.monomial([2, 0]), grid)
    with pytest.raises(ValueError):
        transfer_check(CommutingFamily.from_matrices([np.eye(2)]), [ApproximantKind(HILLE, 1.0)],
                       LaurentPolynomial.constant(1), [(0.1,)])


def test_three_decisive_columns_agree_on_small_corpus():
    for k in range(12):
        rng = np.random.default_rng(500 + k)
        fam = tensor_family([2, 2], rng) if k % 2 else diagonalisable_family(2, 4, rng)
        cd = complete_dissipativity_report(fam).passed
        scan = pK_positivity_scan(fam).passed
        ap = all(complete_dissipativity_report(approximant_family(fam, [ApproximantKind(v, lam)] * fam.d)).passed
                 for v in (HILLE, YOSIDA) for lam in (2.0, 8.0, 32.0))
        assert cd == scan == ap == True  # noqa: E712
