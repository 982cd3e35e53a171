import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dilationlab.monoid import (
    CorrelatedHeisenberg,
    Euclidean,
    Heisenberg,
    PositivityStructure,
    Product,
    axioms_check,
    build_ccr_family,
    ccr_relation_check,
    e_joint_witness,
    group_mul,
    heisenberg_homomorphism,
    heisenberg_representation,
    inverse,
    literal_structure,
    mutated_structure,
    positive_part,
    random_ccr_family,
)

seeds = st.integers(0, 2**32 - 1)


def _groups(rng):
    return [Euclidean(2), Heisenberg(1), Heisenberg(2), CorrelatedHeisenberg.with_random_correlation(3, rng),
            Product([Euclidean(1), Heisenberg(1)])]


@given(seeds)
def test_associativity_identity_inverse(seed):
    rng = np.random.default_rng(seed)
    for G in _groups(rng):
        a, b, c = (G.random(rng) for _ in range(3))
        assert group_mul(group_mul(a, b), c).allclose(group_mul(a, group_mul(b, c)), 1e-12)
        assert group_mul(a, G.identity()).allclose(a, 0)
        assert group_mul(a, inverse(a)).allclose(G.identity(), 1e-12)


def test_heisenberg_law_by_hand():
    G = Heisenberg(1)
    g = group_mul(G.element([1, 2, 3]), G.element([4, 5, 6]))
    assert np.allclose(g.coords, [5, 7, 9 + 0.5 * (2 * 4 - 5 * 1)])
    assert np.array_equal(inverse(G.element([1, -2, 3])).coords, [-1, 2, -3])


def test_correlated_heisenberg_with_zero_correlation_is_abelian():
    G = CorrelatedHeisenberg(C=np.zeros((1, 1)))
    assert np.array_equal(group_mul(G.element([1.5, 2]), G.element([-3, 4])).coords, [-1.5, 6])


def test_correlated_heisenberg_validation():
    with pytest.raises(ValueError):
        CorrelatedHeisenberg(C=np.ones((2, 2)))
    with pytest.raises(ValueError):
        CorrelatedHeisenberg(D=np.eye(2))
    G = CorrelatedHeisenberg.with_random_correlation(3, np.random.default_rng(0))
    assert np.array_equal(G.C, -G.C.T)


def test_mixed_group_multiplication_raises():
    with pytest.raises(TypeError):
        group_mul(Euclidean(1).identity(), Heisenberg(1).identity())


def test_positive_part_examples():
    E, H = Euclidean(2), Heisenberg(1)
    assert np.array_equal(positive_part(PositivityStructure(E), E.element([-1, 2])).coords, [0, 2])
    assert np.array_equal(positive_part(PositivityStructure(H), H.element([-1, 2, -3])).coords, [0, 2, 0])
    for G in (E, H, CorrelatedHeisenberg(D=[[0, 1.0], [0, 0]])):
        ps = PositivityStructure(G)
        assert np.array_equal(ps.positive_part(G.identity()).coords, G.identity().coords)


@given(seeds)
def test_positive_part_lands_in_monoid_and_monoid_is_closed(seed):
    rng = np.random.default_rng(seed)
    for G in _groups(rng):
        ps = PositivityStructure(G)
        a, b = (ps.positive_part(G.random(rng)) for _ in range(2))
        assert ps.in_monoid(a) and ps.in_monoid(b)
        assert ps.in_monoid(group_mul(a, b))


@pytest.mark.parametrize("G", [Euclidean(1), Euclidean(2), Euclidean(4), Heisenberg(1), Heisenberg(2), Heisenberg(3),
                               CorrelatedHeisenberg.with_random_correlation(2, np.random.default_rng(7)),
                               Product([Heisenberg(1), CorrelatedHeisenberg(D=[[0, 0.5], [0, 0]])])],
                         ids=lambda G: G.name + str(G.size))
def test_axioms_hold(G):
    rep = axioms_check(PositivityStructure(G), samples=1000, seed=11)
    assert rep.passed, rep.as_dict()


def test_literal_central_map_fails_representation_axiom():
    rep = axioms_check(literal_structure(Heisenberg(1)), samples=400, seed=1)
    assert rep.failures["representation"] > 0
    assert rep.failures["identity"] == rep.failures["idempotent"] == 0


@pytest.mark.parametrize("G", [Euclidean(2), Heisenberg(1), Product([Euclidean(1), Euclidean(1)])],
                         ids=lambda G: G.name)
@pytest.mark.parametrize("kind", ["identity", "abs"])
def test_mutations_detected(G, kind):
    rep = axioms_check(mutated_structure(G, kind), samples=200, seed=5)
    assert not rep.passed


def test_mutated_identity_map_doubles_negative_coordinates():
    G = Euclidean(1)
    ps = mutated_structure(G, "identity")
    x = G.element([-1.0])
    assert np.array_equal(group_mul(inverse(ps.negative_part(x)), ps.positive_part(x)).coords, [-2.0])


def test_e_joint_witnesses():
    box, m = e_joint_witness("euclidean", 0.5)
    assert box == [(0.0, 0.5)] and m == 0.5
    assert e_joint_witness("heisenberg", 1.0)[1] == 2.0
    assert e_joint_witness("heisenberg-c", 0.5, d=2)[1] == pytest.approx(0.25)
    assert 0 < e_joint_witness("heisenberg", 1e-3, d=2)[1] < 1e-12
    with pytest.raises(ValueError):
        e_joint_witness("euclidean", 0.0)


def test_ccr_nilpotent_shift():
    fam = build_ccr_family(1, 5, [[1]], [[0.0]], -0.3 + 1j)
    assert np.count_nonzero(fam.T(0, 5)) == 0
    assert np.count_nonzero(fam.T(0, 4)) == 1


def test_ccr_weights_by_formula():
    fam = build_ccr_family(1, 4, [[1]], [[1.0]], -1.0)
    expected = np.zeros((4, 4))
    for x in range(3):
        expected[x, x + 1] = np.exp(-x)
    assert np.allclose(fam.T(0, 1), expected, atol=0)


def test_ccr_correlation_matrix():
    u = np.array([[1, 2], [0, 1]])
    a = np.array([[0.3, 0.1], [0.5, 0.7]])
    fam = build_ccr_family(2, 4, u, a, -0.2)
    assert fam.C[0, 1] == pytest.approx(0.5 * (a[0] @ u[1] - a[1] @ u[0]))
    assert np.array_equal(fam.C, -fam.C.T)


def test_ccr_validation():
    with pytest.raises(ValueError):
        build_ccr_family(1, 4, [[0.5]], [[1.0]], -1.0)
    with pytest.raises(ValueError):
        build_ccr_family(1, 4, [[1]], [[-1.0]], -1.0)
    with pytest.raises(ValueError):
        build_ccr_family(1, 4, [[1]], [[1.0]], 0.5)
    fam = build_ccr_family(1, 4, [[1]], [[1.0]], -1.0)
    with pytest.raises(ValueError):
        fam.T(0, 1.5)


@given(seeds)
def test_ccr_contractive_and_relation_exact(seed):
    fam = random_ccr_family(np.random.default_rng(seed))
    for i in range(fam.d):
        assert np.linalg.norm(fam.T(i, 1), 2) <= 1 + 1e-12
    for s, t in itertools.product(range(5), repeat=2):
        assert ccr_relation_check(fam, s, t, 0, 1) <= 1e-12
        assert ccr_relation_check(fam, s, t, 0, 0) <= 1e-15


def test_ccr_uncorrelated_commutes():
    fam = build_ccr_family(2, 5, [[1, 0], [0, 1]], [[0, 0.4], [0.4, 0]], -0.5)
    assert fam.C[0, 1] == 0
    assert max(ccr_relation_check(fam, s, t, 0, 1) for s in range(4) for t in range(4)) <= 1e-13


@pytest.mark.parametrize("seed", range(5))
def test_ccr_mutation_sensitivity(seed):
    fam = random_ccr_family(np.random.default_rng(seed))
    w = fam.weights.copy()
    w[0, 0] += 1
    bad = build_ccr_family(fam.m, fam.N, fam.shifts, w, fam.lam)
    # keep the original correlation: the mutated shift no longer satisfies it
    broken = max(np.linalg.norm(bad.T(1, t) @ bad.T(0, s)
                                - np.exp(2 * s * t * fam.lam * fam.C[0, 1]) * bad.T(0, s) @ bad.T(1, t), 2)
                 for s in range(1, 5) for t in range(1, 5))
    assert broken > 1e-3


@given(seeds)
def test_heisenberg_homomorphism(seed):
    rng = np.random.default_rng(seed)
    fam = random_ccr_family(rng)
    G = fam.group()
    for _ in range(5):
        g1, g2 = (G.element(np.concatenate([rng.integers(0, 4, fam.d), rng.normal(size=1)])) for _ in range(2))
        assert heisenberg_homomorphism(fam, g1, g2) <= 1e-10
        assert heisenberg_homomorphism(fam, g1, G.identity()) <= 1e-14
    E = G.element([0.0] * fam.d + [0.7])
    assert np.allclose(heisenberg_representation(fam, E), fam.U(0.7), atol=0)
