import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dilationlab.families import tensor_family
from dilationlab.monoid import CcrFamily
from dilationlab.poly import LaurentPolynomial
from dilationlab.semigroup import CommutingFamily
from dilationlab.spec_io import (
    SpecError,
    build_family,
    counterexample_spec,
    decode_matrix,
    encode_matrix,
    explicit_spec,
    family_dimension,
    load_spec,
    parse_spec,
    spec_from_dict,
)

SOURCES = [
    {"source": "tensor", "dims": [2, 3], "seed": 4},
    {"source": "diagonal", "d": 3, "dim": 4, "seed": 1, "scale": 0.5},
    {"source": "counterexample", "d": 3, "dim1": 4, "dim2": 2, "alpha": 0.65, "seed": 2},
    {"source": "ccr", "m": 2, "N": 4, "shifts": [[1, 0], [0, 1]], "weights": [[0.1, 0.2], [0.3, 0.0]],
     "lam": [-0.5, 1.0]},
]


@pytest.mark.parametrize("family", SOURCES, ids=lambda f: f["source"])
def test_round_trip_is_stable(family):
    spec = spec_from_dict({"family": family, "grids": {"lambda_grid": [4, 16]}, "mc": {"n": 10, "seed": 3}})
    text = spec.to_json()
    again = parse_spec(text)
    assert again.to_json() == text
    assert again.digest() == spec.digest()
    built = build_family(again)
    assert isinstance(built, CcrFamily if family["source"] == "ccr" else CommutingFamily)
    assert family_dimension(again) == built.d


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 4))
def test_explicit_round_trip(seed, d, dim):
    fam = tensor_family([dim] * d, np.random.default_rng(seed))
    p = LaurentPolynomial(d, {tuple([1] + [0] * (d - 1)): 1 - 2j, tuple([-1] * d): 0.5})
    spec = explicit_spec(fam.matrices, polynomials=[p])
    again = parse_spec(spec.to_json())
    assert again.to_json() == spec.to_json()
    rebuilt = build_family(again)
    for a, b in zip(rebuilt.matrices, fam.matrices):
        assert np.array_equal(a, b)
    assert again.polynomials[0].terms == p.terms


def test_matrix_encoding():
    M = np.array([[1 + 2j, 0], [-3j, 4.5]])
    assert encode_matrix(M)[0][0] == [1.0, 2.0]
    assert np.array_equal(decode_matrix(encode_matrix(M), "m"), M)


@pytest.mark.parametrize("obj,field", [
    ({}, "<root>.family"),
    ({"family": {"source": "nope"}}, "family.source"),
    ({"family": {"source": "tensor"}}, "family.dims"),
    ({"family": {"source": "tensor", "dims": [2, "x"]}}, "family.dims[1]"),
    ({"family": {"source": "counterexample", "d": 2, "dim1": 4, "dim2": 2, "alpha": 0.5}}, "family.alpha"),
    ({"family": {"source": "counterexample", "d": 2, "dim1": 1, "dim2": 2, "alpha": 0.8}}, "family.dim2"),
    ({"family": {"source": "explicit", "matrices": [[[[1, 0], [0, 0]], [[0, 0]]]]}}, "family.matrices[0][1]"),
    ({"family": {"source": "explicit", "matrices": [[[[1, 0, 3]]]]}}, "family.matrices[0][0][0]"),
    ({"family": {"source": "tensor", "dims": [2]}, "extra": 1}, "<root>.extra"),
    ({"family": {"source": "tensor", "dims": [2]}, "grids": {"lambda_grid": [0]}}, "grids.lambda_grid[0]"),
    ({"family": {"source": "tensor", "dims": [2]}, "grids": {"t_grid": [[0.1, 0.2]]}}, "grids.t_grid[0]"),
    ({"family": {"source": "tensor", "dims": [2]}, "tolerances": {"psd_tol": -1}}, "tolerances.psd_tol"),
    ({"family": {"source": "tensor", "dims": [2]}, "batteries": {"gram": "yes"}}, "batteries.gram"),
    ({"family": {"source": "tensor", "dims": [2]}, "mc": {"n": 0}}, "mc.n"),
    ({"family": {"source": "tensor", "dims": [2]},
      "polynomials": [[{"exponents": [1, 0], "coeff": [1, 0]}]]}, "polynomials[0]"),
    ({"family": {"source": "ccr", "m": 1, "N": 3, "shifts": [[1]], "weights": [[1]], "lam": [0.5, 0]}},
     "family.lam"),
    ({"family": {"source": "tensor", "dims": [2]}, "schema_version": 2}, "schema_version"),
])
def test_validation_errors_name_the_field(obj, field):
    with pytest.raises(SpecError) as exc:
        spec_from_dict(obj)
    assert exc.value.field == field


def test_json_syntax_error_reports_line():
    with pytest.raises(SpecError) as exc:
        parse_spec('{\n  "family": {\n    "source": "tensor",\n  }\n}')
    assert exc.value.line == 4


def test_missing_file(tmp_path):
    with pytest.raises(SpecError):
        load_spec(tmp_path / "missing.json")


def test_non_commuting_explicit_matrices_rejected():
    spec = explicit_spec([np.array([[0, 1], [0, 0]]), np.array([[0, 0], [1, 0]])])
    with pytest.raises(SpecError):
        build_family(spec)


def test_counterexample_spec_digest_changes_with_alpha():
    a, b = counterexample_spec(2, 4, 2, 0.8), counterexample_spec(2, 4, 2, 0.85)
    assert a.digest() != b.digest()
    assert json.loads(a.to_json())["family"]["alpha"] == 0.8
