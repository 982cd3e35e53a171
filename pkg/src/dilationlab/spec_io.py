"""FamilySpec files: parse, validate, emit, and build the family they describe.

A spec is a JSON object::

    {
      "schema_version": 1,
      "family": {"source": "explicit", "matrices": [[[[re, im], ...], ...], ...]},
      "batteries": {"complete_dissipativity": true, ...},
      "grids": {"t_grid": null, "lambda_grid": [2, 8, 32], "gram_exponents": [0, ..., 8], "grid_max": 10000},
      "polynomials": [[{"exponents": [1, 0], "coeff": [1, 0]}, ...], ...],
      "tolerances": {"psd_tol": 1e-9, ...},
      "mc": {"n": 100000, "seed": 0}
    }

Family sources: ``explicit``, ``tensor`` (dims, seed, scale), ``diagonal``
(d, dim, seed, scale), ``counterexample`` (d, dim1, dim2, alpha, seed) and
``ccr`` (m, N, shifts, weights, lam).  Validation errors name the offending
field as a dotted path.
"""
import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .battery import COLUMNS
from .config import DEFAULTS, Tolerances
from .families import build_counterexample, diagonalisable_family, tensor_family
from .monoid import build_ccr_family
from .poly import LaurentPolynomial
from .semigroup import CommutingFamily

SCHEMA_VERSION = 1
SOURCES = ("explicit", "tensor", "diagonal", "counterexample", "ccr")
# extra switches beyond the battery columns
OPTIONAL_CHECKS = ("subsets", "transfer", "convergence", "mc_identities")


class SpecError(ValueError):
    """Validation failure; ``field`` is a dotted path, ``line`` set for JSON syntax errors."""

    def __init__(self, field_path: str, message: str, line: int = None):
        self.field = field_path
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field_path}: {message}")


def _default_batteries() -> dict:
    out = {c: True for c in COLUMNS}
    out.update({k: False for k in OPTIONAL_CHECKS})
    return out


def _default_grids() -> dict:
    return {"t_grid": None, "lambda_grid": [2.0, 8.0, 32.0], "gram_exponents": list(range(9)),
            "grid_max": 10_000}


@dataclass
class FamilySpec:
    family: dict
    batteries: dict = field(default_factory=_default_batteries)
    grids: dict = field(default_factory=_default_grids)
    polynomials: list = field(default_factory=list)      # LaurentPolynomial
    tolerances: Tolerances = DEFAULTS
    mc: dict = field(default_factory=lambda: {"n": 100_000, "seed": 0})
    schema_version: int = SCHEMA_VERSION

    @property
    def source(self) -> str:
        return self.family["source"]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "family": copy.deepcopy(self.family),
            "batteries": dict(self.batteries),
            "grids": copy.deepcopy(self.grids),
            "polynomials": [p.to_json() for p in self.polynomials],
            "tolerances": self.tolerances.as_dict(),
            "mc": dict(self.mc),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def enabled_columns(self) -> tuple:
        return tuple(c for c in COLUMNS if self.batteries.get(c, False))


# -- matrix encoding ---------------------------------------------------------------

def encode_matrix(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_matrix(rows, path: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise SpecError(path, "expected a non-empty list of rows")
    n = len(rows)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise SpecError(f"{path}[{i}]", f"expected {n} entries (square matrix)")
        for j, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in z)):
                raise SpecError(f"{path}[{i}][{j}]", "expected a [re, im] pair of numbers")
            out[i, j] = complex(z[0], z[1])
    return out


# -- validation helpers ------------------------------------------------------------

def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SpecError(f"{path}.{key}", "missing required field")
    return obj[key]


def _int(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise SpecError(path, f"must be >= {lo}")
    return v


def _num(v, path, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(path, f"expected a number, got {v!r}")
    if positive and not v > 0:
        raise SpecError(path, "must be positive")
    return float(v)


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise SpecError(path, "expected an object")
    for k in obj:
        if k not in allowed:
            raise SpecError(f"{path}.{k}", "unknown field")


def _validate_family(fam) -> dict:
    path = "family"
    if not isinstance(fam, dict):
        raise SpecError(path, "expected an object")
    source = _require(fam, "source", path)
    if source not in SOURCES:
        raise SpecError(f"{path}.source", f"unknown source {source!r}; expected one of {', '.join(SOURCES)}")
    out = {"source": source}
    if source == "explicit":
        _check_keys(fam, {"source", "matrices"}, path)
        mats = _require(fam, "matrices", path)
        if not isinstance(mats, list) or not mats:
            raise SpecError(f"{path}.matrices", "expected a non-empty list of matrices")
        decoded = [decode_matrix(m, f"{path}.matrices[{i}]") for i, m in enumerate(mats)]
        if len({m.shape for m in decoded}) != 1:
            raise SpecError(f"{path}.matrices", "all matrices must have the same size")
        out["matrices"] = [encode_matrix(m) for m in decoded]
    elif source == "tensor":
        _check_keys(fam, {"source", "dims", "seed", "scale"}, path)
        dims = _require(fam, "dims", path)
        if not isinstance(dims, list) or not dims:
            raise SpecError(f"{path}.dims", "expected a non-empty list of block sizes")
        out["dims"] = [_int(k, f"{path}.dims[{i}]", 1) for i, k in enumerate(dims)]
        out["seed"] = _int(fam.get("seed", 0), f"{path}.seed", 0)
        out["scale"] = _num(fam.get("scale", 1.0), f"{path}.scale", positive=True)
    elif source == "diagonal":
        _check_keys(fam, {"source", "d", "dim", "seed", "scale"}, path)
        out["d"] = _int(_require(fam, "d", path), f"{path}.d", 1)
        out["dim"] = _int(_require(fam, "dim", path), f"{path}.dim", 1)
        out["seed"] = _int(fam.get("seed", 0), f"{path}.seed", 0)
        out["scale"] = _num(fam.get("scale", 1.0), f"{path}.scale", positive=True)
    elif source == "counterexample":
        _check_keys(fam, {"source", "d", "dim1", "dim2", "alpha", "seed"}, path)
        out["d"] = _int(_require(fam, "d", path), f"{path}.d", 2)
        out["dim1"] = _int(_require(fam, "dim1", path), f"{path}.dim1", 1)
        out["dim2"] = _int(_require(fam, "dim2", path), f"{path}.dim2", 1)
        if out["dim2"] > out["dim1"]:
            raise SpecError(f"{path}.dim2", "must not exceed dim1")
        out["alpha"] = _num(_require(fam, "alpha", path), f"{path}.alpha")
        lo, hi = 1 / np.sqrt(out["d"]), 1 / np.sqrt(out["d"] - 1)
        if not lo < out["alpha"] < hi:
            raise SpecError(f"{path}.alpha", f"must lie in the open interval ({lo:.6g}, {hi:.6g})")
        out["seed"] = _int(fam.get("seed", 0), f"{path}.seed", 0)
    else:  # ccr
        _check_keys(fam, {"source", "m", "N", "shifts", "weights", "lam"}, path)
        out["m"] = _int(_require(fam, "m", path), f"{path}.m", 1)
        out["N"] = _int(_require(fam, "N", path), f"{path}.N", 1)
        for key in ("shifts", "weights"):
            rows = _require(fam, key, path)
            if not isinstance(rows, list) or not rows or not all(
                    isinstance(r, list) and len(r) == out["m"] for r in rows):
                raise SpecError(f"{path}.{key}", f"expected a list of length-{out['m']} vectors")
        out["shifts"] = [[_int(v, f"{path}.shifts[{i}][{j}]", 0) for j, v in enumerate(r)]
                         for i, r in enumerate(fam["shifts"])]
        out["weights"] = [[_num(v, f"{path}.weights[{i}][{j}]") for j, v in enumerate(r)]
                          for i, r in enumerate(fam["weights"])]
        if len(out["shifts"]) != len(out["weights"]):
            raise SpecError(f"{path}.weights", "need one weight vector per shift vector")
        lam = _require(fam, "lam", path)
        if not isinstance(lam, list) or len(lam) != 2:
            raise SpecError(f"{path}.lam", "expected a [re, im] pair")
        out["lam"] = [_num(lam[0], f"{path}.lam[0]"), _num(lam[1], f"{path}.lam[1]")]
        if out["lam"][0] > 0:
            raise SpecError(f"{path}.lam", "real part must be <= 0")
    return out


def _validate_grids(grids) -> dict:
    path = "grids"
    _check_keys(grids, {"t_grid", "lambda_grid", "gram_exponents", "grid_max"}, path)
    out = _default_grids()
    if grids.get("t_grid") is not None:
        tg = grids["t_grid"]
        if not isinstance(tg, list) or not tg:
            raise SpecError(f"{path}.t_grid", "expected a non-empty list of time vectors")
        out["t_grid"] = []
        for i, t in enumerate(tg):
            if not isinstance(t, list) or not t:
                raise SpecError(f"{path}.t_grid[{i}]", "expected a list of times")
            vec = [_num(v, f"{path}.t_grid[{i}][{j}]") for j, v in enumerate(t)]
            if any(v < 0 for v in vec):
                raise SpecError(f"{path}.t_grid[{i}]", "times must be non-negative")
            out["t_grid"].append(vec)
    if "lambda_grid" in grids:
        lg = grids["lambda_grid"]
        if not isinstance(lg, list) or not lg:
            raise SpecError(f"{path}.lambda_grid", "expected a non-empty list of rates")
        out["lambda_grid"] = [_num(v, f"{path}.lambda_grid[{i}]", positive=True) for i, v in enumerate(lg)]
    if "gram_exponents" in grids:
        ge = grids["gram_exponents"]
        if not isinstance(ge, list) or not ge:
            raise SpecError(f"{path}.gram_exponents", "expected a non-empty list of integers")
        out["gram_exponents"] = [_int(v, f"{path}.gram_exponents[{i}]", 0) for i, v in enumerate(ge)]
    if "grid_max" in grids:
        gm = _num(grids["grid_max"], f"{path}.grid_max", positive=True)
        if gm != int(gm):
            raise SpecError(f"{path}.grid_max", "must be a whole number")
        out["grid_max"] = int(gm)
    return out


def spec_from_dict(obj) -> FamilySpec:
    if not isinstance(obj, dict):
        raise SpecError("<root>", "expected a JSON object")
    _check_keys(obj, {"schema_version", "family", "batteries", "grids", "polynomials", "tolerances", "mc"},
                "<root>")
    version = _int(obj.get("schema_version", SCHEMA_VERSION), "schema_version", 1)
    if version != SCHEMA_VERSION:
        raise SpecError("schema_version", f"unsupported version {version}; this tool reads {SCHEMA_VERSION}")
    family = _validate_family(_require(obj, "family", "<root>"))

    batteries = _default_batteries()
    if "batteries" in obj:
        _check_keys(obj["batteries"], set(batteries), "batteries")
        for k, v in obj["batteries"].items():
            if not isinstance(v, bool):
                raise SpecError(f"batteries.{k}", "expected true or false")
            batteries[k] = v

    grids = _validate_grids(obj.get("grids", {}))

    polys = []
    for i, items in enumerate(obj.get("polynomials", [])):
        path = f"polynomials[{i}]"
        if not isinstance(items, list) or not items:
            raise SpecError(path, "expected a non-empty list of {exponents, coeff} terms")
        for j, term in enumerate(items):
            _check_keys(term, {"exponents", "coeff"}, f"{path}[{j}]")
            ex = _require(term, "exponents", f"{path}[{j}]")
            if not isinstance(ex, list) or not ex:
                raise SpecError(f"{path}[{j}].exponents", "expected a list of integers")
            for k, e in enumerate(ex):
                _int(e, f"{path}[{j}].exponents[{k}]")
            co = _require(term, "coeff", f"{path}[{j}]")
            if not isinstance(co, list) or len(co) != 2:
                raise SpecError(f"{path}[{j}].coeff", "expected a [re, im] pair")
            _num(co[0], f"{path}[{j}].coeff[0]")
            _num(co[1], f"{path}[{j}].coeff[1]")
        try:
            polys.append(LaurentPolynomial.from_json(items))
        except ValueError as exc:
            raise SpecError(path, str(exc)) from None

    tol_obj = obj.get("tolerances", {})
    _check_keys(tol_obj, set(DEFAULTS.as_dict()), "tolerances")
    for k, v in tol_obj.items():
        _num(v, f"tolerances.{k}", positive=True)
    try:
        tolerances = DEFAULTS.with_overrides(**tol_obj)
    except (TypeError, ValueError) as exc:
        raise SpecError("tolerances", str(exc)) from None

    mc = {"n": 100_000, "seed": 0}
    if "mc" in obj:
        _check_keys(obj["mc"], {"n", "seed"}, "mc")
        if "n" in obj["mc"]:
            mc["n"] = _int(obj["mc"]["n"], "mc.n", 1)
        if "seed" in obj["mc"]:
            mc["seed"] = _int(obj["mc"]["seed"], "mc.seed", 0)

    spec = FamilySpec(family, batteries, grids, polys, tolerances, mc, version)
    d = family_dimension(spec)
    for i, p in enumerate(polys):
        if p.d != d:
            raise SpecError(f"polynomials[{i}]", f"has {p.d} variables, the family has {d} members")
    if grids["t_grid"] is not None:
        for i, t in enumerate(grids["t_grid"]):
            if len(t) != d:
                raise SpecError(f"grids.t_grid[{i}]", f"expected {d} times, got {len(t)}")
    return spec


def parse_spec(text: str) -> FamilySpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("<json>", exc.msg, line=exc.lineno) from None
    return spec_from_dict(obj)


def load_spec(path) -> FamilySpec:
    p = Path(path)
    if not p.is_file():
        raise SpecError("--spec", f"no such file: {p}")
    return parse_spec(p.read_text())


def family_dimension(spec: FamilySpec) -> int:
    """Number of family members ``d`` implied by the source."""
    fam = spec.family
    return {
        "explicit": lambda: len(fam.get("matrices", [])),
        "tensor": lambda: len(fam.get("dims", [])),
        "diagonal": lambda: fam["d"],
        "counterexample": lambda: fam["d"],
        "ccr": lambda: len(fam["shifts"]),
    }[fam["source"]]()


def build_family(spec: FamilySpec):
    """``CommutingFamily`` for matrix sources, ``CcrFamily`` for ``ccr``.

    Counterexample construction gates run here, before any battery.
    """
    fam = spec.family
    src = fam["source"]
    tol = spec.tolerances.commutator_tol
    try:
        if src == "explicit":
            mats = [decode_matrix(m, f"family.matrices[{i}]") for i, m in enumerate(fam["matrices"])]
            return CommutingFamily.from_matrices(mats, commutator_tol=tol)
        if src == "tensor":
            return tensor_family(fam["dims"], np.random.default_rng(fam["seed"]), fam["scale"])
        if src == "diagonal":
            return diagonalisable_family(fam["d"], fam["dim"], np.random.default_rng(fam["seed"]), fam["scale"])
        if src == "counterexample":
            return build_counterexample(fam["d"], fam["dim1"], fam["dim2"], fam["alpha"], fam["seed"])
        return build_ccr_family(fam["m"], fam["N"], fam["shifts"], fam["weights"], complex(*fam["lam"]))
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError("family", str(exc)) from None


def counterexample_spec(d: int, dim1: int, dim2: int, alpha: float, seed: int = 0, **kw) -> FamilySpec:
    return FamilySpec({"source": "counterexample", "d": d, "dim1": dim1, "dim2": dim2,
                       "alpha": float(alpha), "seed": seed}, **kw)


def explicit_spec(matrices, **kw) -> FamilySpec:
    return FamilySpec({"source": "explicit", "matrices": [encode_matrix(m) for m in matrices]}, **kw)
