"""Write example FamilySpec files for the ``analyze`` command.

    python3 scripts/make_example_specs.py specs/
"""
import argparse
from pathlib import Path

from dilationlab.spec_io import FamilySpec, counterexample_spec, spec_from_dict


def example_specs() -> dict:
    return {
        "counterexample_d2.json": counterexample_spec(2, 4, 2, 0.8, seed=1),
        "counterexample_d3.json": counterexample_spec(3, 4, 2, 0.65, seed=1),
        "tensor_2x3.json": FamilySpec({"source": "tensor", "dims": [2, 3], "seed": 7, "scale": 1.0}),
        "diagonal_optional_checks.json": spec_from_dict({
            "family": {"source": "diagonal", "d": 2, "dim": 3, "seed": 3},
            "batteries": {"subsets": True, "transfer": True, "convergence": True, "mc_identities": True},
            "mc": {"n": 20000, "seed": 5}}),
        "ccr_m2_n6.json": spec_from_dict({
            "family": {"source": "ccr", "m": 2, "N": 6, "shifts": [[1, 0], [1, 1]],
                       "weights": [[0.2, 0.5], [0.4, 0.1]], "lam": [-0.3, 0.7]}}),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", nargs="?", default="specs")
    out = Path(ap.parse_args().outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in example_specs().items():
        (out / name).write_text(spec.to_json())
        print(out / name)


if __name__ == "__main__":
    main()
