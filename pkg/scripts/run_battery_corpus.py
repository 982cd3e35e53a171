"""Run the equivalence battery over the seeded family corpus and write a CSV of verdicts.

    python3 scripts/run_battery_corpus.py --out corpus.csv --threads 4
"""
import argparse
import csv
import time
from dataclasses import dataclass

import numpy as np

from dilationlab.battery import COLUMNS, BatteryConfig, run_equivalence_battery
from dilationlab.families import build_counterexample, diagonalisable_family, tensor_family

SHAPES = [[2], [3], [4], [2, 2], [2, 3], [3, 2], [2, 4], [4, 2], [2, 2, 2]]


@dataclass
class CorpusConfig:
    families: int = 52
    base_seed: int = 1000
    grid_max: int = 10_000
    threads: int = 1


def corpus(cfg: CorpusConfig):
    """Doubly commuting PASS cases (tensor and normal families) plus the block counterexamples."""
    for k in range(cfg.families):
        rng = np.random.default_rng(cfg.base_seed + k)
        if k % 2 == 0:
            dims = SHAPES[(k // 2) % len(SHAPES)]
            yield f"tensor{dims}", "PASS", tensor_family(dims, rng)
        else:
            d, dim = 1 + (k // 2) % 3, 2 + (k // 2) % 7
            yield f"diagonal(d={d},dim={dim})", "PASS", diagonalisable_family(d, dim, rng)
    yield "counterexample(d=2,alpha=0.8)", "FAIL", build_counterexample(2, 4, 2, 0.8, seed=1)
    yield "counterexample(d=3,alpha=0.65)", "FAIL", build_counterexample(3, 4, 2, 0.65, seed=1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="battery_corpus.csv")
    ap.add_argument("--families", type=int, default=CorpusConfig.families)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = CorpusConfig(families=args.families, threads=args.threads)
    bcfg = BatteryConfig(grid_max=cfg.grid_max, threads=cfg.threads)
    header = ["family", "dim", "d", "expected", *COLUMNS, "agreement", "seconds"]
    disagreements = 0
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for name, expected, fam in corpus(cfg):
            start = time.perf_counter()
            res = run_equivalence_battery(fam, bcfg)
            dt = time.perf_counter() - start
            disagreements += not res.agreement
            w.writerow([name, fam.dim, fam.d, expected, *(res.verdicts[c] for c in COLUMNS), res.agreement,
                        f"{dt:.3f}"])
            print(f"{name:32s} {res.overall}  agree={res.agreement}  {dt:.2f}s")
    print(f"wrote {args.out}; {disagreements} disagreements")
    return 1 if disagreements else 0


if __name__ == "__main__":
    raise SystemExit(main())
