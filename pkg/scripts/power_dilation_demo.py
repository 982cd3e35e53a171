"""Dilate T(h) of a dissipative generator to a unitary and compare compressed powers with T(kh).

    python3 scripts/power_dilation_demo.py --dim 3 --horizon 16 --step 0.25
"""
import argparse

import numpy as np

from dilationlab.dilation import finite_power_dilation
from dilationlab.families import random_dissipative
from dilationlab.linalg import matrix_exponential, operator_norm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--horizon", type=int, default=16)
    ap.add_argument("--step", type=float, default=0.25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    A = random_dissipative(args.dim, np.random.default_rng(args.seed))
    S = matrix_exponential(A, args.step)
    dil = finite_power_dilation(S, args.horizon)
    P, U = dil.embedding, dil.U
    print(f"|S| = {operator_norm(S):.6f}, U is {U.shape[0]}x{U.shape[0]}, "
          f"unitarity residual {dil.unitarity_residual:.2e}")
    print(f"{'k':>3} {'t = k h':>8} {'|P* U^k P - T(t)|':>20} {'|T(t)|':>10}")
    Uk = np.eye(U.shape[0], dtype=complex)
    for k in range(args.horizon + 1):
        T = matrix_exponential(A, k * args.step)
        print(f"{k:3d} {k * args.step:8.3f} {operator_norm(P.conj().T @ Uk @ P - T):20.2e} {operator_norm(T):10.6f}")
        Uk = U @ Uk
    return 0 if dil.compression_residual <= 1e-8 else 1


if __name__ == "__main__":
    raise SystemExit(main())
