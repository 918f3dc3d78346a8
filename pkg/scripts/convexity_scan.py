"""Smallest Hessian eigenvalue along the segment from 0 to the truth.

Shows where the sample loss turns convex for a constant (beta0*, beta1*)
cell; prints ``t lambda_min`` for theta = t * theta*.
"""
import argparse

import numpy as np

from twhm.model import ParamVector
from twhm.objective import expected_hessian, hessian, smallest_eigenvalue, sufficient_stats
from twhm.simulate import SimConfig, simulate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--beta0", type=float, default=1.0)
    ap.add_argument("--beta1", type=float, default=1.0)
    ap.add_argument("-p", type=int, default=400)
    ap.add_argument("-n", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=11)
    args = ap.parse_args()
    truth = ParamVector(np.full(args.p, args.beta0), np.full(args.p, args.beta1))
    stats = sufficient_stats(simulate(SimConfig(truth, args.n, args.seed)))
    print("t sample expected")
    for t in np.linspace(0, 1, args.steps):
        th = ParamVector(t * truth.beta0, t * truth.beta1)
        s = smallest_eigenvalue(hessian(th, stats))
        e = smallest_eigenvalue(expected_hessian(th, truth, args.n))
        print(f"{t:.2f} {s:+.5f} {e:+.5f}")


if __name__ == "__main__":
    main()
