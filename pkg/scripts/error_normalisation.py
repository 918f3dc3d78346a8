"""Compare error normalisations on the all-zero setting.

Prints the mean MLE/MME errors under the full 2p-vector l2/sqrt(p), l2/sqrt(2p)
and the per-block l2/sqrt(p) conventions next to the reference row
(0.074, 0.219, 0.071, 0.212) for (n, p) = (20, 200).
"""
import argparse
import warnings

from twhm.bench import ERROR_KEYS, ParamSetting, run_error_benchmark

REFERENCE = {"mme_l2": 0.074, "mme_linf": 0.219, "mle_l2": 0.071, "mle_linf": 0.212}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("-n", type=int, default=20)
    ap.add_argument("-p", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    C0 = ParamSetting("const", 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mme, mle, _ = run_error_benchmark(C0, C0, args.n, args.p, args.reps, seed=args.seed)
    print(f"{'metric':10s} {'MME':>8s} {'MLE':>8s}")
    for k in ERROR_KEYS:
        print(f"{k:10s} {mme.mean(k):8.4f} {mle.mean(k):8.4f}")
    print("reference  " + "  ".join(f"{k}={v}" for k, v in REFERENCE.items()))


if __name__ == "__main__":
    main()
