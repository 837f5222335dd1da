"""One joint model over coupled processes vs one model per process."""

import argparse
import time

from arrivalnet.experiments import joint_experiment

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--coupling", type=float, default=0.6)
    args = ap.parse_args()
    t0 = time.perf_counter()
    out = joint_experiment(args.seed, coupling=args.coupling)
    print(f"mean AUC  joint {out['joint']:.4f}  single {out['single']:.4f}")
    print(f"{time.perf_counter() - t0:.0f}s")
