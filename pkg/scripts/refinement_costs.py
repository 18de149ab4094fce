"""Mean SK and output-error costs per iteration (closed form, then SK, then LM).

    python scripts/refinement_costs.py --out out/mean_costs.csv
"""
import argparse
import csv
import time

import numpy as np

from mrfrf.config import load_config
from mrfrf.experiment import comparison, synthesize
from mrfrf.estimator import identify_frf
from mrfrf.refine import aggregate_traces, refine_frf
from mrfrf.signals import dft

DEFAULT_CONFIG = __file__.rsplit("/scripts/", 1)[0] + "/configs/benchmark.toml"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=DEFAULT_CONFIG)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    data = synthesize(cfg)
    U, Y = dft(data.u_h), dft(data.y_l)
    t0 = time.perf_counter()
    est, traces = refine_frf(U, Y, cfg.estimator, cfg.refine, threads=args.threads)
    elapsed = time.perf_counter() - t0
    mu_sk, mu_oe = aggregate_traces(traces)
    n_sk = max(sum(p == "SK" for p in t.phase) for t in traces if t is not None)
    print(f"refinement took {elapsed:.1f} s")
    print(f"mu_OE closed form {mu_oe[0]:.4g}, after SK {mu_oe[min(n_sk, len(mu_oe) - 1)]:.4g}, "
          f"final {mu_oe[-1]:.4g} ({100 * (1 - mu_oe[-1] / mu_oe[0]):.1f}% lower)")
    closed = identify_frf(U, Y, cfg.estimator)
    n = cfg.number_of_input_samples // 2
    curves = comparison(data.G_true, {"LRM": closed, "LRM+SK+LM": est})
    print("cumulative FRF error at n=%d: closed form %.4g, refined %.4g"
          % (n, curves["LRM"][n], curves["LRM+SK+LM"][n]))

    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "mu_SK", "mu_OE"])
            w.writerows(zip(range(len(mu_oe)), np.round(mu_sk, 12), np.round(mu_oe, 12)))


if __name__ == "__main__":
    main()
