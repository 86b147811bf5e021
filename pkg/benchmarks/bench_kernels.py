"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from evtraj import kernels
from evtraj.predictor.network import ModelConfig


def cases(rng):
    cfg = ModelConfig()
    raw = rng.normal(0, 1, (64, cfg.n_outputs))
    gt = rng.normal(0, 5, (64, cfg.horizon, 2))
    head_args = (raw, gt, cfg.n_modes, cfg.horizon, 0.01, 0.1, 1.0, 1.0, 0.1, 1.01, kernels.REG_EQ4)
    x = rng.uniform(0.5, 50, 100_000)
    gamma = raw[:, :cfg.n_nig].reshape(64, cfg.n_modes, cfg.horizon, 2, 4)[..., 0]
    return {
        "head_loss (B=64, K=5, T'=30)": lambda m: m.head_loss(*head_args),
        "winner_modes (B=64)": lambda m: m.winner_modes(gamma, gt),
        "lgamma (1e5)": lambda m: m.lgamma(x),
        "digamma (1e5)": lambda m: m.digamma(x),
        "trigamma (1e5)": lambda m: m.trigamma(x),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    backends = kernels.backends()
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    header = f"{'kernel':<30}" + "".join(f"{name + ' ms':>14}" for name in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for label, fn in cases(rng).items():
        times = {}
        for name, mod in backends.items():
            fn(mod)  # warm up
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        line = f"{label:<30}" + "".join(f"{t:>14.3f}" for t in times.values())
        if "compiled" in times:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
