"""Time the compiled kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--samples 100000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from maskgame import _kernels_py
from maskgame.generator import generate_structured_instance

try:
    from maskgame import _kernels as _compiled
except ImportError:
    _compiled = None


def workloads(samples, seed):
    game = generate_structured_instance(20, 1, 20, 3, seed)
    rng = np.random.default_rng(seed)
    X = game.sample(rng, samples)
    Y = rng.integers(0, 2, X.shape).astype(np.int8)
    Y[:, :6] = 0  # coarse observations give realistic group counts
    obs = np.ascontiguousarray(X * Y)
    inverse, first = _kernels_py.group_rows(obs)
    gains = game.attack_weights(X)
    allowed = game.allowed
    return {
        "group_rows": lambda k: k.group_rows(obs),
        "group_argmax": lambda k: k.group_argmax(inverse, gains, len(first)),
        "match_table": lambda k: k.match_table(X, allowed),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':<14}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, run in workloads(args.samples, args.seed).items():
        py = min(timeit.repeat(lambda: run(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _compiled is None:
            print(f"{name:<14}{py:12.2f}{'-':>12}{'-':>10}")
            continue
        cy = min(timeit.repeat(lambda: run(_compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<14}{py:12.2f}{cy:12.2f}{py / cy:9.1f}x")


if __name__ == "__main__":
    main()
