"""Time the numba and numpy kernel backends on a planted graph.

    python benchmarks/bench_kernels.py --n 2000 --repeats 3
"""

import argparse
import time

import numpy as np

from cagm import kernels
from cagm.evaluation import louvain
from cagm.graph import structural_census
from cagm.params import fit
from cagm.sampler import sample_graph
from cagm.synthetic import planted_partition


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--communities", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    size = args.n / args.communities
    G, P = planted_partition(n=args.n, n_communities=args.communities, p_in=10 / size,
                             p_out=1.5 / (args.n - size), closure=0.5, rng=np.random.default_rng(args.seed))
    params = fit(G, P)
    print(f"graph: n={G.n} m={G.m} communities={args.communities}")

    backends = ["numba", "numpy"] if kernels.HAVE_NUMBA else ["numpy"]
    cases = {
        "triangle census": lambda: structural_census(G, P),
        "sample_graph": lambda: sample_graph(params, np.random.default_rng(args.seed)),
        "louvain": lambda: louvain(G, np.random.default_rng(args.seed)),
    }
    results = {}
    for name in backends:
        kernels.set_backend(name)
        for case, fn in cases.items():
            fn()  # warm-up, includes JIT compilation
            results[case, name] = best_of(fn, args.repeats)

    print(f"{'kernel':18s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for case in cases:
        row = f"{case:18s}" + "".join(f"{results[case, b]:11.3f}s" for b in backends)
        if len(backends) == 2:
            row += f"{results[case, 'numpy'] / results[case, 'numba']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
