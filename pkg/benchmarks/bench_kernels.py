"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 3]

Prints the best-of-``repeat`` wall time per kernel and the speed-up, and
checks that both backends return the same numbers.
"""
import argparse
import time

import numpy as np

from drlcov import kernels
from drlcov.embed import TSNEConfig, squared_distances


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, rng):
    X = rng.normal(size=(n, 4))
    sq = np.ascontiguousarray(squared_distances(X))
    Y = np.ascontiguousarray(rng.normal(size=(n, 2)))
    P = rng.random((n, n))
    P = P + P.T
    np.fill_diagonal(P, 0.0)
    P = np.ascontiguousarray(P / P.sum())
    pts = np.ascontiguousarray(rng.random((n * 50, 2)))
    states = rng.uniform(-0.2, 0.2, size=(2000, 4))
    cfg = TSNEConfig()

    def cart(k):
        def run():
            for s in states:
                k.cartpole_step(*s, 10.0, 9.8, 1.0, 0.1, 0.5, 0.02, True)
        return run

    return {
        f"affinities n={n}": lambda k: lambda: k.conditional_affinities(sq, cfg.perplexity, 1e-5, 200)[0],
        f"gradient n={n}": lambda k: lambda: k.tsne_gradient(Y, P, 1.0, False, 0.0)[0],
        f"gradient+KL n={n}": lambda k: lambda: k.tsne_gradient(Y, P, 1.0, True, 0.0)[1],
        "cartpole 2000 steps": lambda k: cart(k),
        f"vote {n * 50} pts": lambda k: lambda: k.vote_flat(pts, 50),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="t-SNE sample count")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled backend not built; only the python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in names) + ("  speed-up" if len(names) > 1 else ""))
    for label, make in cases(args.n, rng).items():
        row, outs = [], []
        for name in names:
            t, out = best_of(make(kernels.get_backend(name)), args.repeat)
            row.append(t)
            outs.append(out)
        if len(outs) == 2 and outs[0] is not None:
            np.testing.assert_allclose(np.asarray(outs[0]), np.asarray(outs[1]), rtol=1e-10, atol=1e-14)
        line = f"{label:<24}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row)
        if len(row) == 2:
            line += f"  {row[1] / row[0]:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
