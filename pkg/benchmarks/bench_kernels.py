"""Compare the compiled and numpy kernel backends on batched per-cell work.

    python benchmarks/bench_kernels.py [--cells 262144] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from twinforge import _kernels_py as python_backend
from twinforge import kernels


def inputs(cells, seed=0):
    rng = np.random.default_rng(seed)
    M = np.ascontiguousarray(np.einsum("ni,nj->nij", rng.normal(size=(cells, 3)), rng.normal(size=(cells, 3))))
    side = round(cells ** (1 / 3))
    n = rng.normal(size=(side, side, side, 3))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return M, n, np.ones(n.shape[:3], dtype=bool)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=64 ** 3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    M, n, active = inputs(args.cells)
    backends = {"python": python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled extension not available; timing the numpy backend only")

    cases = {
        "det_batch": lambda b: b.det_batch(M),
        "cofactor_batch": lambda b: b.cofactor_batch(M),
        "rank_one_fit_batch": lambda b: b.rank_one_fit_batch(M),
        "orient_signs": lambda b: b.orient_signs(n, active),
    }
    print(f"{args.cells} cells, best of {args.repeat}")
    print(f"{'kernel':<20}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for case, fn in cases.items():
        best = {name: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for name, b in backends.items()}
        row = f"{case:<20}" + "".join(f"{t * 1e3:>10.2f}ms" for t in best.values())
        if "cython" in best:
            row += f"{best['python'] / best['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
