"""Time the pair-interaction accumulator: compiled extension vs pure NumPy.

Run from the repo root after installing the package:

    python3 benchmarks/bench_kernel.py
    python3 benchmarks/bench_kernel.py --sizes 200,400,800 --repeats 5

Each row reports the best-of-repeats wall time for one full evaluation of
the empirical diffusion/drift fields (all n targets against all n sources)
and the speedup of the compiled path over the fallback.
"""

import argparse
import time

import numpy as np

from landausim import compiled_available, pair_fields
from landausim.kernels import KernelSpec

FAMILIES = {
    "maxwell": lambda d: KernelSpec.maxwell(dim=d),
    "pseudo_maxwell": lambda d: KernelSpec.pseudo_maxwell(dim=d),
    "soft": lambda d: KernelSpec.soft(dim=d, gamma=-1.0),
}


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,200,400,800",
                    help="comma-separated particle counts")
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--families", default="maxwell,soft",
                    help="subset of %s" % ",".join(FAMILIES))
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    families = [f.strip() for f in args.families.split(",")]
    for fam in families:
        if fam not in FAMILIES:
            ap.error("unknown family %r" % fam)
    if not compiled_available():
        print("note: compiled extension not built -- timing the fallback only")

    rng = np.random.default_rng(args.seed)
    print("%-16s %6s %12s %12s %9s" % ("family", "n", "compiled", "pure", "speedup"))
    for fam in families:
        spec = FAMILIES[fam](args.dim)
        for n in sizes:
            states = rng.standard_normal((n, args.dim))
            exclude = np.arange(n, dtype=np.int64)
            row = ["%-16s %6d" % (fam, n)]
            t_pure = best_time(
                lambda: pair_fields(spec, states, states, exclude=exclude,
                                    impl="pure"),
                args.repeats)
            if compiled_available():
                t_comp = best_time(
                    lambda: pair_fields(spec, states, states, exclude=exclude,
                                        impl="compiled"),
                    args.repeats)
                row.append("%10.1f ms %10.1f ms %8.1fx"
                           % (t_comp * 1e3, t_pure * 1e3, t_pure / t_comp))
            else:
                row.append("%12s %10.1f ms %9s" % ("--", t_pure * 1e3, "--"))
            print(" ".join(row))

    if compiled_available():
        # sanity: both paths must agree bitwise-closely on the same inputs
        spec = FAMILIES[families[0]](args.dim)
        states = rng.standard_normal((64, args.dim))
        a_c, b_c, _ = pair_fields(spec, states, states, impl="compiled")
        a_p, b_p, _ = pair_fields(spec, states, states, impl="pure")
        err = max(np.abs(a_c - a_p).max(), np.abs(b_c - b_p).max())
        print("max |compiled - pure| on a shared input: %.3e" % err)


if __name__ == "__main__":
    main()
