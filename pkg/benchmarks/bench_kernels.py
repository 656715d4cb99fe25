"""Compare the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on both
backends with identical inputs; outputs are checked for agreement before
timing so a speedup never hides a wrong answer.
"""

import argparse
import sys
import timeit

import numpy as np

from psi_lab.kernels import available_backends


def _cases(n_pix, atoms_per_pixel):
    rng = np.random.default_rng(0)
    counters = rng.integers(0, 2**63, size=(n_pix, 4), dtype=np.uint64)
    trials = np.full(n_pix, atoms_per_pixel, dtype=np.int64)
    prob = rng.uniform(0.0, 1.0, n_pix)
    x = np.linspace(-1.0, 1.0, n_pix)
    f = np.exp(-0.5 * (x / 0.3) ** 2) * 1e3
    p = 0.5 * f * (1.0 + 0.5 * np.cos(20.0 * x + 0.3))
    return {
        "philox4x64": lambda m: m.philox4x64(counters, (12345, 678)),
        "binomial_counts": lambda m: m.binomial_counts(trials, prob, 99),
        "fringe_normal_equations": lambda m: m.fringe_normal_equations(x, f, p, 20.1, 0.31, 0.49),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    # summation order differs between backends; compare on the array's own scale
    return bool(np.max(np.abs(a - b), initial=0.0) <= 1e-12 * max(np.max(np.abs(a), initial=0.0), 1e-300))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=16384)
    ap.add_argument("--atoms", type=int, default=20, help="trials per pixel for binomial_counts")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the python backend is available", file=sys.stderr)
    cases = _cases(args.pixels, args.atoms)
    print(f"{'kernel':<26}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for label, call in cases.items():
        outs = {name: call(mod) for name, mod in backends.items()}
        ref = outs["python"]
        for name, out in outs.items():
            if not _same(out, ref):
                raise SystemExit(f"{label}: {name} backend disagrees with python")
        times = {}
        for name, mod in backends.items():
            number = 3 if name == "python" else 20
            t = min(timeit.repeat(lambda: call(mod), number=number, repeat=args.repeat)) / number
            times[name] = t
        row = f"{label:<26}" + "".join(f"{times[n] * 1e3:>11.3f} ms" for n in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
