"""Compare the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_core.py [--repeat N] [--json out.json]

Times the two per-round hot paths, kernel-expansion prediction and
random-feature evaluation, for both backends. It also reports the
feature-map cost ratio when D is halved, which should sit near 0.5.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from okselect import _pycore

try:
    from okselect import _core
except ImportError:
    _core = None


def _best(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_expansion(mod, n, d, repeat):
    rng = np.random.default_rng(0)
    points = rng.uniform(-1, 1, (n, d))
    coefs = rng.normal(size=n)
    x = rng.uniform(-1, 1, d)
    return _best(lambda: mod.expansion_predict(points, coefs, n, x, 0.5), 200, repeat)


def bench_rff(mod, D, d, repeat):
    rng = np.random.default_rng(1)
    freqs = rng.normal(size=(D, d))
    phases = rng.uniform(0, 2 * np.pi, D)
    x = rng.uniform(-1, 1, d)
    out = np.empty(D)
    scale = np.sqrt(2.0 / D)
    return _best(lambda: mod.rff_features(freqs, phases, x, scale, out), 500, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    backends = {"python": _pycore}
    if _core is not None:
        backends["cython"] = _core
    else:
        print("compiled extension not built; timing the numpy fallback only", file=sys.stderr)

    rows = []
    for n in (10, 100, 1000, 5000):
        rows.append(("expansion_predict", n, {k: bench_expansion(m, n, args.dim, args.repeat)
                                              for k, m in backends.items()}))
    for D in (100, 400, 2000, 8000, 16000):
        rows.append(("rff_features", D, {k: bench_rff(m, D, args.dim, args.repeat)
                                         for k, m in backends.items()}))

    names = list(backends)
    print(f"{'kernel':<18} {'size':>6} " + " ".join(f"{n + ' (us)':>14}" for n in names)
          + ("   speedup" if len(names) == 2 else ""))
    for kernel, size, t in rows:
        line = f"{kernel:<18} {size:>6} " + " ".join(f"{1e6 * t[n]:>14.2f}" for n in names)
        if len(names) == 2:
            line += f"   {t['python'] / t['cython']:>7.2f}x"
        print(line)

    rff = {size: t for kernel, size, t in rows if kernel == "rff_features"}
    print()
    for n in names:
        print(f"{n}: feature cost ratio D=8000 vs D=16000: {rff[8000][n] / rff[16000][n]:.2f}")

    if args.json:
        with open(args.json, "w") as fh:
            json.dump([{"kernel": k, "size": s, "seconds": t} for k, s, t in rows], fh, indent=2)


if __name__ == "__main__":
    main()
