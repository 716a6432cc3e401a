"""Time each hot kernel under the numba and numpy backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are called directly through ``_kernels.KERNELS`` on the
same inputs, so one process measures both. The numba variants are
compiled once before timing. Outputs are compared for equality.
"""

import argparse
import time

import numpy as np

from qevote import _kernels


def cases(rng):
    n = 8
    amps = rng.normal(size=(2048, 2 ** n)) + 1j * rng.normal(size=(2048, 2 ** n))
    gates = rng.normal(size=(2048, n, 2, 2)) + 1j * rng.normal(size=(2048, n, 2, 2))
    p = rng.integers(0, 2, size=(200_000, 6), dtype=np.uint8)
    free = rng.integers(0, 2, size=(200_000, 6, 5), dtype=np.uint8)
    probs = rng.random((200_000, 16))
    probs /= probs.sum(axis=1, keepdims=True)
    u = rng.random(200_000)
    return {
        "apply_local_gates (2048 x 8 qubits)": ("apply_local_gates", (amps, gates)),
        "or_repetitions (200k reps, N=6)": ("or_repetitions", (p, free)),
        "sample_indices (200k rows x 16)": ("sample_indices", (probs, u)),
    }


def best_time(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    backends = sorted(_kernels.KERNELS)
    print(f"backends: {', '.join(backends)} (default in this process: {_kernels.BACKEND})")
    print(f"{'kernel':40s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup  agree")
    for label, (name, inputs) in cases(rng).items():
        times, outs = {}, {}
        for b in backends:
            fn = _kernels.KERNELS[b][name]
            fn(*inputs)  # compile / warm caches
            times[b], outs[b] = best_time(fn, inputs, args.repeat)
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        agree = all(same(outs[b], outs[backends[0]]) for b in backends)
        print(f"{label:40s} " + " ".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
              + f"   {speed:6.2f}x  {agree}")


if __name__ == "__main__":
    main()
