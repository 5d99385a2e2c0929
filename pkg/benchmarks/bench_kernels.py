"""Compiled vs numpy kernels on the two hot loops.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Times typical-pair enumeration (``scan_pairs``, via lemma verification) and
first-match encoding (``encode_first``, via random coding) with each available
backend and checks that both produce identical results.
"""

import argparse
import time

import numpy as np

from wisense import infotheory as it
from wisense.kernels import BACKENDS


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    src = it.random_source(np.random.default_rng(3), 3, 3, n_states=2, dependence=0.6)
    cod = it.symmetric_source(3, 0.1, n_states=3, history_strength=0.8)
    cases = {
        "scan_pairs (lemma 2, n=5)": lambda b: it.verify_lemma2(src, it.TypicalParams(5, 0.3), backend=b).typical_pairs,
        "encode_first (200 trials, n=12)": lambda b: it.simulate_random_coding(
            cod, it.TypicalParams(12, 0.25), 1.6, 200, seed=1, backend=b).distortions.sum(),
    }
    print(f"backends: {', '.join(sorted(BACKENDS))}")
    for label, fn in cases.items():
        res = {b: best_of(lambda: fn(b), args.repeat) for b in sorted(BACKENDS)}
        line = "  ".join(f"{b} {t * 1e3:9.1f} ms" for b, (t, _) in res.items())
        if "cython" in res:
            line += f"  speedup {res['python'][0] / res['cython'][0]:5.1f}x"
            assert res["python"][1] == res["cython"][1], "backends disagree"
        print(f"{label:34s} {line}")


if __name__ == "__main__":
    main()
