"""Compare the compiled and numpy k-means kernels.

    python benchmarks/bench_kmeans.py --repeats 200
    python benchmarks/bench_kmeans.py --fit          # also time a full training run per backend

The ``--fit`` mode runs each backend in a fresh interpreter because the
backend is chosen once at import time.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from srad import clustering

_FIT_SNIPPET = """
import json, time
from srad import clustering
from srad.ingest import SyntheticConfig, generate_synthetic
from srad.objective import Hyperparameters
from srad.train import TrainConfig, fit
train, _, _ = generate_synthetic(SyntheticConfig(seed=0))
hp = Hyperparameters(learning_rate=1e-3, hidden_width=32, dropout_rate=0.3, epochs={epochs}, seed=0)
t0 = time.perf_counter()
fit(train, TrainConfig(hp))
print(json.dumps({{"backend": clustering.BACKEND, "seconds": time.perf_counter() - t0}}))
"""


def bench_kernel(fn, shapes, restarts, repeats, seed):
    rng = np.random.default_rng(seed)
    cases = [(rng.normal(size=s), rng.random((restarts, 2))) for s in shapes]
    t0 = time.perf_counter()
    for _ in range(repeats):
        for X, u in cases:
            fn(X, u, 100, 1e-6)
    return (time.perf_counter() - t0) / (repeats * len(cases))


def bench_fit(epochs):
    out = {}
    for forced in ("0", "1"):
        env = dict(os.environ, SRAD_PURE_PYTHON=forced, OPENBLAS_NUM_THREADS="1", OMP_NUM_THREADS="1")
        proc = subprocess.run([sys.executable, "-c", _FIT_SNIPPET.format(epochs=epochs)],
                              env=env, capture_output=True, text=True, check=True)
        rec = json.loads(proc.stdout.strip().splitlines()[-1])
        out[rec["backend"]] = rec["seconds"]
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--restarts", type=int, default=10)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fit", action="store_true", help="also time full training runs")
    ap.add_argument("--epochs", type=int, default=100)
    args = ap.parse_args(argv)

    shapes = [(m, args.hidden) for m in (8, 12, 16)]
    print(f"kernels available: {', '.join(sorted(clustering.KERNELS))} (default {clustering.BACKEND})")
    timings = {}
    for name, fn in sorted(clustering.KERNELS.items()):
        timings[name] = bench_kernel(fn, shapes, args.restarts, args.repeats, args.seed)
        print(f"{name:>8}: {timings[name] * 1e6:9.1f} us per kmeans2 call "
              f"(m in 8..16, H={args.hidden}, restarts={args.restarts})")
    if len(timings) == 2:
        print(f"speedup: {timings['python'] / timings['cython']:.1f}x")

    if args.fit:
        secs = bench_fit(args.epochs)
        for name, s in sorted(secs.items()):
            print(f"{name:>8}: {s:6.2f} s for a {args.epochs}-epoch synthetic training run")
    return 0


if __name__ == "__main__":
    sys.exit(main())
