import itertools
import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from srad import clustering  # noqa: E402

_ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(clustering.KERNELS))
def kernel(request):
    """Name of each available k-means backend."""
    return request.param


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _record(name, passed, detail=""):
        _ACCEPTANCE_LINES.append((name, bool(passed), detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


# ---------------------------------------------------------------- oracles


def brute_force_2partition(points):
    """Exhaustive minimum SSE over all 2-partitions with both parts non-empty."""
    points = np.asarray(points, dtype=float)
    m = len(points)
    best, best_labels = np.inf, None
    # fix point 0 in part 0 so each partition is seen once
    for rest in itertools.product((0, 1), repeat=m - 1):
        labels = np.array((0,) + rest)
        if labels.sum() == 0:
            continue
        total = 0.0
        for c in (0, 1):
            grp = points[labels == c]
            total += float(((grp - grp.mean(axis=0)) ** 2).sum())
        if total < best:
            best, best_labels = total, labels
    return best, best_labels


def pairwise_auc(scores, labels):
    """O(N^2) Mann-Whitney AUC with half credit for ties."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def central_difference(f, params, h=1e-5):
    """Central finite differences of scalar ``f(params)`` for a dict of arrays."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            fp = f(params)
            p[idx] = orig - h
            fm = f(params)
            p[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        out[name] = g
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for name in analytic:
        a, n = np.asarray(analytic[name]), np.asarray(numeric[name])
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
