"""Shared brute-force oracles, independent of the package's solvers."""

import numpy as np
import pytest


def golden_min(f, lo, hi, iters=200):
    """Scalar golden-section minimization; exact to floating point."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def simplex_oracle_min(f, n, rounds=50):
    """Brute-force minimizer of a smooth strictly convex ``f`` over the
    n-simplex: coarse grid start, then cyclic golden-section line searches
    in the free coordinates (the last coordinate absorbs the budget)."""
    if n == 2:
        t = golden_min(lambda t: f(np.array([t, 1.0 - t])), 0.0, 1.0)
        return np.array([t, 1.0 - t])
    y = np.full(n, 1.0 / n)
    # coarse start: best of a random-ish deterministic cloud
    grid = np.linspace(0.02, 0.98, 13)
    if n == 3:
        best = np.inf
        for a in grid:
            for b in grid:
                c = 1.0 - a - b
                if c < 0:
                    continue
                v = f(np.array([a, b, c]))
                if v < best:
                    best, y = v, np.array([a, b, c])
    for _ in range(rounds):
        for i in range(n - 1):
            budget = y[i] + y[n - 1]

            def line(t, i=i, budget=budget):
                z = y.copy()
                z[i] = t
                z[n - 1] = budget - t
                return f(z)

            t = golden_min(line, 0.0, budget, iters=60)
            y = y.copy()
            y[n - 1] = budget - t
            y[i] = t
    return y


def entropy_mirror_oracle_2d(x, c):
    """Minimizer of ``<c, y> + KL(y, x)`` on the 2-simplex: bisection on the
    strictly increasing stationarity slope, exact to floating point."""
    def slope(t):
        return c[0] - c[1] + np.log(t / x[0]) - np.log((1.0 - t) / x[1])

    lo, hi = 1e-300, 1.0 - 1e-16
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return np.array([t, 1.0 - t])


def projection_oracle(v):
    """Exact simplex projection by enumerating active sets (small dims)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    best, best_dist = None, np.inf
    for mask in range(1, 2**n):
        support = [i for i in range(n) if mask >> i & 1]
        shift = (v[support].sum() - 1.0) / len(support)
        y = np.zeros(n)
        y[support] = v[support] - shift
        if np.min(y[support]) < -1e-12:
            continue
        dist = float(np.sum((y - v) ** 2))
        if dist < best_dist:
            best, best_dist = y, dist
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
