"""Independent reference implementations used by the tests."""
import itertools
from fractions import Fraction

import numpy as np


def sse_float(values, bounds):
    """Right-folded within-segment SSE using the same centred prefix-sum
    arithmetic as the DP, so totals can be compared bit for bit."""
    v = np.asarray(values, dtype=float)
    v = v - v.mean()
    c1 = np.concatenate(([0.0], np.cumsum(v)))
    c2 = np.concatenate(([0.0], np.cumsum(v * v)))
    starts = [0, *bounds[:-1]]
    costs = []
    for i, j in zip(starts, bounds):
        m = j - i
        s = c1[j] - c1[i]
        costs.append((c2[j] - c2[i]) - s * s / m)
    total = costs[-1]
    for c in reversed(costs[:-1]):
        total = c + total
    return total


def sse_exact(values, bounds):
    """Exact rational SSE of a partition."""
    v = [Fraction(x) for x in values]
    total = Fraction(0)
    for i, j in zip([0, *bounds[:-1]], bounds):
        seg = v[i:j]
        mean = sum(seg) / len(seg)
        total += sum((x - mean) ** 2 for x in seg)
    return total


def exhaustive_segmentation(values, k, cost=sse_float):
    """Best partition into k segments by enumerating every cut set in
    lexicographic order; the first strict minimum wins ties."""
    n = len(values)
    best, best_bounds = None, None
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = [*cuts, n]
        c = cost(values, bounds)
        if best is None or c < best:
            best, best_bounds = c, bounds
    return best, best_bounds


def acf_direct(values, max_lag):
    """Autocorrelation straight from the definition, one explicit sum per lag."""
    x = [float(v) for v in values]
    n = len(x)
    mean = sum(x) / n
    c0 = sum((a - mean) ** 2 for a in x) / n
    out = [1.0]
    for k in range(1, max_lag + 1):
        ck = sum((x[t] - mean) * (x[t + k] - mean) for t in range(n - k)) / n
        out.append(ck / c0)
    return np.array(out)


def pacf_regression(values, max_lag):
    """Partial autocorrelation at lag k as the last coefficient of a
    least-squares regression of x_t on x_{t-1}..x_{t-k}.

    The demeaned series is zero-padded on both sides (the windowed form), so
    the normal equations are the Toeplitz Yule-Walker system of the biased
    autocovariances.
    """
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    n = x.size
    out = [1.0]
    for k in range(1, max_lag + 1):
        padded = np.concatenate((np.zeros(k), x, np.zeros(k)))
        rows = n + k
        y = padded[k:k + rows]
        X = np.column_stack([padded[k - j:k - j + rows] for j in range(1, k + 1)])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        out.append(coef[-1])
    return np.array(out)


def simulate_arma(rng, n, ar=(), ma=(), sigma=1.0, burn=200):
    p, q = len(ar), len(ma)
    e = rng.standard_normal(n + burn) * sigma
    x = np.zeros(n + burn)
    for t in range(n + burn):
        acc = e[t]
        for i in range(p):
            if t - 1 - i >= 0:
                acc += ar[i] * x[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                acc += ma[j] * e[t - 1 - j]
        x[t] = acc
    return x[burn:]
