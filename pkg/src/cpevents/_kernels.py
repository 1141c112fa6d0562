"""Hot numeric kernels.

Every kernel has a loop form (compiled with numba when available) and a
vectorised numpy/scipy form. Both forms are importable so tests and the
benchmark can compare them; the module-level names point at the active one.
"""
import numpy as np
from scipy.signal import lfilter

from ._accel import HAVE_NUMBA, njit

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Segment neighbourhood dynamic programme over suffixes.
#
# D[k, i] is the minimal within-segment SSE for splitting values[i:] into
# k + 1 segments; A[k, i] is the exclusive end of the first of those segments.
# Scanning candidate ends in increasing order and keeping only strict
# improvements makes backtracking return the lexicographically earliest
# boundaries among optimal partitions.
# ---------------------------------------------------------------------------


def _segneigh_loops(c1, c2, kmax):
    n = c1.shape[0] - 1
    D = np.full((kmax, n + 1), np.inf)
    A = np.full((kmax, n + 1), -1, dtype=np.int64)
    for i in range(n):
        m = n - i
        s = c1[n] - c1[i]
        D[0, i] = (c2[n] - c2[i]) - s * s / m
        A[0, i] = n
    for k in range(1, kmax):
        for i in range(0, n - k):
            best = np.inf
            bj = -1
            for j in range(i + 1, n - k + 1):
                m = j - i
                s = c1[j] - c1[i]
                v = ((c2[j] - c2[i]) - s * s / m) + D[k - 1, j]
                if v < best:
                    best = v
                    bj = j
            D[k, i] = best
            A[k, i] = bj
    return D, A


def _segneigh_numpy(c1, c2, kmax):
    n = c1.shape[0] - 1
    D = np.full((kmax, n + 1), np.inf)
    A = np.full((kmax, n + 1), -1, dtype=np.int64)
    i = np.arange(n)
    m = n - i
    s = c1[n] - c1[i]
    D[0, :n] = (c2[n] - c2[i]) - s * s / m
    A[0, :n] = n
    for k in range(1, kmax):
        prev = D[k - 1]
        for i in range(0, n - k):
            j = np.arange(i + 1, n - k + 1)
            m = j - i
            s = c1[j] - c1[i]
            v = ((c2[j] - c2[i]) - s * s / m) + prev[j]
            pos = int(np.argmin(v))
            D[k, i] = v[pos]
            A[k, i] = j[pos]
    return D, A


segneigh_loops = njit(_segneigh_loops)
segneigh_numpy = _segneigh_numpy
segneigh_table = segneigh_loops if HAVE_NUMBA else segneigh_numpy


# ---------------------------------------------------------------------------
# Conditional sum of squares for a zero-mean ARMA(p, q):
#   e[t] = z[t] - sum_i phi[i] z[t-1-i] - sum_j theta[j] e[t-1-j],  t >= p,
# with innovations before p taken as zero. Returns the residuals and their
# Jacobian with respect to (phi, theta).
# ---------------------------------------------------------------------------


def _css_loops(z, phi, theta):
    n = z.shape[0]
    p = phi.shape[0]
    q = theta.shape[0]
    m = n - p
    e = np.zeros(m)
    J = np.zeros((m, p + q))
    for t in range(m):
        zt = t + p
        acc = z[zt]
        for i in range(p):
            acc -= phi[i] * z[zt - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                acc -= theta[j] * e[t - 1 - j]
        e[t] = acc
        for c in range(p):
            g = -z[zt - 1 - c]
            for j in range(q):
                if t - 1 - j >= 0:
                    g -= theta[j] * J[t - 1 - j, c]
            J[t, c] = g
        for c in range(q):
            g = 0.0
            if t - 1 - c >= 0:
                g = -e[t - 1 - c]
            for j in range(q):
                if t - 1 - j >= 0:
                    g -= theta[j] * J[t - 1 - j, p + c]
            J[t, p + c] = g
    return e, J


def _css_numpy(z, phi, theta):
    n = z.shape[0]
    p = phi.shape[0]
    q = theta.shape[0]
    m = n - p
    v = z[p:].copy()
    for i in range(p):
        v -= phi[i] * z[p - 1 - i:n - 1 - i]
    den = np.concatenate(([1.0], theta))
    e = lfilter([1.0], den, v)
    J = np.zeros((m, p + q))
    for c in range(p):
        J[:, c] = lfilter([1.0], den, -z[p - 1 - c:n - 1 - c])
    for c in range(q):
        shifted = np.zeros(m)
        shifted[c + 1:] = e[:m - c - 1]
        J[:, p + c] = lfilter([1.0], den, -shifted)
    return e, J


css_loops = njit(_css_loops)
css_numpy = _css_numpy
css_residuals = css_loops if HAVE_NUMBA else css_numpy
