"""Independent reference implementations used only by the tests.

Plain Python loops over lists, no numpy in the arithmetic, so they share
nothing with the package kernels except the summation order.
"""

import math


def sync_projected_gradient(Q, r, lower, upper, offsets, gammas, x0, steps):
    """Synchronous projected block gradient descent; returns every iterate."""
    Q = [list(map(float, row)) for row in Q]
    r = [float(v) for v in r]
    lo = [float(v) for v in lower]
    hi = [float(v) for v in upper]
    x = [float(v) for v in x0]
    n = len(x)
    out = [list(x)]
    for _ in range(steps):
        g = []
        for k in range(n):
            acc = 0.0
            for l in range(n):
                acc += Q[k][l] * x[l]
            g.append(acc + r[k])
        new = list(x)
        for i in range(len(offsets) - 1):
            for k in range(offsets[i], offsets[i + 1]):
                y = x[k] - gammas[i] * g[k]
                new[k] = min(max(y, lo[k]), hi[k])
        x = new
        out.append(list(x))
    return out


def eig2x2_sym(a, b, c):
    """Eigenvalues of [[a, b], [b, c]] from the characteristic polynomial."""
    m = 0.5 * (a + c)
    d = math.sqrt(0.25 * (a - c) ** 2 + b * b)
    return m - d, m + d


def scalar_quadratic_steps(L, gamma, x0, steps):
    """Iterates of x <- x - gamma L x."""
    xs = [x0]
    for _ in range(steps):
        xs.append(xs[-1] - gamma * L * xs[-1])
    return xs
