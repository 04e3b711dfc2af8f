"""Pure-Python simulation kernels.

Reference implementation and fallback for ``_ckernels``.  Both backends
accumulate every sum in ascending index order with plain double
arithmetic, so they produce bit-identical results.
"""

import math

NAME = "python"


def quad_eval(Q, r, x, grad):
    """Fill ``grad = Q x + r`` and return ``1/2 x^T Q x + r^T x``."""
    Ql, rl, xl = Q.tolist(), r.tolist(), x.tolist()
    f = 0.0
    out = [0.0] * len(xl)
    for k, row in enumerate(Ql):
        acc = 0.0
        for q, v in zip(row, xl):
            acc += q * v
        out[k] = acc + rl[k]
        f += xl[k] * (0.5 * acc + rl[k])
    grad[:] = out
    return f


def agent_updates(Q, r, lower, upper, offsets, gammas, copies, x, active, steps, grad_dot, step_sq, grad_scale):
    """One projected block-gradient step for every active agent.

    Agent ``i`` evaluates its gradient block at its own copy ``copies[i]``
    and writes the projected result into ``x``.  ``steps`` receives the
    change in ``x`` (zero for idle agents); ``grad_dot[i]`` and
    ``step_sq[i]`` receive ``<s_i, g_i>`` and ``|s_i|^2``; ``grad_scale[i]``
    receives ``sum_k (|g_k| + 2|s_k|/gamma_i)(|x_k| + |u_k| + gamma_i |g_k|)``,
    the magnitude against which rounding in ``<s_i, g_i>`` is judged.
    """
    Ql, rl = Q.tolist(), r.tolist()
    lo, hi = lower.tolist(), upper.tolist()
    off = offsets.tolist()
    gam = gammas.tolist()
    act = active.tolist()
    xl = x.tolist()
    sl = [0.0] * len(xl)
    N = len(gam)
    ips = [0.0] * N
    sqs = [0.0] * N
    scs = [0.0] * N
    for i in range(N):
        if not act[i]:
            continue
        ci = copies[i].tolist()
        g_i = gam[i]
        ip = 0.0
        sq = 0.0
        sc = 0.0
        for k in range(off[i], off[i + 1]):
            acc = 0.0
            for q, v in zip(Ql[k], ci):
                acc += q * v
            g = acc + rl[k]
            xk = ci[k]
            u = xk - g_i * g
            if u < lo[k]:
                u = lo[k]
            elif u > hi[k]:
                u = hi[k]
            s = u - xk
            xl[k] = u
            sl[k] = s
            ip += s * g
            sq += s * s
            sc += (abs(g) + 2.0 * abs(s) / g_i) * (abs(xk) + abs(u) + g_i * abs(g))
        ips[i] = ip
        sqs[i] = sq
        scs[i] = sc
    x[:] = xl
    steps[:] = sl
    grad_dot[:] = ips
    step_sq[:] = sqs
    grad_scale[:] = scs


def deliver(copies, x, offsets, arrivals, stamps, t_new):
    """Refresh each agent's own block and every block arriving at ``t_new``."""
    off = offsets.tolist()
    arr = arrivals.tolist()
    N = len(arr)
    for i in range(N):
        row = arr[i]
        for j in range(N):
            if i == j or row[j]:
                a, b = off[j], off[j + 1]
                copies[i, a:b] = x[a:b]
                stamps[i, j] = t_new


def residual_sq(x, grad, lower, upper, offsets, gammas, out_scaled, out_unscaled):
    """Per-block ``|P[x - gamma_i g] - x|^2`` and ``|P[x - g] - x|^2``."""
    xl, gl = x.tolist(), grad.tolist()
    lo, hi = lower.tolist(), upper.tolist()
    off = offsets.tolist()
    gam = gammas.tolist()
    N = len(gam)
    sc = [0.0] * N
    un = [0.0] * N
    for i in range(N):
        a = 0.0
        b = 0.0
        for k in range(off[i], off[i + 1]):
            xk = xl[k]
            u = xk - gam[i] * gl[k]
            if u < lo[k]:
                u = lo[k]
            elif u > hi[k]:
                u = hi[k]
            d = u - xk
            a += d * d
            v = xk - gl[k]
            if v < lo[k]:
                v = lo[k]
            elif v > hi[k]:
                v = hi[k]
            e = v - xk
            b += e * e
        sc[i] = a
        un[i] = b
    out_scaled[:] = sc
    out_unscaled[:] = un


def disagreement(copies, x):
    """``max_i |x - copies[i]|``."""
    xl = x.tolist()
    worst = 0.0
    for row in copies.tolist():
        acc = 0.0
        for c, v in zip(row, xl):
            d = v - c
            acc += d * d
        if acc > worst:
            worst = acc
    return math.sqrt(worst)
