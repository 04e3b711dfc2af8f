import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asyncbcd import available_backends
from asyncbcd.kernels import get_backend

needs_both = pytest.mark.skipif(len(available_backends()) < 2, reason="compiled backend not built")


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("fortran")
    assert get_backend("python").NAME == "python"


@needs_both
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sizes=st.lists(st.integers(1, 4), min_size=1, max_size=6))
def test_kernels_bit_identical(seed, sizes):
    rng = np.random.default_rng(seed)
    n, N = sum(sizes), len(sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)
    Q = rng.standard_normal((n, n)) * 10
    r = rng.standard_normal(n)
    lower, upper = -rng.uniform(0, 5, n), rng.uniform(0, 5, n)
    lower[0] = -np.inf
    x = np.clip(rng.standard_normal(n) * 3, lower, upper)
    copies = np.clip(x + rng.standard_normal((N, n)), lower, upper)
    gammas = rng.uniform(1e-3, 0.5, N)
    active = (rng.random(N) < 0.7).astype(np.uint8)
    arrivals = (rng.random((N, N)) < 0.5).astype(np.uint8)
    res = []
    for name in ("python", "cython"):
        k = get_backend(name)
        g = np.empty(n)
        f = k.quad_eval(Q, r, x, g)
        xs, cs, stamps = x.copy(), copies.copy(), np.zeros((N, N), np.int64)
        steps, gd, sq, gs = (np.empty(n), np.empty(N), np.empty(N), np.empty(N))
        k.agent_updates(Q, r, lower, upper, offsets, gammas, cs, xs, active, steps, gd, sq, gs)
        k.deliver(cs, xs, offsets, arrivals, stamps, 1)
        rs, ru = np.empty(N), np.empty(N)
        k.residual_sq(xs, g, lower, upper, offsets, gammas, rs, ru)
        res.append([f, g, xs, cs, stamps, steps, gd, sq, gs, rs, ru, k.disagreement(cs, xs)])
    for a, b in zip(*res):
        assert np.array_equal(np.asarray(a), np.asarray(b))
