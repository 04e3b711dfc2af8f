import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from asyncbcd import (BlockPartition, BoxConstraint, DelaySpec, Problem, QuadraticObjective,
                      generate_problem)


def make_problem(Q, r, lower=-np.inf, upper=np.inf, sizes=None, D=None, G=None, links=None):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    part = BlockPartition(tuple(sizes) if sizes else (1,) * n)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    N = part.N
    spec = DelaySpec(np.zeros((N, N), int) if D is None else D, G, links)
    return Problem(QuadraticObjective(Q, r, part), BoxConstraint(lo, hi, part), spec)


@pytest.fixture
def scalar_half_square():
    """f(x) = x^2 / 2 on the real line."""
    return make_problem([[1.0]], [0.0])


@pytest.fixture(scope="session")
def paper_instances():
    """Regenerated 20-agent instances at the comparison scale."""
    return [generate_problem(seed, 20) for seed in range(20)]


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record parts of an acceptance criterion; one summary line per criterion."""
    store = request.config.stash[_ACCEPTANCE]

    def record(name, ok, detail):
        parts = store.setdefault(name, [])
        parts.append((bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for name, parts in store.items():
        ok = all(p[0] for p in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
