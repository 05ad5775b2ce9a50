import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from markovclt import gallery

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def enumerate_paths(chain, n):
    """All paths ``xi_0..xi_n`` with their stationary probabilities.

    Returns ``(paths, prob)`` with ``paths`` of shape ``(S^(n+1), n+1)``.
    """
    S = chain.n_states
    paths = np.array(list(itertools.product(range(S), repeat=n + 1)))
    prob = chain.stationary[paths[:, 0]].copy()
    for t in range(n):
        prob *= chain.kernel[paths[:, t], paths[:, t + 1]]
    return paths, prob


def conditional_norm(values, prob, keys):
    """``||E(values | keys)||_2`` under the path law, by grouping."""
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    mass = np.bincount(inv, weights=prob)
    tot = np.bincount(inv, weights=prob * values)
    ok = mass > 0
    return float(np.sqrt(np.sum(tot[ok] ** 2 / mass[ok])))


def brute_force_norms(chain, n):
    """``(E S_n^2, ||E(S_n|xi_0)||, ||E(S_n|xi_n)||, ||E(S_n|xi_0,xi_n)||)`` with ``S_n = sum_{k=1}^n f(xi_k)``."""
    paths, prob = enumerate_paths(chain, n)
    s = chain.observable[paths[:, 1:]].sum(axis=1)
    return (
        float(np.sum(prob * s**2)),
        conditional_norm(s, prob, paths[:, [0]]),
        conditional_norm(s, prob, paths[:, [n]]),
        conditional_norm(s, prob, paths[:, [0, n]]),
    )


@pytest.fixture(scope="session")
def gallery_chains():
    return gallery.gallery()


@pytest.fixture
def small_chain():
    return gallery.random_dense(3, seed=7)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
