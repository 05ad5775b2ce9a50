"""Reference chains used by the tests, demos and the ``gallery`` command."""

from __future__ import annotations

import numpy as np

from .chain import ChainModel, build_chain

GALLERY_NAMES = ("iid", "two-state", "cycle-walk", "birth-death", "random-dense")

DEFAULTS = {
    "iid": {"size": 3},
    "two-state": {"p": 0.3},
    "cycle-walk": {"size": 5, "p": 0.8},
    "birth-death": {"size": 4, "p": 0.4},
    "random-dense": {"size": 6, "seed": 0},
}


def _check_p(p, closed=False):
    lo_ok = p > 0.0
    hi_ok = p <= 1.0 if closed else p < 1.0
    if not (lo_ok and hi_ok):
        raise ValueError(f"probability p={p} must lie in (0, {'1]' if closed else '1)'}")


def iid_chain(size: int = 3, weights=None) -> ChainModel:
    """Every row equals ``pi``; by default ``pi(x)`` is proportional to ``x + 1``."""
    if size < 2:
        raise ValueError("size must be >= 2")
    w = np.arange(1.0, size + 1) if weights is None else np.asarray(weights, dtype=float)
    pi = w / w.sum()
    f = np.arange(size, dtype=float)
    return build_chain(np.tile(pi, (size, 1)), f - pi @ f, stationary=pi)


def two_state_chain(p: float = 0.3) -> ChainModel:
    """Symmetric flip chain with flip probability ``p`` and ``f = [1, -1]``.

    ``p = 1`` gives the deterministic 2-cycle.
    """
    _check_p(p, closed=True)
    Q = np.array([[1.0 - p, p], [p, 1.0 - p]])
    return build_chain(Q, [1.0, -1.0], stationary=[0.5, 0.5])


def deterministic_cycle() -> ChainModel:
    return two_state_chain(1.0)


def cycle_walk(size: int = 5, p: float = 0.8) -> ChainModel:
    """Circulant walk ``x -> x + 1`` w.p. ``p`` and ``x -> x - 1`` otherwise.

    Circulant kernels commute with their adjoint, so the chain is normal; it
    is reversible only for ``p = 1/2``.
    """
    if size < 3:
        raise ValueError("size must be >= 3")
    _check_p(p)
    Q = np.zeros((size, size))
    x = np.arange(size)
    Q[x, (x + 1) % size] = p
    Q[x, (x - 1) % size] += 1.0 - p
    angle = 2.0 * np.pi * x / size
    f = np.cos(angle) + np.sin(angle)
    return build_chain(Q, f, stationary=np.full(size, 1.0 / size))


def birth_death(size: int = 4, p: float = 0.4) -> ChainModel:
    """Nearest-neighbour walk on ``0..size-1`` with holding at the ends.

    Up with probability ``p``, down with ``1 - p``; reversible by detailed
    balance, ``pi(x)`` proportional to ``(p / (1 - p))^x``.
    """
    if size < 2:
        raise ValueError("size must be >= 2")
    _check_p(p)
    Q = np.zeros((size, size))
    for x in range(size):
        Q[x, min(x + 1, size - 1)] += p
        Q[x, max(x - 1, 0)] += 1.0 - p
    ratio = p / (1.0 - p)
    pi = ratio ** np.arange(size)
    pi /= pi.sum()
    f = np.arange(size, dtype=float)
    return build_chain(Q, f - pi @ f, stationary=pi)


def random_dense(size: int = 6, seed: int = 0) -> ChainModel:
    """Dirichlet(1) rows and a standard normal observable; generically non-normal."""
    if size < 2:
        raise ValueError("size must be >= 2")
    rng = np.random.default_rng(seed)
    Q = rng.dirichlet(np.ones(size), size=size)
    Q /= Q.sum(axis=1, keepdims=True)
    return build_chain(Q, rng.standard_normal(size))


def random_chain(rng, size: int, sparse: bool = False) -> ChainModel:
    """Random irreducible chain for property campaigns.

    ``sparse=True`` keeps a random cycle through all states plus a few random
    edges, so many pairs ``(x, y)`` are unreachable in a given number of steps.
    """
    if sparse:
        order = rng.permutation(size)
        Q = np.zeros((size, size))
        Q[order, np.roll(order, -1)] = rng.uniform(0.2, 1.0, size)
        extra = rng.random((size, size)) < 1.5 / size
        Q[extra] += rng.uniform(0.0, 1.0, extra.sum())
    else:
        Q = rng.dirichlet(np.full(size, 0.7), size=size)
    Q /= Q.sum(axis=1, keepdims=True)
    return build_chain(Q, rng.standard_normal(size))


def make(name: str, **params) -> ChainModel:
    """Build a gallery chain by name; missing parameters take ``DEFAULTS``."""
    if name not in GALLERY_NAMES:
        raise ValueError(f"unknown gallery chain {name!r}; choose from {', '.join(GALLERY_NAMES)}")
    kw = dict(DEFAULTS[name])
    kw.update({k: v for k, v in params.items() if v is not None and k in kw})
    if name == "iid":
        return iid_chain(kw["size"])
    if name == "two-state":
        _check_p(kw["p"])
        return two_state_chain(kw["p"])
    if name == "cycle-walk":
        return cycle_walk(kw["size"], kw["p"])
    if name == "birth-death":
        return birth_death(kw["size"], kw["p"])
    return random_dense(kw["size"], kw["seed"])


def gallery():
    """All five gallery chains at default parameters, keyed by name."""
    return {name: make(name) for name in GALLERY_NAMES}
