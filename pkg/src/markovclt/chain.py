"""Stationary finite-state Markov chains carrying a centered observable.

A :class:`ChainModel` bundles the transition kernel ``Q``, its stationary law
``pi`` and an observable ``f`` with ``sum(pi * f) == 0``.  Everything else in
the package consumes this triple.  The helpers here provide the
``L^2(pi)`` geometry: inner product, norm and the time-reversed kernel
``Q*(x, y) = pi(y) Q(y, x) / pi(x)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .config import DEFAULT_CAPS, DEFAULT_TOLERANCES, Tolerances
from .exceptions import (
    NonStochasticKernel,
    NoUniqueStationaryLaw,
    SpecFormatError,
    ZeroMassState,
)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ChainModel:
    """Stationary chain ``(Q, pi, f)`` on an ordered finite state set.

    Arrays are stored read-only; build instances with :func:`build_chain`
    rather than calling the constructor directly.
    """

    states: tuple
    kernel: np.ndarray
    stationary: np.ndarray
    observable: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def adjoint_kernel(self) -> np.ndarray:
        # cached on first access; the model is immutable
        cached = self.__dict__.get("_adjoint")
        if cached is None:
            cached = _frozen(_adjoint_matrix(self.kernel, self.stationary))
            object.__setattr__(self, "_adjoint", cached)
        return cached


@dataclass(frozen=True)
class ChainClassification:
    irreducible: bool
    aperiodic: bool
    ergodic: bool
    totally_ergodic: bool
    reversible: bool
    normal: bool
    normality_defect: float
    periods: tuple
    reversibility_defect: float

    def as_dict(self):
        return {
            "irreducible": self.irreducible,
            "aperiodic": self.aperiodic,
            "ergodic": self.ergodic,
            "totally_ergodic": self.totally_ergodic,
            "reversible": self.reversible,
            "normal": self.normal,
            "normality_defect": float(self.normality_defect),
            "reversibility_defect": float(self.reversibility_defect),
            "periods": [int(p) for p in self.periods],
        }


# ---------------------------------------------------------------------------
# construction


def _check_kernel(kernel, tol):
    Q = np.asarray(kernel, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
        raise NonStochasticKernel(f"kernel must be a non-empty square matrix, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise NonStochasticKernel("kernel contains NaN or Inf")
    bad = np.argwhere((Q < 0.0) | (Q > 1.0))
    if bad.size:
        i, j = bad[0]
        raise NonStochasticKernel(f"kernel entry ({i}, {j}) = {float(Q[i, j])!r} is outside [0, 1]")
    sums = Q.sum(axis=1)
    off = np.flatnonzero(np.abs(sums - 1.0) > tol.stochastic)
    if off.size:
        i = off[0]
        raise NonStochasticKernel(f"kernel row {i} sums to {float(sums[i])!r}, expected 1")
    return Q


def _communicating_classes(Q):
    """Strongly connected components of the positive-entry digraph.

    Returns ``(labels, closed)`` where ``closed[c]`` tells whether class ``c``
    has no edge leaving it.
    """
    graph = csr_matrix(Q > 0.0)
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    closed = np.ones(n_comp, dtype=bool)
    rows, cols = np.nonzero(Q > 0.0)
    leaving = labels[rows] != labels[cols]
    closed[np.unique(labels[rows[leaving]])] = False
    return labels, closed


def _stationary_dense(Q):
    S = Q.shape[0]
    A = np.vstack([Q.T - np.eye(S), np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def _stationary_power(Q, tol, max_iter=100_000):
    # lazy chain (I + Q) / 2 has the same stationary law and is aperiodic
    S = Q.shape[0]
    pi = np.full(S, 1.0 / S)
    for _ in range(max_iter):
        nxt = 0.5 * (pi + pi @ Q)
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < 0.01 * tol:
            return nxt
        pi = nxt
    return pi


def stationary_distribution(kernel, tol: Tolerances = DEFAULT_TOLERANCES, caps=DEFAULT_CAPS):
    """Unique stationary law of a stochastic matrix.

    Raises
    ------
    NoUniqueStationaryLaw
        If the kernel has more than one closed communicating class.
    ZeroMassState
        If some state is transient (it would carry zero stationary mass).
    """
    Q = _check_kernel(kernel, tol)
    labels, closed = _communicating_classes(Q)
    if closed.sum() != 1:
        raise NoUniqueStationaryLaw(
            f"kernel has {int(closed.sum())} closed classes; supply the stationary law explicitly"
        )
    transient = np.flatnonzero(~closed[labels])
    if transient.size:
        raise ZeroMassState(f"state {transient[0]} is transient and has zero stationary mass")
    if Q.shape[0] <= caps.dense_stationary_states:
        pi = _stationary_dense(Q)
    else:
        pi = _stationary_power(Q, tol.fixed)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def build_chain(
    kernel,
    observable,
    stationary=None,
    states=None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ChainModel:
    """Validate ``(Q, f[, pi])`` and return a :class:`ChainModel`.

    When ``stationary`` is omitted it is computed from the kernel.  The
    observable is re-centered so that its ``pi``-mean is zero; the shift is
    stored in ``metadata["recentered_by"]``.
    """
    Q = _check_kernel(kernel, tol)
    S = Q.shape[0]
    f = np.asarray(observable, dtype=float).reshape(-1)
    if f.shape != (S,):
        raise ValueError(f"observable has length {f.size}, kernel has {S} states")
    if not np.all(np.isfinite(f)):
        raise ValueError("observable contains NaN or Inf")

    if stationary is None:
        pi = stationary_distribution(Q, tol)
    else:
        pi = np.asarray(stationary, dtype=float).reshape(-1)
        if pi.shape != (S,):
            raise ValueError(f"stationary has length {pi.size}, kernel has {S} states")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > tol.fixed:
            raise NoUniqueStationaryLaw("supplied stationary vector is not a probability vector")
        resid = np.max(np.abs(pi @ Q - pi))
        if resid > tol.fixed:
            raise NoUniqueStationaryLaw(f"supplied stationary vector is not fixed by the kernel (residual {resid:.3e})")
    zero = np.flatnonzero(pi <= 0.0)
    if zero.size:
        raise ZeroMassState(f"state {zero[0]} has zero stationary mass")
    resid = np.max(np.abs(pi @ Q - pi))
    if resid > tol.fixed:
        raise NoUniqueStationaryLaw(f"stationary solve residual {resid:.3e} exceeds {tol.fixed}")

    mean = float(pi @ f)
    metadata = {"recentered_by": 0.0}
    if abs(mean) > 0.0:
        f = f - mean
        metadata["recentered_by"] = mean
    if states is None:
        states = tuple(range(S))
    else:
        states = tuple(states)
        if len(states) != S:
            raise ValueError(f"{len(states)} state labels for {S} states")
    return ChainModel(states, _frozen(Q), _frozen(pi), _frozen(f), metadata)


# ---------------------------------------------------------------------------
# L^2(pi) geometry


def _adjoint_matrix(Q, pi):
    return (Q * pi[:, None]).T / pi[:, None]


def adjoint(chain: ChainModel) -> np.ndarray:
    """Time-reversed kernel ``Q*(x, y) = pi(y) Q(y, x) / pi(x)``."""
    return np.array(chain.adjoint_kernel)


def pi_inner(chain: ChainModel, g, h) -> float:
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape[-1] != chain.n_states or h.shape[-1] != chain.n_states:
        raise ValueError("vector length does not match the number of states")
    return float(np.sum(chain.stationary * g * h))


def pi_norm(chain: ChainModel, g) -> float:
    return math.sqrt(max(pi_inner(chain, g, g), 0.0))


def pi_norms(pi, vectors):
    """Row-wise ``L^2(pi)`` norms of a stack of vectors."""
    return np.sqrt(np.einsum("...s,s,...s->...", vectors, pi, vectors))


def _period(Q, members):
    """Period of an irreducible class via BFS levels."""
    sub = Q[np.ix_(members, members)] > 0.0
    level = np.full(len(members), -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(sub[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    rows, cols = np.nonzero(sub)
    diffs = np.abs(level[rows] + 1 - level[cols])
    return int(reduce(math.gcd, diffs.tolist(), 0)) or 1


def normality_defect(chain: ChainModel) -> float:
    """Hilbert-Schmidt norm of ``QQ* - Q*Q`` as an operator on ``L^2(pi)``."""
    Q = chain.kernel
    Qs = chain.adjoint_kernel
    D = Q @ Qs - Qs @ Q
    root = np.sqrt(chain.stationary)
    return float(np.linalg.norm(root[:, None] * D / root[None, :]))


def classify(chain: ChainModel, tol: Tolerances = DEFAULT_TOLERANCES) -> ChainClassification:
    Q = chain.kernel
    pi = chain.stationary
    labels, _ = _communicating_classes(Q)
    periods = tuple(_period(Q, np.flatnonzero(labels == c)) for c in range(labels.max() + 1))
    irreducible = len(periods) == 1
    aperiodic = all(p == 1 for p in periods)
    flux = pi[:, None] * Q
    rev_defect = float(np.max(np.abs(flux - flux.T)))
    defect = normality_defect(chain)
    return ChainClassification(
        irreducible=irreducible,
        aperiodic=aperiodic,
        ergodic=irreducible,
        totally_ergodic=irreducible and aperiodic,
        reversible=rev_defect <= tol.normal,
        normal=defect <= tol.normal,
        normality_defect=defect,
        periods=periods,
        reversibility_defect=rev_defect,
    )


# ---------------------------------------------------------------------------
# chain-spec files


def _reject_constant(name):
    raise SpecFormatError(f"non-finite number {name} is not allowed in a chain spec")


def parse_chain_spec(text: str, tol: Tolerances = DEFAULT_TOLERANCES) -> ChainModel:
    """Parse a chain-spec JSON document.

    The format is ``{"states": [...], "kernel": [[...]], "observable": [...],
    "stationary": [...]}`` with ``stationary`` optional.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SpecFormatError("chain spec must be a JSON object")
    for key in ("kernel", "observable"):
        if key not in doc:
            raise SpecFormatError(f"missing field '{key}'")

    kernel = doc["kernel"]
    if not isinstance(kernel, list) or not kernel or not all(isinstance(r, list) for r in kernel):
        raise SpecFormatError("field 'kernel' must be a non-empty list of rows")
    S = len(kernel)
    for i, row in enumerate(kernel):
        if len(row) != S:
            raise SpecFormatError(f"kernel row {i} has {len(row)} entries, expected {S}")
        _check_numbers(row, f"kernel row {i}")
    observable = doc["observable"]
    _check_vector(observable, "observable", S)
    stationary = doc.get("stationary")
    if stationary is not None:
        _check_vector(stationary, "stationary", S)
    states = doc.get("states")
    if states is not None:
        if not isinstance(states, list) or len(states) != S:
            raise SpecFormatError(f"field 'states' must list {S} labels")

    try:
        return build_chain(kernel, observable, stationary, states=states, tol=tol)
    except NonStochasticKernel as exc:
        raise NonStochasticKernel(f"field 'kernel': {exc}") from None


def _check_numbers(values, where):
    for j, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SpecFormatError(f"{where}, entry {j}: expected a number, got {v!r}")
        if not math.isfinite(v):
            raise SpecFormatError(f"{where}, entry {j}: non-finite value")


def _check_vector(values, name, S):
    if not isinstance(values, list):
        raise SpecFormatError(f"field '{name}' must be a list")
    if len(values) != S:
        raise SpecFormatError(f"field '{name}' has {len(values)} entries, expected {S}")
    _check_numbers(values, f"field '{name}'")


def load_chain_spec(path, tol: Tolerances = DEFAULT_TOLERANCES) -> ChainModel:
    return parse_chain_spec(Path(path).read_text(encoding="utf-8"), tol)


def chain_to_spec(chain: ChainModel, include_stationary=True) -> dict:
    doc = {
        "states": [s if isinstance(s, (str, int, float)) else str(s) for s in chain.states],
        "kernel": chain.kernel.tolist(),
        "observable": chain.observable.tolist(),
    }
    if include_stationary:
        doc["stationary"] = chain.stationary.tolist()
    return doc


def dump_chain_spec(chain: ChainModel, path, include_stationary=True):
    text = json.dumps(chain_to_spec(chain, include_stationary), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
