"""Operator powers applied to the observable and the square root of ``I - Q``.

Nothing here materializes matrix powers: every sequence is built by repeated
matrix-vector products, so a table of horizon ``K`` costs ``O(K S^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .chain import ChainModel, pi_norm, pi_norms


def _kernel(chain: ChainModel, which: str) -> np.ndarray:
    if which in ("Q", "past"):
        return chain.kernel
    if which in ("Q*", "future"):
        return chain.adjoint_kernel
    raise ValueError(f"which must be 'Q' or 'Q*', got {which!r}")


@dataclass(frozen=True, eq=False)
class OperatorTable:
    """Rows ``k = 0..K_max`` of ``Q^k f``, ``(Q*)^k f``, ``V_k f`` and ``V*_k f``.

    ``V_n = I + Q + ... + Q^n``; row ``n`` of ``vn_f`` is the running sum of
    rows ``0..n`` of ``qk_f``.
    """

    qk_f: np.ndarray
    qstar_k_f: np.ndarray
    vn_f: np.ndarray
    vnstar_f: np.ndarray
    K_max: int

    def past_norms(self, pi):
        """``||Q^k f||_pi`` for ``k = 0..K_max``."""
        return pi_norms(pi, self.qk_f)

    def future_norms(self, pi):
        return pi_norms(pi, self.qstar_k_f)


@numba.njit(cache=True)
def _iterate_small(M, f, pi, K):
    S = f.size
    out = np.empty((K + 1, S))
    out[0] = f
    for k in range(1, K + 1):
        mean = 0.0
        for x in range(S):
            acc = 0.0
            for y in range(S):
                acc += M[x, y] * out[k - 1, y]
            out[k, x] = acc
            mean += pi[x] * acc
        # Q and Q* preserve the pi-mean; strip the rounding drift along constants
        for x in range(S):
            out[k, x] -= mean
    return out


def _iterate(M, f, pi, K):
    if f.size <= 64:
        return _iterate_small(np.ascontiguousarray(M), f, pi, K)
    out = np.empty((K + 1, f.size))
    out[0] = f
    v = f
    for k in range(1, K + 1):
        v = M @ v
        v = v - pi @ v
        out[k] = v
    return out


def build_table(chain: ChainModel, K_max: int) -> OperatorTable:
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    pi = chain.stationary
    qk = _iterate(chain.kernel, chain.observable, pi, K_max)
    qsk = _iterate(chain.adjoint_kernel, chain.observable, pi, K_max)
    vn = np.cumsum(qk, axis=0)
    vns = np.cumsum(qsk, axis=0)
    for a in (qk, qsk, vn, vns):
        a.flags.writeable = False
    return OperatorTable(qk, qsk, vn, vns, int(K_max))


# ---------------------------------------------------------------------------
# sqrt(I - Q) = I - sum_n delta_n Q^n,  1 - sqrt(1 - x) = sum_n delta_n x^n


@dataclass(frozen=True)
class SqrtSeries:
    delta: np.ndarray
    N_trunc: int
    partial_mass: float
    tail_mass: float
    spot_check_index: int
    spot_check_error: float


def exact_sqrt_coefficient(n: int) -> Fraction:
    """``delta_n = C(2n, n) / ((2n - 1) 4^n)`` as an exact rational."""
    return Fraction(math.comb(2 * n, n), (2 * n - 1) * 4**n)


def sqrt_coefficients(N_trunc: int) -> SqrtSeries:
    """Coefficients of ``1 - sqrt(1 - x)`` up to order ``N_trunc``.

    Uses the recurrence ``delta_{n+1} = delta_n (2n - 1) / (2n + 2)`` and
    checks the last coefficient (or index 1000, whichever is smaller) against
    exact rational arithmetic.  ``tail_mass = 1 - partial_mass`` is computed
    directly as ``C(2N, N) / 4^N`` to avoid cancellation.
    """
    if N_trunc < 1:
        raise ValueError("N_trunc must be >= 1")
    n = np.arange(1, N_trunc)
    ratios = (2.0 * n - 1.0) / (2.0 * n + 2.0)
    delta = 0.5 * np.concatenate(([1.0], np.cumprod(ratios)))
    tail_ratios = (2.0 * np.arange(1, N_trunc + 1) - 1.0) / (2.0 * np.arange(1, N_trunc + 1))
    tail = float(np.prod(tail_ratios))

    idx = min(N_trunc, 1000)
    exact = exact_sqrt_coefficient(idx)
    err = abs(float(Fraction(delta[idx - 1]) / exact) - 1.0)
    if err > 1e-12:
        raise ArithmeticError(f"sqrt coefficient recurrence drifted: relative error {err:.3e} at n={idx}")
    delta.flags.writeable = False
    return SqrtSeries(delta, int(N_trunc), float(delta.sum()), tail, idx, err)


def apply_sqrt(chain: ChainModel, g, N_trunc: int, which: str = "Q"):
    """Truncated ``sqrt(I - Q) g = g - sum_{n <= N} delta_n Q^n g``.

    Returns ``(value, residual_bound)`` where the bound
    ``(1 - partial_mass) * ||g||_pi`` dominates the truncation error because
    ``Q`` is an ``L^2(pi)`` contraction.
    """
    M = _kernel(chain, which)
    series = sqrt_coefficients(N_trunc)
    g = np.asarray(g, dtype=float)
    acc = np.zeros_like(g)
    v = g
    for d in series.delta:
        v = M @ v
        acc += d * v
    return g - acc, series.tail_mass * pi_norm(chain, g)


@dataclass(frozen=True)
class SqrtMembership:
    """Finite-horizon evidence for ``f`` lying in the range of ``sqrt(I - Q)``.

    ``verdict`` classifies the series ``sum_k k^{-1/2} Q^k f``; ``exact_member``
    is the finite-dimensional answer (range of ``I - Q`` on the state space,
    which coincides with the range of its square root at finite size).
    """

    which: str
    N_max: int
    partial_sum_norms: np.ndarray
    dyadic_n: np.ndarray
    dyadic_increments: np.ndarray
    verdict: object
    exact_member: bool
    exact_residual: float


def exact_range_member(chain: ChainModel, which: str = "Q", rtol: float = 1e-9):
    """Solve ``(I - M) g = f`` in least squares; report membership and residual."""
    M = _kernel(chain, which)
    f = chain.observable
    A = np.eye(chain.n_states) - M
    g, *_ = np.linalg.lstsq(A, f, rcond=None)
    resid = pi_norm(chain, A @ g - f)
    scale = pi_norm(chain, f)
    return bool(resid <= rtol * max(scale, 1e-300)), resid


def sqrt_range_membership(chain: ChainModel, which: str = "Q", N_max: int = 4096, table=None, floor=None):
    """Partial sums ``s_n = sum_{k<=n} k^{-1/2} M^k f`` with ``M = Q`` or ``Q*``.

    The classifier sees the per-index Cauchy terms
    ``||s_n - s_{floor(n/2)}||_pi / n``: their series converges exactly when the
    dyadic increments are summable, so the critical slope ``-1`` of the
    classifier corresponds to increments that stop decaying.
    """
    from .diagnostics import evaluate_condition

    if N_max < 16:
        raise ValueError("N_max must be >= 16")
    if table is None or table.K_max < N_max:
        table = build_table(chain, N_max)
    rows = table.qk_f if which in ("Q", "past") else table.qstar_k_f
    pi = chain.stationary
    k = np.arange(1, N_max + 1)
    s = np.vstack([np.zeros(chain.n_states), np.cumsum(rows[1 : N_max + 1] / np.sqrt(k)[:, None], axis=0)])
    partial = pi_norms(pi, s[1:])
    halves = pi_norms(pi, s[k] - s[k // 2]) / k
    dyadic = 2 ** np.arange(0, int(math.log2(N_max)))
    dyadic = dyadic[2 * dyadic <= N_max]
    incr = pi_norms(pi, s[2 * dyadic] - s[dyadic])
    if floor is None:
        floor = 0.0
    if N_max >= 64:
        verdict = evaluate_condition(halves, weight=None, floor=floor / k)
    else:
        verdict = None
    member, resid = exact_range_member(chain, which)
    return SqrtMembership(which, int(N_max), partial, dyadic, incr, verdict, member, resid)
