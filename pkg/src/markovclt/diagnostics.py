"""Exact conditional-expectation norms and a finite-horizon series classifier.

For a stationary chain with ``X_i = f(xi_i)`` and ``S_n = X_1 + ... + X_n``:

* ``E(S_n | xi_0)   = (Q + ... + Q^n) f (xi_0)``
* ``E(S_n | xi_n)   = (I + Q* + ... + (Q*)^{n-1}) f (xi_n)``
* ``E(S_n | xi_0 = x, xi_n = y) = B_n(x, y) / Q^n(x, y)`` with
  ``B_n = sum_{i=1}^n Q^i diag(f) Q^{n-i}``

and the ``L^2`` norm of the last one is taken under the pair law
``pi(x) Q^n(x, y)``.  Pairs with ``Q^n(x, y) = 0`` are null events and carry
no weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .chain import ChainModel, pi_norm, pi_norms
from .config import DEFAULT_CAPS, DEFAULT_TOLERANCES, ResourceCaps, Tolerances
from .exceptions import HorizonExceeded, ResourceCapExceeded, TooFewTerms
from .operators import OperatorTable, build_table, sqrt_range_membership

CONVERGENT = "convergent"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

CONDITION_IDS = ("MW", "C1", "C2", "TWO_MIX_P", "TWO_MIX_F", "SQRT_P", "SQRT_F", "BAD", "MIXINGALE")
MIN_TERMS = 64

_WEIGHT_EXPONENTS = {None: 0.0, "none": 0.0, "1/n^2": 2.0, "1/n^3/2": 1.5}


# ---------------------------------------------------------------------------
# single-sigma-field norms


def _check_horizon(table: OperatorTable, n: int):
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > table.K_max:
        raise HorizonExceeded(f"n={n} exceeds the table horizon K_max={table.K_max}")


def cond_norm_past(chain: ChainModel, table: OperatorTable, n: int) -> float:
    """``||E(S_n | xi_0)|| = ||V_n f - f||_pi``."""
    _check_horizon(table, n)
    return pi_norm(chain, table.vn_f[n] - table.vn_f[0])


def cond_norm_future(chain: ChainModel, table: OperatorTable, n: int) -> float:
    """``||E(S_n | xi_n)|| = ||V*_{n-1} f||_pi``."""
    _check_horizon(table, n)
    return pi_norm(chain, table.vnstar_f[n - 1])


def past_norms(chain: ChainModel, table: OperatorTable, n_max: int | None = None) -> np.ndarray:
    """``||E(S_n | xi_0)||`` for ``n = 1..n_max`` (entry ``n - 1``)."""
    n_max = table.K_max if n_max is None else n_max
    _check_horizon(table, n_max)
    return pi_norms(chain.stationary, table.vn_f[1 : n_max + 1] - table.vn_f[0])


def future_norms(chain: ChainModel, table: OperatorTable, n_max: int | None = None) -> np.ndarray:
    n_max = table.K_max if n_max is None else n_max
    _check_horizon(table, n_max)
    return pi_norms(chain.stationary, table.vnstar_f[:n_max])


# ---------------------------------------------------------------------------
# two-sided (bridge) norms


def _pair_norm_sq(pi, B, P):
    """``sum_{x,y: P > 0} pi(x) B(x,y)^2 / P(x,y)`` over the trailing two axes."""
    pos = P > 0.0
    ratio = np.divide(B * B, P, out=np.zeros_like(B), where=pos)
    return np.einsum("...x,...xy->...", pi, ratio)


@numba.njit(cache=True)
def _bridge_sq_single(Q, pi, f, n_max):
    # small dense chains: plain loops beat per-step numpy dispatch
    S = Q.shape[0]
    P = Q.copy()
    B = np.empty((S, S))
    for x in range(S):
        for y in range(S):
            B[x, y] = Q[x, y] * f[y]
    P2 = np.empty((S, S))
    B2 = np.empty((S, S))
    out = np.empty(n_max)
    for n in range(n_max):
        if n > 0:
            for x in range(S):
                for y in range(S):
                    p = 0.0
                    b = 0.0
                    for z in range(S):
                        p += P[x, z] * Q[z, y]
                        b += B[x, z] * Q[z, y]
                    P2[x, y] = p
                    B2[x, y] = b + p * f[y]
            P, P2 = P2, P
            B, B2 = B2, B
        total = 0.0
        for x in range(S):
            row = 0.0
            for y in range(S):
                if P[x, y] > 0.0:
                    row += B[x, y] * B[x, y] / P[x, y]
            total += pi[x] * row
        out[n] = total
    return out


def bridge_sequence(kernel, pi, f, n_max: int) -> np.ndarray:
    """Bridge norms ``||E(S_n | xi_0, xi_n)||`` for ``n = 1..n_max``.

    Works on a single chain (``kernel`` of shape ``(S, S)``) or a stack of
    chains of equal size (shape ``(..., S, S)``); the recursion
    ``B_{n+1} = B_n Q + Q^{n+1} diag(f)`` runs over all of them at once.
    """
    Q = np.asarray(kernel, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if Q.ndim == 2:
        return np.sqrt(np.maximum(_bridge_sq_single(Q, pi, np.asarray(f, dtype=float), int(n_max)), 0.0))
    fcol = np.asarray(f, dtype=float)[..., None, :]
    out = np.empty(Q.shape[:-2] + (n_max,))
    P = Q
    B = Q * fcol
    out[..., 0] = _pair_norm_sq(pi, B, P)
    for n in range(1, n_max):
        P_next = P @ Q
        B = B @ Q + P_next * fcol
        P = P_next
        out[..., n] = _pair_norm_sq(pi, B, P)
    return np.sqrt(np.maximum(out, 0.0))


def bridge_table(chain: ChainModel, n: int):
    """``E(S_n | xi_0 = x, xi_n = y)`` as an ``S x S`` array, with ``Q^n``.

    Entries on pairs with ``Q^n(x, y) = 0`` are set to 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    Q = chain.kernel
    f = chain.observable
    P = Q.copy()
    B = Q * f[None, :]
    for _ in range(1, n):
        P_next = P @ Q
        B = B @ Q + P_next * f[None, :]
        P = P_next
    C = np.divide(B, P, out=np.zeros_like(B), where=P > 0.0)
    return C, P


def matrix_powers(chain: ChainModel, n: int):
    """Dense ``Q^0, ..., Q^n``."""
    out = [np.eye(chain.n_states)]
    for _ in range(n):
        out.append(out[-1] @ chain.kernel)
    return out


def cond_norm_bridge(chain: ChainModel, n: int, powers=None) -> float:
    """``||E(S_n | xi_0, xi_n)||`` from dense matrix powers ``Q^0..Q^n``.

    Direct evaluation of ``sum_i sum_s f(s) Q^i(x, s) Q^{n-i}(s, y)``; the
    recursion in :func:`bridge_sequence` is faster for whole sequences.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if powers is None or len(powers) <= n:
        powers = matrix_powers(chain, n)
    f = chain.observable
    B = np.zeros((chain.n_states, chain.n_states))
    for i in range(1, n + 1):
        B += (powers[i] * f[None, :]) @ powers[n - i]
    return float(np.sqrt(max(_pair_norm_sq(chain.stationary, B, powers[n]), 0.0)))


def mixingale_norm(chain: ChainModel, k: int, powers=None) -> float:
    """``||E(X_0 | xi_{-k}, xi_k)||`` from ``Q^k`` and ``Q^{2k}``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    Qk = np.linalg.matrix_power(chain.kernel, k) if powers is None else powers[k]
    Q2k = Qk @ Qk if powers is None or len(powers) <= 2 * k else powers[2 * k]
    M = (Qk * chain.observable[None, :]) @ Qk
    return float(np.sqrt(max(_pair_norm_sq(chain.stationary, M, Q2k), 0.0)))


def mixingale_sequence(kernel, pi, f, k_max: int) -> np.ndarray:
    """``||E(X_0 | xi_{-k}, xi_k)||`` for ``k = 1..k_max``."""
    Q = np.asarray(kernel, dtype=float)
    pi = np.asarray(pi, dtype=float)
    fcol = np.asarray(f, dtype=float)[..., None, :]
    out = np.empty(Q.shape[:-2] + (k_max,))
    Qk = Q
    for k in range(k_max):
        if k:
            Qk = Qk @ Q
        out[..., k] = _pair_norm_sq(pi, (Qk * fcol) @ Qk, Qk @ Qk)
    return np.sqrt(np.maximum(out, 0.0))


def _check_bridge_caps(chain, n, caps):
    if chain.n_states > caps.bridge_states:
        raise ResourceCapExceeded(
            f"bridge norms need dense powers; {chain.n_states} states exceeds the cap of {caps.bridge_states}"
        )
    if n > caps.bridge_horizon:
        raise ResourceCapExceeded(f"bridge horizon {n} exceeds the cap of {caps.bridge_horizon}")


@dataclass(frozen=True, eq=False)
class ConditionalNorms:
    """Norm sequences; entry ``i`` holds index ``n = i + 1`` (or ``k = i + 1``)."""

    past: np.ndarray
    future: np.ndarray
    bridge: np.ndarray
    mix_past: np.ndarray
    mix_future: np.ndarray
    mix_bridge: np.ndarray


def conditional_norms(
    chain: ChainModel,
    N_max: int,
    table: OperatorTable | None = None,
    caps: ResourceCaps = DEFAULT_CAPS,
) -> ConditionalNorms:
    """All six norm sequences to horizon ``N_max``.

    The two-sided mixingale sequence needs ``Q^{2k}`` so it stops at
    ``k = N_max // 2``.
    """
    _check_bridge_caps(chain, N_max, caps)
    if table is None or table.K_max < N_max:
        table = build_table(chain, N_max)
    pi = chain.stationary
    return ConditionalNorms(
        past=past_norms(chain, table, N_max),
        future=future_norms(chain, table, N_max),
        bridge=bridge_sequence(chain.kernel, pi, chain.observable, N_max),
        mix_past=pi_norms(pi, table.qk_f[1 : N_max + 1]),
        mix_future=pi_norms(pi, table.qstar_k_f[1 : N_max + 1]),
        mix_bridge=mixingale_sequence(chain.kernel, pi, chain.observable, max(N_max // 2, 1)),
    )


# ---------------------------------------------------------------------------
# series classification


@dataclass(frozen=True, eq=False)
class SeriesVerdict:
    partial_sums: np.ndarray
    tail_exponent: float
    verdict: str
    margin: float

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1])


def evaluate_condition(terms, weight=None, floor=0.0, margin: float = DEFAULT_TOLERANCES.classifier_margin):
    """Classify ``sum_n w_n t_n`` from its first ``N`` terms.

    ``weight`` is one of ``None``, ``"1/n^2"`` or ``"1/n^3/2"``.  Terms at or
    below ``floor`` (scalar or per-index) count as exact zeros.  The slope of
    ``log(w_n t_n)`` against ``log n`` is fitted over ``N/4 < n <= N``; the
    verdict is ``convergent`` below ``-1 - margin``, ``divergent`` at or above
    ``-1 + margin`` and ``inconclusive`` in between.  A window with fewer than
    two nonzero terms counts as a terminating series.
    """
    t = np.asarray(terms, dtype=float)
    if t.ndim != 1 or t.size < MIN_TERMS:
        raise TooFewTerms(f"need at least {MIN_TERMS} terms, got {t.size}")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("terms must be finite and nonnegative")
    if weight not in _WEIGHT_EXPONENTS:
        raise ValueError(f"unknown weight {weight!r}")
    n = np.arange(1, t.size + 1, dtype=float)
    t = np.where(t <= floor, 0.0, t)
    x = t * n ** -_WEIGHT_EXPONENTS[weight]
    partial = np.cumsum(x)

    window = n > t.size / 4
    keep = window & (x > 0)
    if keep.sum() < 2:
        slope = float("-inf")
    else:
        slope = float(np.polyfit(np.log(n[keep]), np.log(x[keep]), 1)[0])
    if slope < -1.0 - margin:
        verdict = CONVERGENT
    elif slope >= -1.0 + margin:
        verdict = DIVERGENT
    else:
        verdict = INCONCLUSIVE
    partial.flags.writeable = False
    return SeriesVerdict(partial, slope, verdict, margin)


@dataclass(frozen=True)
class ConditionRow:
    condition_id: str
    N_max: int
    partial_sum: float
    tail_exponent: float
    verdict: str

    def as_dict(self):
        slope = self.tail_exponent
        return {
            "condition_id": self.condition_id,
            "N_max": self.N_max,
            "partial_sum": self.partial_sum,
            "tail_exponent": slope if np.isfinite(slope) else None,
            "verdict": self.verdict,
        }


def _row(cid, verdict: SeriesVerdict | None, n_terms):
    if verdict is None:
        return ConditionRow(cid, n_terms, float("nan"), float("nan"), INCONCLUSIVE)
    return ConditionRow(cid, n_terms, verdict.total, verdict.tail_exponent, verdict.verdict)


def condition_report(
    chain: ChainModel,
    N_max: int = 4096,
    table: OperatorTable | None = None,
    norms: ConditionalNorms | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    caps: ResourceCaps = DEFAULT_CAPS,
):
    """One :class:`ConditionRow` per condition id, in ``CONDITION_IDS`` order."""
    if table is None or table.K_max < N_max:
        table = build_table(chain, N_max)
    if norms is None:
        norms = conditional_norms(chain, N_max, table, caps)
    m = tol.classifier_margin
    eps = tol.negligible * pi_norm(chain, chain.observable)
    rows = {}

    def classify(cid, terms, weight, floor):
        try:
            verdict = evaluate_condition(terms, weight, floor, m)
        except TooFewTerms:
            verdict = None
        rows[cid] = _row(cid, verdict, len(terms))

    classify("MW", norms.past, "1/n^3/2", eps)
    classify("C1", norms.past**2, "1/n^2", eps**2)
    classify("C2", norms.future**2, "1/n^2", eps**2)
    classify("TWO_MIX_P", norms.mix_past**2, None, eps**2)
    classify("TWO_MIX_F", norms.mix_future**2, None, eps**2)
    for cid, which in (("SQRT_P", "Q"), ("SQRT_F", "Q*")):
        mem = sqrt_range_membership(chain, which, max(N_max, 16), table=table, floor=eps)
        rows[cid] = _row(cid, mem.verdict, N_max)
    classify("BAD", norms.bridge**2, "1/n^2", eps**2)
    classify("MIXINGALE", norms.mix_bridge**2, None, eps**2)
    return [rows[c] for c in CONDITION_IDS]
