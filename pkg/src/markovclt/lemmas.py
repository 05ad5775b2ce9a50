"""Randomized checks of the inequalities behind the variance argument.

Each check takes concrete finite data and returns the two sides it compares,
so a failure is a genuine counterexample at that truncation.  Campaigns run a
check over many generated inputs; every case has its own 64-bit seed derived
from the master seed, and ``worst_seed`` replays the worst case exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .chain import ChainModel, pi_norms
from .diagnostics import bridge_sequence, future_norms, past_norms
from .gallery import random_chain
from .operators import build_table

LNEGLI_CONSTANT = 65.0
AUX_CONSTANT = 4.0
STYLES = ("concave-power", "random-min-construction", "chain-induced")
CHAIN_KINDS = ("past", "future", "bridge")


@dataclass(frozen=True, eq=False)
class SubadditiveSequence:
    """``values[m - 1] = V_m`` for ``m = 1..M``."""

    values: np.ndarray
    style: str
    seed: int

    @property
    def M(self) -> int:
        return self.values.size


def case_seed(master_seed: int, stream: int, index: int) -> int:
    """64-bit seed for case ``index`` of campaign ``stream``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(stream, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# subadditive sequences


@numba.njit(cache=True)
def _min_closure(U):
    V = U.copy()
    for n in range(2, V.size + 1):
        best = V[n - 1]
        for k in range(1, n // 2 + 1):
            s = V[k - 1] + V[n - k - 1]
            if s < best:
                best = s
        V[n - 1] = best
    return V


def is_subadditive(values, atol: float = 0.0) -> bool:
    """Direct scan of ``V_{n+m} <= V_n + V_m + atol`` over all ``n + m <= M``."""
    return subadditivity_ratio(values, atol) <= 1.0


def subadditivity_ratio(values, atol: float = 0.0) -> float:
    """``max V_{n+m} / (V_n + V_m + atol)`` over ``n + m <= M`` (0/0 counts as 0)."""
    V = np.asarray(values, dtype=float)
    M = V.size
    worst = 0.0
    for n in range(1, M // 2 + 1):
        m = np.arange(n, M - n + 1)
        lhs = V[n + m - 1]
        rhs = V[n - 1] + V[m - 1] + atol
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
        worst = max(worst, float(r.max()))
    return worst


def _chain_induced(rng, M):
    size = int(rng.integers(2, 9))
    chain = random_chain(rng, size, sparse=bool(rng.random() < 0.3))
    kind = CHAIN_KINDS[int(rng.integers(3))]
    return chain, kind


def chain_norm_sequence(chain: ChainModel, kind: str, M: int) -> np.ndarray:
    if kind == "bridge":
        return bridge_sequence(chain.kernel, chain.stationary, chain.observable, M)
    table = build_table(chain, M)
    if kind == "past":
        return past_norms(chain, table, M)
    if kind == "future":
        return future_norms(chain, table, M)
    raise ValueError(f"unknown kind {kind!r}")


def gen_subadditive(seed: int, M: int, style: str, alpha=None, scale=None) -> SubadditiveSequence:
    """Generate a positive subadditive sequence of length ``M``.

    ``concave-power``: ``V_m = c m^alpha + b`` with ``alpha`` in ``(0, 1]`` and
    ``b >= 0`` (concave with nonnegative intercept).
    ``random-min-construction``: noisy power-law proposals ``U_n`` closed
    under ``V_n = min(U_n, min_k V_k + V_{n-k})``, subadditive by construction.
    ``chain-induced``: past, future or bridge norms of a random chain.
    """
    if M < 4:
        raise ValueError("M must be >= 4")
    rng = np.random.default_rng(seed)
    m = np.arange(1, M + 1, dtype=float)
    if style == "concave-power":
        a = rng.uniform(0.0, 1.0) if alpha is None else alpha
        a = a if a > 0 else 1.0
        c = rng.uniform(0.1, 10.0) if scale is None else scale
        b = 0.0 if (alpha is not None or rng.random() < 0.5) else rng.uniform(0.0, 1.0)
        V = c * m**a + b
    elif style == "random-min-construction":
        a = rng.uniform(0.0, 1.2)
        c = rng.uniform(0.1, 10.0)
        noise = rng.uniform(0.0, 2.0)
        U = c * m**a * np.exp(noise * rng.standard_normal(M))
        V = _min_closure(U)
    elif style == "chain-induced":
        chain, kind = _chain_induced(rng, M)
        V = chain_norm_sequence(chain, kind, M)
    else:
        raise ValueError(f"unknown style {style!r}")
    V = np.asarray(V, dtype=float)
    V.flags.writeable = False
    return SubadditiveSequence(V, style, int(seed))


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class CheckResult:
    lhs: float
    rhs: float
    ratio: float
    passed: bool


def check_lnegli(seq, constant: float = LNEGLI_CONSTANT) -> CheckResult:
    """``sum_{i>=1, 2^i<=M} V_{2^i}^2 / 2^i <= 65 sum_{k<=M} V_k^2 / k^2``.

    Each dyadic term on the left is controlled, in the argument, by terms of
    the right-hand sum with indices at most ``2^i``, so truncating both sides
    at ``M`` keeps the comparison meaningful.  ``ratio`` is
    ``lhs / sum_k V_k^2 / k^2``, to be compared with ``constant``.
    """
    V = np.asarray(getattr(seq, "values", seq), dtype=float)
    M = V.size
    if M < 4:
        raise ValueError("need M >= 4")
    i = np.arange(1, int(np.log2(M)) + 1)
    lhs = float(np.sum(V[2**i - 1] ** 2 / 2.0**i))
    k = np.arange(1, M + 1, dtype=float)
    base = float(np.sum(V**2 / k**2))
    rhs = constant * base
    ratio = lhs / base if base > 0 else (0.0 if lhs == 0 else np.inf)
    return CheckResult(lhs, rhs, ratio, lhs <= rhs)


def cardinality(values, N: int) -> int:
    """``|A_N|`` with ``A_N = {1 <= i <= N : V_i >= V_N / 2}``."""
    V = np.asarray(values, dtype=float)
    return int(np.count_nonzero(V[:N] >= V[N - 1] / 2.0))


def check_cardinality_property(seq, N: int):
    """Return ``(|A_N|, |A_N| >= N / 2)`` (real comparison, no rounding)."""
    V = np.asarray(getattr(seq, "values", seq), dtype=float)
    if not 1 <= N <= V.size:
        raise ValueError("N must lie in 1..M")
    size = cardinality(V, N)
    return size, 2 * size >= N


@numba.njit(cache=True)
def _dominance_counts(ranks, thresholds, n_ranks):
    # counts[N-1] = #{i <= N : rank_i >= threshold_N}, Fenwick tree over ranks
    M = ranks.size
    tree = np.zeros(n_ranks + 1, dtype=np.int64)
    out = np.empty(M, dtype=np.int64)
    for N in range(M):
        j = ranks[N] + 1
        while j <= n_ranks:
            tree[j] += 1
            j += j & -j
        below = 0
        j = thresholds[N]
        while j > 0:
            below += tree[j]
            j -= j & -j
        out[N] = N + 1 - below
    return out


def cardinality_all(values) -> np.ndarray:
    """``|A_N|`` for every ``N = 1..M`` in ``O(M log M)``."""
    V = np.asarray(values, dtype=float)
    srt = np.sort(V)
    ranks = np.searchsorted(srt, V, side="left").astype(np.int64)
    # number of sorted values strictly below V_N / 2
    thresholds = np.searchsorted(srt, V / 2.0, side="left").astype(np.int64)
    return _dominance_counts(ranks, thresholds, V.size)


def check_cardinality_all(seq):
    """Worst ``(N / 2) / |A_N|`` over all ``N`` and whether every ``N`` passes."""
    V = np.asarray(getattr(seq, "values", seq), dtype=float)
    counts = cardinality_all(V)
    N = np.arange(1, V.size + 1)
    worst = float(np.max(N / (2.0 * counts)))
    return worst, bool(np.all(2 * counts >= N))


def aux_sum(a, m: int | None = None) -> float:
    """``A_m = sum_{k<=m} k^{-2} (a_1 + ... + a_k)^2``."""
    a = np.asarray(a, dtype=float)
    m = a.size if m is None else m
    partial = np.cumsum(a[:m])
    k = np.arange(1, m + 1, dtype=float)
    return float(np.sum(partial**2 / k**2))


def check_aux(a, m: int | None = None, constant: float = AUX_CONSTANT) -> CheckResult:
    """``A_m <= 4 sum_{i<=m} a_i^2`` (plus ``1e-12`` absolute slack)."""
    a = np.asarray(a, dtype=float)
    m = a.size if m is None else m
    if m < 1:
        raise ValueError("m must be >= 1")
    A = aux_sum(a, m)
    energy = float(np.sum(a[:m] ** 2))
    ratio = A / energy if energy > 0 else 0.0
    return CheckResult(A, constant * energy, ratio, A <= constant * energy + 1e-12)


def gen_aux_sequence(seed: int, m_max: int = 512):
    """Random real sequence of random length ``m <= m_max`` in one of several shapes."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, m_max + 1))
    shape = int(rng.integers(6))
    if shape == 0:
        a = rng.standard_normal(m)
    elif shape == 1:
        a = rng.standard_cauchy(m)
    elif shape == 2:
        a = (-1.0) ** np.arange(m) * rng.uniform(0.0, 1.0, m)
    elif shape == 3:
        a = np.abs(rng.standard_normal(m)) * np.arange(1, m + 1) ** -rng.uniform(0.0, 1.5)
    elif shape == 4:
        a = np.where(rng.random(m) < 0.05, rng.standard_t(1.5, m), 0.0)
    else:
        a = np.full(m, rng.uniform(-3.0, 3.0))
    return a


# ---------------------------------------------------------------------------
# chain implications at finite truncation


@dataclass(frozen=True)
class Implication:
    name: str
    lhs: float
    rhs: float
    holds: bool

    def as_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


def check_implications(chain: ChainModel, horizon: int, norms=None, table=None):
    """Finite-``m`` inequalities linking the projective conditions.

    * ``AUX_PAST``: ``sum_{n<=m} ||E(S_n|xi_0)||^2 / n^2 <= 4 sum_{k=1}^m ||Q^k f||^2``
    * ``AUX_FUTURE``: same for ``E(S_n | xi_n)`` against
      ``4 sum_{k=0}^{m-1} ||(Q*)^k f||^2``; the ``k = 0`` term is needed since
      ``E(S_n | xi_n)`` contains ``X_n`` itself.
    * ``BRIDGE_OVER_PAST`` / ``BRIDGE_OVER_FUTURE``: the two-sided series
      dominates each one-sided series term by term.
    * ``LNEGLI_PAST`` / ``LNEGLI_FUTURE``: the dyadic series is at most 65
      times the ``1/n^2`` series.
    """
    from .diagnostics import conditional_norms

    if table is None or table.K_max < horizon:
        table = build_table(chain, horizon)
    if norms is None:
        norms = conditional_norms(chain, horizon, table)
    m = horizon
    pi = chain.stationary
    n = np.arange(1, m + 1, dtype=float)
    past, future, bridge = norms.past[:m], norms.future[:m], norms.bridge[:m]
    c1 = float(np.sum(past**2 / n**2))
    c2 = float(np.sum(future**2 / n**2))
    bad = float(np.sum(bridge**2 / n**2))
    mix_p = float(np.sum(pi_norms(pi, table.qk_f[1 : m + 1]) ** 2))
    mix_f = float(np.sum(pi_norms(pi, table.qstar_k_f[:m]) ** 2))
    eps = 1e-12
    out = [
        Implication("AUX_PAST", c1, 4.0 * mix_p, c1 <= 4.0 * mix_p + eps),
        Implication("AUX_FUTURE", c2, 4.0 * mix_f, c2 <= 4.0 * mix_f + eps),
        Implication(
            "BRIDGE_OVER_PAST",
            c1,
            bad,
            bool(np.all(np.cumsum(past**2 / n**2) <= np.cumsum(bridge**2 / n**2) * (1 + 1e-10) + eps)),
        ),
        Implication(
            "BRIDGE_OVER_FUTURE",
            c2,
            bad,
            bool(np.all(np.cumsum(future**2 / n**2) <= np.cumsum(bridge**2 / n**2) * (1 + 1e-10) + eps)),
        ),
    ]
    if m >= 4:
        for name, seq in (("LNEGLI_PAST", past), ("LNEGLI_FUTURE", future)):
            r = check_lnegli(seq)
            out.append(Implication(name, r.lhs, r.rhs, r.passed))
    return out


# ---------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class CampaignSummary:
    lemma_id: str
    n_cases: int
    n_pass: int
    worst_ratio: float | None
    worst_seed: int | None
    bound: float

    @property
    def all_pass(self) -> bool:
        return self.n_pass == self.n_cases

    def as_dict(self):
        return {
            "lemma_id": self.lemma_id,
            "n_cases": self.n_cases,
            "n_pass": self.n_pass,
            "worst_ratio": self.worst_ratio,
            "worst_seed": self.worst_seed,
            "bound": self.bound,
        }


def _summarize(lemma_id, seeds, ratios, passes, bound):
    if not seeds:
        return CampaignSummary(lemma_id, 0, 0, None, None, bound)
    k = int(np.argmax(ratios))
    return CampaignSummary(lemma_id, len(seeds), int(sum(passes)), float(ratios[k]), int(seeds[k]), bound)


STREAMS = {
    "LNEGLI_CONCAVE": 1,
    "LNEGLI_RANDOM_MIN": 2,
    "LNEGLI_CHAIN": 3,
    "AUX": 4,
    "LSUBAD": 5,
}


def _lnegli_campaign(style, lemma_id, n_cases, seed, M):
    seeds = [case_seed(seed, STREAMS[lemma_id], i) for i in range(n_cases)]
    ratios, passes, card_ratios, card_passes = [], [], [], []
    for s in seeds:
        seq = gen_subadditive(s, M, style)
        r = check_lnegli(seq)
        ratios.append(r.ratio)
        passes.append(r.passed)
        w, ok = check_cardinality_all(seq)
        card_ratios.append(w)
        card_passes.append(ok)
    return (
        _summarize(lemma_id, seeds, ratios, passes, LNEGLI_CONSTANT),
        _summarize(lemma_id.replace("LNEGLI", "CARDINALITY"), seeds, card_ratios, card_passes, 1.0),
    )


def lnegli_campaign(n_cases: int = 1000, seed: int = 0, M: int = 4096, styles=STYLES):
    """Lemma checks on ``n_cases`` sequences per style.

    Returns summaries for the dyadic bound and for the set-size property
    (``CARDINALITY_*``, whose ratio is ``max_N (N/2) / |A_N|``).
    """
    ids = {
        "concave-power": "LNEGLI_CONCAVE",
        "random-min-construction": "LNEGLI_RANDOM_MIN",
        "chain-induced": "LNEGLI_CHAIN",
    }
    out = []
    for style in styles:
        out.extend(_lnegli_campaign(style, ids[style], n_cases, seed, M))
    return out


def aux_campaign(n_cases: int = 10_000, seed: int = 0, m_max: int = 512) -> CampaignSummary:
    seeds = [case_seed(seed, STREAMS["AUX"], i) for i in range(n_cases)]
    ratios, passes = [], []
    for s in seeds:
        r = check_aux(gen_aux_sequence(s, m_max))
        ratios.append(r.ratio)
        passes.append(r.passed)
    return _summarize("AUX", seeds, ratios, passes, AUX_CONSTANT)


def lsubad_case(case_seed_value: int, horizon: int = 64, max_size: int = 16):
    """Subadditivity ratios of the three norm sequences of one random chain."""
    rng = np.random.default_rng(case_seed_value)
    size = int(rng.integers(2, max_size + 1))
    chain = random_chain(rng, size, sparse=bool(rng.random() < 0.4))
    table = build_table(chain, horizon)
    seqs = (
        past_norms(chain, table, horizon),
        future_norms(chain, table, horizon),
        bridge_sequence(chain.kernel, chain.stationary, chain.observable, horizon),
    )
    return chain, [subadditivity_ratio(v, atol=1e-10) for v in seqs]


def lsubad_campaign(n_cases: int = 100, seed: int = 0, horizon: int = 64, max_size: int = 16) -> CampaignSummary:
    seeds = [case_seed(seed, STREAMS["LSUBAD"], i) for i in range(n_cases)]
    ratios, passes = [], []
    for s in seeds:
        _, r = lsubad_case(s, horizon, max_size)
        ratios.append(max(r))
        passes.append(max(r) <= 1.0)
    return _summarize("LSUBAD", seeds, ratios, passes, 1.0)


def run_campaigns(n_cases=None, seed: int = 0, M: int = 4096):
    """All campaigns; ``n_cases`` overrides every default campaign size."""
    sizes = {"lnegli": 1000, "aux": 10_000, "lsubad": 100}
    if n_cases is not None:
        sizes = {k: n_cases for k in sizes}
    out = lnegli_campaign(sizes["lnegli"], seed, M)
    out.append(aux_campaign(sizes["aux"], seed))
    out.append(lsubad_campaign(sizes["lsubad"], seed))
    return out


def replay_case(lemma_id: str, seed: int, M: int = 4096) -> float:
    """Recompute the ratio of one campaign case from its reported seed."""
    styles = {
        "CONCAVE": "concave-power",
        "RANDOM_MIN": "random-min-construction",
        "CHAIN": "chain-induced",
    }
    head, _, tail = lemma_id.partition("_")
    if head in ("LNEGLI", "CARDINALITY") and tail in styles:
        seq = gen_subadditive(seed, M, styles[tail])
        return check_lnegli(seq).ratio if head == "LNEGLI" else check_cardinality_all(seq)[0]
    if lemma_id == "AUX":
        return check_aux(gen_aux_sequence(seed)).ratio
    if lemma_id == "LSUBAD":
        return max(lsubad_case(seed)[1])
    raise ValueError(f"unknown lemma id {lemma_id!r}")
