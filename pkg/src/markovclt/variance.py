"""Variance of partial sums and its decompositions.

``var_seq[n] = E(S_n^2) / n`` is computed exactly from the autocovariances
``c_k = <f, Q^k f>_pi``.  The closed-form long-run variance solves the Poisson
equation ``(I - Q) g = f`` on mean-zero functions.  The dyadic recursion
doubles the block length using the Markov property: the cross term
``E(S_m Sbar_m)`` with ``Sbar_m = X_{m+1} + ... + X_{2m}`` equals
``E[E(S_m | xi_m) E(Sbar_m | xi_m)]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainModel, classify, pi_inner, pi_norm
from .exceptions import HorizonExceeded, NotTotallyErgodic, SingularSystem
from .operators import OperatorTable, build_table


def autocovariances(chain: ChainModel, table: OperatorTable) -> np.ndarray:
    """``c_k = <f, Q^k f>_pi`` for ``k = 0..K_max``."""
    return table.qk_f @ (chain.stationary * chain.observable)


def second_moments(chain: ChainModel, table: OperatorTable, n_max: int | None = None) -> np.ndarray:
    """``E(S_n^2)`` for ``n = 1..n_max`` (entry ``n - 1``)."""
    n_max = table.K_max if n_max is None else n_max
    if n_max > table.K_max + 1:
        raise HorizonExceeded(f"n={n_max} needs lags up to {n_max - 1} > K_max={table.K_max}")
    c = autocovariances(chain, table)[:n_max]
    k = np.arange(n_max, dtype=float)
    # sums over lags 1..n-1
    c1 = np.concatenate(([0.0], np.cumsum(c[1:])))
    c2 = np.concatenate(([0.0], np.cumsum(k[1:] * c[1:])))
    n = np.arange(1, n_max + 1, dtype=float)
    return n * c[0] + 2.0 * (n * c1 - c2)


def variance_sequence(chain: ChainModel, table: OperatorTable, n_max: int | None = None) -> np.ndarray:
    """``E(S_n^2) / n`` for ``n = 1..n_max``."""
    m = second_moments(chain, table, n_max)
    return m / np.arange(1, m.size + 1)


def exact_variance(chain: ChainModel, table: OperatorTable, n: int) -> float:
    """``E(S_n^2) / n = c_0 + (2/n) sum_{k=1}^{n-1} (n - k) c_k``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > table.K_max:
        raise HorizonExceeded(f"n={n} exceeds K_max={table.K_max}")
    return float(variance_sequence(chain, table, n)[-1])


def poisson_solution(chain: ChainModel) -> np.ndarray:
    """Mean-zero ``g`` with ``(I - Q) g = f``.

    Solves ``(I - Q + 1 pi^T) g = f``, which is nonsingular exactly when the
    chain is irreducible; ``pi^T g = pi^T f = 0`` then holds automatically.
    """
    S = chain.n_states
    A = np.eye(S) - chain.kernel + np.outer(np.ones(S), chain.stationary)
    try:
        g = np.linalg.solve(A, chain.observable)
    except np.linalg.LinAlgError:
        raise SingularSystem("I - Q is singular on mean-zero functions") from None
    resid = np.max(np.abs(g - chain.kernel @ g - chain.observable))
    if not np.isfinite(resid) or resid > 1e-8 * max(1.0, np.max(np.abs(g))):
        raise SingularSystem(f"Poisson equation residual {resid:.3e}; I - Q is singular on mean-zero functions")
    return g


def sigma2_closed_form(chain: ChainModel) -> float:
    """Long-run variance ``2 <f, g>_pi - <f, f>_pi`` with ``(I - Q) g = f``."""
    g = poisson_solution(chain)
    f = chain.observable
    return 2.0 * pi_inner(chain, f, g) - pi_inner(chain, f, f)


# ---------------------------------------------------------------------------
# dyadic recursion


@dataclass(frozen=True, eq=False)
class DyadicRecursion:
    r: np.ndarray
    second_moment: np.ndarray  # E(S_{2^r}^2) from the recursion
    normalized: np.ndarray  # E(S_{2^r}^2) / 2^r
    cross: np.ndarray  # E(S_m Sbar_m) for m = 2^j, j < r_max
    past: np.ndarray  # ||E(S_m | xi_0)||, m = 2^j
    future: np.ndarray  # ||E(S_m | xi_m)||, m = 2^j
    delta_curve: np.ndarray  # Delta_{2^r}
    diatic_bound: np.ndarray  # 2^r (E X_0^2 + Delta_{2^r})
    sigma2_dyadic: float

    @property
    def diatic_holds(self) -> np.ndarray:
        slack = 1e-12 * np.maximum(1.0, np.abs(self.diatic_bound))
        return self.second_moment <= self.diatic_bound + slack

    @property
    def L(self) -> float:
        """Limit of the normalized cross-term series (no sign is implied)."""
        return float(self.normalized[-1] - self.normalized[0])


def cross_terms(chain: ChainModel, table: OperatorTable, m: int):
    """``(E(S_m Sbar_m), ||E(S_m | xi_0)||, ||E(S_m | xi_m)||)``.

    ``E(S_m | xi_m) = V*_{m-1} f`` and ``E(Sbar_m | xi_m) = (V_m - I) f`` are
    both functions of ``xi_m``, so the cross term is their ``pi``-inner product.
    """
    if m > table.K_max:
        raise HorizonExceeded(f"m={m} exceeds K_max={table.K_max}")
    a = table.vnstar_f[m - 1]
    b = table.vn_f[m] - table.vn_f[0]
    return pi_inner(chain, a, b), pi_norm(chain, b), pi_norm(chain, a)


def dyadic_recursion(chain: ChainModel, r_max: int, table: OperatorTable | None = None) -> DyadicRecursion:
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    K = max(2**r_max, 1)
    if table is None or table.K_max < K:
        table = build_table(chain, K)
    c0 = pi_inner(chain, chain.observable, chain.observable)
    cross = np.empty(r_max)
    past = np.empty(r_max)
    future = np.empty(r_max)
    for j in range(r_max):
        cross[j], past[j], future[j] = cross_terms(chain, table, 2**j)
    scale = 2.0 ** -np.arange(r_max)
    normalized = c0 + np.concatenate(([0.0], np.cumsum(cross * scale)))
    delta = np.concatenate(([0.0], np.cumsum(past * future * scale)))
    r = np.arange(r_max + 1)
    pow2 = 2.0**r
    return DyadicRecursion(
        r=r,
        second_moment=pow2 * normalized,
        normalized=normalized,
        cross=cross,
        past=past,
        future=future,
        delta_curve=delta,
        diatic_bound=pow2 * (c0 + delta),
        sigma2_dyadic=float(normalized[-1]),
    )


# ---------------------------------------------------------------------------
# binary expansion of n


def binary_blocks(n: int):
    """Blocks ``(j, first, last)`` of the expansion ``S_n = sum_j a_j U_{2^j}``.

    Block ``j`` (present when bit ``j`` of ``n`` is set) covers indices
    ``n_{j-1} + 1 .. n_j`` with ``n_j = sum_{k<=j} a_k 2^k``; low bits come
    first in time.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    blocks = []
    end = 0
    j = 0
    while n >> j:
        if (n >> j) & 1:
            blocks.append((j, end + 1, end + 2**j))
            end += 2**j
        j += 1
    return blocks


@dataclass(frozen=True)
class BinaryDecomposition:
    n: int
    I_n: float
    J_n: float
    pairs: tuple  # (i, j, E(U_{2^i} U_{2^j}), Holder bound) for i < j

    @property
    def second_moment(self) -> float:
        return self.I_n + self.J_n

    @property
    def holder_holds(self) -> bool:
        return all(abs(e) <= b * (1 + 1e-12) + 1e-14 for _, _, e, b in self.pairs)


def binary_decomposition(chain: ChainModel, table: OperatorTable, n: int) -> BinaryDecomposition:
    """``E(S_n^2) = I_n + J_n`` through the dyadic blocks of ``n``.

    For ``i < j`` the block covariance is
    ``E(U_i U_j) = <E(U_i | xi_{n_i}), Q^{gap} E(U_j | xi_{n_{j-1}})>_pi`` with
    ``gap = n_{j-1} - n_i``, and it is bounded by
    ``||E(S_{2^i} | xi_{2^i})|| * ||E(S_{2^j} | xi_0)||``.
    """
    if n > table.K_max:
        raise HorizonExceeded(f"n={n} exceeds K_max={table.K_max}")
    blocks = binary_blocks(n)
    moments = second_moments(chain, table, n)
    I_n = float(sum(moments[2**j - 1] for j, _, _ in blocks))
    pairs = []
    J_half = 0.0
    for a, (i, _, end_i) in enumerate(blocks):
        left = table.vnstar_f[2**i - 1]
        for j, first_j, _ in blocks[a + 1 :]:
            gap = first_j - 1 - end_i
            right = table.vn_f[gap + 2**j] - table.vn_f[gap]
            e = pi_inner(chain, left, right)
            bound = pi_norm(chain, left) * pi_norm(chain, table.vn_f[2**j] - table.vn_f[0])
            pairs.append((i, j, e, bound))
            J_half += e
    return BinaryDecomposition(n, I_n, 2.0 * J_half, tuple(pairs))


# ---------------------------------------------------------------------------
# eta^2 and theta^2


def extrapolate(ns, values):
    """Limit as ``n -> inf`` assuming ``v(n) = a + b/n + c/n^2`` on the last three points.

    Returns ``(estimate, spread)``; the spread is the distance to the
    two-point (``a + b/n``) estimate.
    """
    ns = np.asarray(ns, dtype=float)[-3:]
    v = np.asarray(values, dtype=float)[-3:]
    h = 1.0 / ns
    if ns.size < 2:
        return float(v[-1]), float("inf")
    lin = v[-1] - h[-1] * (v[-1] - v[-2]) / (h[-1] - h[-2])
    if ns.size < 3:
        return float(lin), float(abs(lin - v[-1]))
    quad = np.polyval(np.polyfit(h, v, 2), 0.0)
    return float(quad), float(abs(quad - lin))


@dataclass(frozen=True, eq=False)
class EtaTheta:
    n: np.ndarray
    eta2_curve: np.ndarray
    theta2_curve: np.ndarray
    eta2: float | None
    theta2: float | None
    eta2_spread: float | None
    theta2_spread: float | None
    totally_ergodic: bool


def eta2_theta2(
    chain: ChainModel,
    n_grid,
    table: OperatorTable | None = None,
    bridge=None,
    strict: bool = False,
) -> EtaTheta:
    """Curves ``||E(S_n | xi_0, xi_n)||^2 / n`` and ``E(S_n^2)/n`` minus it.

    ``bridge`` optionally supplies bridge norms for ``n = 1..max(n_grid)``.
    Point estimates come from :func:`extrapolate` on the last three grid
    points and are withheld (``None``) for chains that are not totally
    ergodic; ``strict=True`` raises :class:`NotTotallyErgodic` instead.
    """
    from .diagnostics import bridge_sequence

    ns = np.asarray(sorted(set(int(n) for n in n_grid)))
    n_top = int(ns[-1])
    if table is None or table.K_max < n_top:
        table = build_table(chain, n_top)
    if bridge is None or len(bridge) < n_top:
        bridge = bridge_sequence(chain.kernel, chain.stationary, chain.observable, n_top)
    bridge = np.asarray(bridge)
    var = variance_sequence(chain, table, n_top)
    eta = bridge[ns - 1] ** 2 / ns
    theta = var[ns - 1] - eta
    te = classify(chain).totally_ergodic
    if not te:
        if strict:
            raise NotTotallyErgodic("eta^2 and theta^2 limits need a totally ergodic chain")
        return EtaTheta(ns, eta, theta, None, None, None, None, False)
    e, es = extrapolate(ns, eta)
    t, ts = extrapolate(ns, theta)
    return EtaTheta(ns, eta, theta, e, t, es, ts, True)


# ---------------------------------------------------------------------------
# profile


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    var_seq: np.ndarray  # n = 1..N
    eta2_curve: np.ndarray  # n = 1..N
    theta2_curve: np.ndarray
    sigma2_closed: float | None
    sigma2_dyadic: float
    eta2: float | None
    theta2: float | None
    eta2_spread: float | None
    theta2_spread: float | None
    delta_curve: np.ndarray
    dyadic: DyadicRecursion
    provenance: dict = field(default_factory=dict)

    @property
    def sigma2(self) -> float:
        return self.sigma2_closed if self.sigma2_closed is not None else self.sigma2_dyadic


def variance_profile(chain: ChainModel, N_max: int, table: OperatorTable | None = None, bridge=None) -> VarianceProfile:
    """Exact variance curve plus ``sigma^2``, ``eta^2``, ``theta^2`` to horizon ``N_max``."""
    from .diagnostics import bridge_sequence

    if table is None or table.K_max < N_max:
        table = build_table(chain, N_max)
    if bridge is None or len(bridge) < N_max:
        bridge = bridge_sequence(chain.kernel, chain.stationary, chain.observable, N_max)
    bridge = np.asarray(bridge)[:N_max]
    var = variance_sequence(chain, table, N_max)
    n = np.arange(1, N_max + 1)
    eta_curve = bridge**2 / n
    theta_curve = var - eta_curve
    r_max = int(np.floor(np.log2(N_max)))
    dy = dyadic_recursion(chain, r_max, table)
    try:
        s2 = sigma2_closed_form(chain)
        s2_src = "closed_form"
    except SingularSystem:
        s2 = None
        s2_src = "unavailable"
    et = eta2_theta2(chain, 2 ** np.arange(max(r_max - 2, 0), r_max + 1), table, bridge)
    return VarianceProfile(
        var_seq=var,
        eta2_curve=eta_curve,
        theta2_curve=theta_curve,
        sigma2_closed=s2,
        sigma2_dyadic=dy.sigma2_dyadic,
        eta2=et.eta2,
        theta2=et.theta2,
        eta2_spread=et.eta2_spread,
        theta2_spread=et.theta2_spread,
        delta_curve=dy.delta_curve,
        dyadic=dy,
        provenance={
            "sigma2": s2_src,
            "sigma2_dyadic": f"sequence value at n=2^{r_max}",
            "eta2": "extrapolated" if et.eta2 is not None else "withheld: chain not totally ergodic",
            "theta2": "extrapolated" if et.theta2 is not None else "withheld: chain not totally ergodic",
        },
    )


def write_variance_csv(profile: VarianceProfile, path):
    """Columns ``n, var_seq, eta2_curve, theta2_curve``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "var_seq", "eta2_curve", "theta2_curve"])
        for i in range(profile.var_seq.size):
            w.writerow([i + 1, repr(float(profile.var_seq[i])), repr(float(profile.eta2_curve[i])), repr(float(profile.theta2_curve[i]))])
