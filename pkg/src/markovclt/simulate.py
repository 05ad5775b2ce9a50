"""Seeded stationary trajectories and empirical CLT checks.

Path ``i`` draws all of its uniforms from its own stream,
``PCG64(SeedSequence(seed, spawn_key=(i,)))``: one uniform picks ``xi_0``
from ``pi`` and one per step picks the next state by inverse CDF over the
kernel row in state order.  A batch therefore does not depend on how paths
are grouped into chunks or spread over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .chain import ChainModel
from .config import DEFAULT_CAPS, DEFAULT_TOLERANCES
from .diagnostics import _check_bridge_caps, bridge_table

RAW = "raw"
CENTERED = "centered"


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(path_index,))))


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    seed: int
    n_steps: int
    n_paths: int
    x0: np.ndarray
    xn: np.ndarray
    sums: np.ndarray
    centered: np.ndarray

    def write_csv(self, path):
        """Per-path rows ``path_index, x0, xn, S_n, centered``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path_index", "x0", "xn", "S_n", "centered"])
            for i in range(self.n_paths):
                w.writerow([i, int(self.x0[i]), int(self.xn[i]), repr(float(self.sums[i])), repr(float(self.centered[i]))])


def _flat_cdf(P):
    """Row-offset cumulative table: row ``x`` stored as ``x + cdf(x, .)``."""
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    return (np.arange(P.shape[0])[:, None] + cdf).reshape(-1)


def _step(flat, S, x, u):
    # number of entries of row x not exceeding u, found in the flattened table
    j = np.searchsorted(flat, x + u, side="right") - x * S
    return np.minimum(j, S - 1)


def _run_chunk(chain: ChainModel, n_steps, seed, start, stop):
    u = np.stack([path_rng(seed, i).random(n_steps + 1) for i in range(start, stop)])
    S = chain.n_states
    flat = _flat_cdf(chain.kernel)
    f = chain.observable
    x = _step(_flat_cdf(chain.stationary[None, :]), S, np.zeros(stop - start, dtype=np.intp), u[:, 0])
    x0 = x.copy()
    s = np.zeros(stop - start)
    for t in range(1, n_steps + 1):
        x = _step(flat, S, x, u[:, t])
        s += f[x]
    return x0, x, s


def simulate(
    chain: ChainModel,
    n_steps: int,
    n_paths: int,
    seed: int = 0,
    workers: int = 1,
    chunk_size: int = 2048,
    caps=DEFAULT_CAPS,
) -> TrajectoryBatch:
    """Simulate ``n_paths`` stationary paths of ``n_steps`` transitions.

    ``centered`` holds ``S_n - E(S_n | xi_0, xi_n)`` from the exact bridge
    table.
    """
    if n_steps < 1 or n_paths < 1:
        raise ValueError("n_steps and n_paths must be >= 1")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    _check_bridge_caps(chain, n_steps, caps)
    bounds = [(a, min(a + chunk_size, n_paths)) for a in range(0, n_paths, chunk_size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_chunk(chain, n_steps, seed, *b), bounds))
    else:
        parts = [_run_chunk(chain, n_steps, seed, *b) for b in bounds]
    x0 = np.concatenate([p[0] for p in parts])
    xn = np.concatenate([p[1] for p in parts])
    sums = np.concatenate([p[2] for p in parts])
    C, _ = bridge_table(chain, n_steps)
    centered = sums - C[x0, xn]
    for a in (x0, xn, sums, centered):
        a.flags.writeable = False
    return TrajectoryBatch(seed, int(n_steps), int(n_paths), x0, xn, sums, centered)


@dataclass(frozen=True)
class CltTestResult:
    statistic_kind: str
    target_variance: float
    ks_distance: float | None  # None when the target is degenerate
    sample_mean: float
    sample_var: float
    max_abs: float
    degenerate: bool
    n_steps: int
    n_paths: int

    def as_dict(self):
        return {
            "statistic_kind": self.statistic_kind,
            "target_variance": self.target_variance,
            "ks_distance": self.ks_distance,
            "sample_mean": self.sample_mean,
            "sample_var": self.sample_var,
            "max_abs": self.max_abs,
            "degenerate": self.degenerate,
            "n_steps": self.n_steps,
            "n_paths": self.n_paths,
        }


def clt_statistic(batch: TrajectoryBatch, kind: str = RAW) -> np.ndarray:
    if kind == RAW:
        values = batch.sums
    elif kind == CENTERED:
        values = batch.centered
    else:
        raise ValueError(f"kind must be '{RAW}' or '{CENTERED}'")
    return values / math.sqrt(batch.n_steps)


def clt_test(batch: TrajectoryBatch, kind: str, target_variance: float, tol=DEFAULT_TOLERANCES) -> CltTestResult:
    """One-sample KS distance of the normalized sums against ``N(0, target)``.

    A target below ``tol.degenerate_variance`` skips the KS step; judge such
    batches by ``max_abs``.
    """
    if target_variance < 0:
        raise ValueError("target_variance must be >= 0")
    x = clt_statistic(batch, kind)
    degenerate = target_variance < tol.degenerate_variance
    ks = None
    if not degenerate:
        ks = float(stats.kstest(x, "norm", args=(0.0, math.sqrt(target_variance))).statistic)
    return CltTestResult(
        statistic_kind=kind,
        target_variance=float(target_variance),
        ks_distance=ks,
        sample_mean=float(np.mean(x)),
        sample_var=float(np.var(x, ddof=1)) if x.size > 1 else 0.0,
        max_abs=float(np.max(np.abs(x))),
        degenerate=degenerate,
        n_steps=batch.n_steps,
        n_paths=batch.n_paths,
    )


def calibrate_ks(n_samples: int, n_reps: int = 200, quantile: float = 0.99, seed: int = 0) -> float:
    """Upper ``quantile`` of the KS distance of ``n_samples`` true N(0, 1) draws."""
    rng = np.random.default_rng(seed)
    d = [stats.kstest(rng.standard_normal(n_samples), "norm").statistic for _ in range(n_reps)]
    return float(np.quantile(d, quantile))


@dataclass(frozen=True, eq=False)
class BridgeCheck:
    pairs: np.ndarray  # (x0, xn) rows
    counts: np.ndarray
    group_means: np.ndarray
    exact: np.ndarray
    z: np.ndarray
    max_abs_z: float


def empirical_bridge_check(chain: ChainModel, batch: TrajectoryBatch) -> BridgeCheck:
    """Compare endpoint-group means of ``S_n`` with ``E(S_n | xi_0, xi_n)``.

    Groups with fewer than two paths are skipped.  A zero-variance group
    scores ``z = 0`` when its mean matches the exact value to rounding.
    """
    C, _ = bridge_table(chain, batch.n_steps)
    S = chain.n_states
    key = batch.x0 * S + batch.xn
    counts = np.bincount(key, minlength=S * S)
    sums = np.bincount(key, weights=batch.sums, minlength=S * S)
    sq = np.bincount(key, weights=batch.sums**2, minlength=S * S)
    keep = np.flatnonzero(counts >= 2)
    cnt = counts[keep].astype(float)
    mean = sums[keep] / cnt
    var = np.maximum(sq[keep] / cnt - mean**2, 0.0) * cnt / (cnt - 1.0)
    exact = C.reshape(-1)[keep]
    diff = mean - exact
    se = np.sqrt(var / cnt)
    scale = 1e-9 * (1.0 + np.abs(exact))
    z = np.where(se > scale, diff / np.where(se > scale, se, 1.0), np.where(np.abs(diff) <= scale, 0.0, np.inf))
    pairs = np.column_stack([keep // S, keep % S])
    return BridgeCheck(pairs, counts[keep], mean, exact, z, float(np.max(np.abs(z))) if z.size else 0.0)
