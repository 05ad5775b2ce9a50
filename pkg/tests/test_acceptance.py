"""Acceptance criteria 1-11, each at its stated tolerance and time budget.

Every test appends one ``PASS``/``FAIL`` line to ``RESULTS``; the lines are
printed as each test finishes and again in the terminal summary.  Run this
file directly (``python3 tests/test_acceptance.py``) for the lines alone.
"""

import json
import math
import time

import numpy as np
import pytest

from markovclt import gallery
from markovclt.chain import dump_chain_spec, pi_norms
from markovclt.cli import main
from markovclt.diagnostics import future_norms, past_norms
from markovclt.lemmas import aux_campaign, lnegli_campaign, lsubad_campaign
from markovclt.operators import build_table
from markovclt.report import dumps_report, strip_timings
from markovclt.simulate import CENTERED, RAW, calibrate_ks, clt_statistic, clt_test, simulate
from markovclt.variance import (
    binary_decomposition,
    dyadic_recursion,
    eta2_theta2,
    exact_variance,
    sigma2_closed_form,
    variance_profile,
)

RESULTS = []


def record(k, title, ok, detail):
    line = f"criterion {k:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_01_two_state_closed_form():
    t0 = time.perf_counter()
    worst_closed, worst_seq = 0.0, 0.0
    for p in (0.1, 0.3, 0.45):
        chain = gallery.two_state_chain(p)
        s2 = sigma2_closed_form(chain)
        worst_closed = max(worst_closed, abs(s2 - (1 - p) / p))
        v = exact_variance(chain, build_table(chain, 2**12), 2**12)
        worst_seq = max(worst_seq, abs(v - s2) / s2)
    dt = time.perf_counter() - t0
    ok = worst_closed <= 1e-9 and worst_seq <= 0.02 and dt < 1.0
    record(1, "two-state sigma2", ok, f"|closed-(1-p)/p|={worst_closed:.2e}, rel var gap={worst_seq:.2e}, {dt:.2f}s")


def test_02_dyadic_recursion_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for chain in gallery.gallery().values():
        t = build_table(chain, 2**12)
        d = dyadic_recursion(chain, 12, t)
        for r in range(13):
            exact = exact_variance(chain, t, 2**r)
            worst = max(worst, abs(d.normalized[r] - exact) / abs(exact))
    dt = time.perf_counter() - t0
    record(2, "dyadic recursion", worst <= 1e-8 and dt < 10.0, f"max rel err={worst:.2e}, {dt:.2f}s")


def test_03_diatic_and_holder_bounds():
    rng = np.random.default_rng(0)
    ns = sorted({2**r - 1 for r in range(1, 13)} | {2**12} | set(rng.integers(1, 2**12, 200).tolist()))
    n_diatic = n_pairs = bad = 0
    for chain in gallery.gallery().values():
        t = build_table(chain, 2**12)
        d = dyadic_recursion(chain, 12, t)
        n_diatic += d.diatic_holds.size
        bad += int(np.count_nonzero(~d.diatic_holds))
        for n in ns:
            b = binary_decomposition(chain, t, n)
            n_pairs += len(b.pairs)
            bad += sum(abs(e) > bnd * (1 + 1e-12) + 1e-14 for _, _, e, bnd in b.pairs)
    record(3, "diatic and Hoelder bounds", bad == 0, f"{n_diatic} dyadic terms, {n_pairs} block pairs, {bad} violations")


def test_04_lemma_aux():
    t0 = time.perf_counter()
    s = aux_campaign(10_000, seed=0, m_max=512)
    dt = time.perf_counter() - t0
    ok = s.all_pass and s.n_cases == 10_000 and dt < 5.0
    record(4, "A_m <= 4 sum a^2", ok, f"{s.n_pass}/{s.n_cases}, worst ratio={s.worst_ratio:.4f}, {dt:.2f}s")


def test_05_lemma_lnegli_and_cardinality():
    t0 = time.perf_counter()
    out = lnegli_campaign(n_cases=1000, seed=0, M=4096)
    dt = time.perf_counter() - t0
    lneg = [s for s in out if s.lemma_id.startswith("LNEGLI")]
    card = [s for s in out if s.lemma_id.startswith("CARDINALITY")]
    n = sum(s.n_cases for s in lneg)
    ok = n == 3000 and all(s.all_pass for s in out) and dt < 30.0
    worst = max(s.worst_ratio for s in lneg)
    worst_card = max(s.worst_ratio for s in card)
    record(
        5,
        "dyadic subadditive bound",
        ok,
        f"{sum(s.n_pass for s in lneg)}/{n} (incl. chain-induced), worst ratio={worst:.3f} vs 65, "
        f"max (N/2)/|A_N|={worst_card:.4f}, {dt:.2f}s",
    )


def test_06_lemma_lsubad():
    t0 = time.perf_counter()
    s = lsubad_campaign(100, seed=0, horizon=64, max_size=16)
    dt = time.perf_counter() - t0
    ok = s.all_pass and dt < 60.0
    record(6, "norm sequences subadditive", ok, f"{s.n_pass}/{s.n_cases}, worst ratio={s.worst_ratio:.4f}, {dt:.2f}s")


def test_07_normal_chain_coincidence():
    chain = gallery.cycle_walk(5, 0.8)
    t = build_table(chain, 4096)
    past = past_norms(chain, t, 4096)
    future = future_norms(chain, t, 4096)
    rel = np.abs(past - future) / np.maximum(np.abs(future), 1e-300)
    worst = float(rel.max())
    # operator form: ||V_n f|| against ||V*_n f||, reported alongside
    op = np.abs(pi_norms(chain.stationary, t.vn_f) - pi_norms(chain.stationary, t.vnstar_f))
    op_rel = float(np.max(op / pi_norms(chain.stationary, t.vnstar_f)))
    record(
        7,
        "normal chain past[n] = future[n]",
        worst <= 1e-8,
        f"max rel |past-future|={worst:.3e} (n=1: {past[0]:.4f} vs {future[0]:.4f}); "
        f"||V_n f|| vs ||V*_n f|| max rel={op_rel:.1e}",
    )


def test_08_eta_theta_sum():
    chain = gallery.two_state_chain(0.3)
    et = eta2_theta2(chain, [2**10, 2**11, 2**12])
    gap = abs(et.eta2 + et.theta2 - sigma2_closed_form(chain))
    record(8, "eta2 + theta2 = sigma2", gap <= 1e-6, f"|eta2+theta2-sigma2|={gap:.2e}, eta2={et.eta2:.2e}")


@pytest.mark.slow
def test_09_clt_ks():
    t0 = time.perf_counter()
    n, N = 4096, 20_000
    threshold = 0.02
    calib = calibrate_ks(N, n_reps=200, quantile=0.99, seed=1)
    cases = []
    two = gallery.two_state_chain(0.3)
    prof = variance_profile(two, n)
    b = simulate(two, n, N, seed=0, workers=4)
    cases.append(("two-state raw", clt_test(b, RAW, prof.sigma2).ks_distance))
    cases.append(("two-state centered", clt_test(b, CENTERED, prof.theta2).ks_distance))
    cyc = gallery.cycle_walk(5, 0.8)
    b = simulate(cyc, n, N, seed=0, workers=4)
    cases.append(("cycle-walk raw", clt_test(b, RAW, sigma2_closed_form(cyc)).ks_distance))
    dt = time.perf_counter() - t0
    ok = calib < threshold and all(d <= threshold for _, d in cases) and dt < 120.0
    detail = ", ".join(f"{k}={d:.4f}" for k, d in cases)
    record(9, "KS distance <= 0.02", ok, f"{detail}; normal-sample 99% KS={calib:.4f}; {dt:.1f}s")


def test_10_degenerate_cycle():
    cyc = gallery.deterministic_cycle()
    s2 = sigma2_closed_form(cyc)
    worst = 0.0
    for n in (1, 2, 255, 256, 4095, 4096):
        b = simulate(cyc, n, 1000, seed=0)
        excess = float(np.max(np.abs(clt_statistic(b, RAW)))) - 1.0 / math.sqrt(n)
        worst = max(worst, excess)
    ok = s2 == 0.0 and worst <= 0.0
    record(10, "2-cycle degenerate", ok, f"sigma2_closed={s2!r}, max(|S_n/sqrt n| - 1/sqrt n)={worst:.1e}")


@pytest.mark.slow
def test_11_determinism(tmp_path):
    spec = tmp_path / "rd.json"
    dump_chain_spec(gallery.random_dense(6, 0), spec)
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert main(["analyze", str(spec), "--seed", "3", "--workers", str(1 + 3 * i), "--out", str(out)]) == 0
        raw = out.read_text()
        assert raw == dumps_report(json.loads(raw))  # the file is the canonical serialization
        texts.append(dumps_report(strip_timings(json.loads(raw))))
    record(11, "analyze reproducible", texts[0] == texts[1], f"{len(texts[0])} bytes compared without timings (default flags, 1 vs 4 workers)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
