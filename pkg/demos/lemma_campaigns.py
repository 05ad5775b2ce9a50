"""Randomized checks of the inequalities on subadditive and real sequences.

Run with ``python3 demos/lemma_campaigns.py``.
"""

import numpy as np

from markovclt.lemmas import (
    STYLES,
    check_aux,
    check_cardinality_all,
    check_lnegli,
    gen_subadditive,
    replay_case,
    run_campaigns,
)

# one sequence of each kind
for style in STYLES:
    seq = gen_subadditive(2024, 4096, style)
    r = check_lnegli(seq)
    worst, ok = check_cardinality_all(seq)
    print(f"{style:24s} V_1..4={np.round(seq.values[:4], 3)} dyadic/series ratio={r.ratio:.3f} "
          f"|A_N| >= N/2 for all N: {ok}")

# the constant 4 is sharp: a_k = k^(-1/2) pushes the ratio toward it
for m in (10, 1000, 100_000):
    print(f"a_k = k^-1/2, m={m:6d}: A_m / sum a^2 = {check_aux(np.arange(1, m + 1) ** -0.5).ratio:.4f}")

# small campaigns and replay of the worst case
for s in run_campaigns(n_cases=50, seed=1, M=1024):
    again = replay_case(s.lemma_id, s.worst_seed, 1024)
    print(f"{s.lemma_id:24s} {s.n_pass}/{s.n_cases} worst={s.worst_ratio:.4f} bound={s.bound:g} replay={again:.4f}")
