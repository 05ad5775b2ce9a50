"""Projective-condition verdicts across the reference chains.

Run with ``python3 demos/projective_conditions.py``.
"""

import numpy as np

from markovclt import gallery
from markovclt.chain import classify, pi_norms
from markovclt.diagnostics import condition_report
from markovclt.operators import build_table

chains = gallery.gallery()
chains["2-cycle"] = gallery.deterministic_cycle()

for name, chain in chains.items():
    c = classify(chain)
    flags = [k for k in ("reversible", "normal", "totally_ergodic") if getattr(c, k)]
    print(f"\n{name}: S={chain.n_states} [{', '.join(flags) or 'none'}]  defect={c.normality_defect:.1e}")
    for row in condition_report(chain, 1024):
        slope = "   -inf" if not np.isfinite(row.tail_exponent) else f"{row.tail_exponent:7.2f}"
        print(f"  {row.condition_id:10s} {row.verdict:12s} partial={row.partial_sum:10.5f} slope={slope}")

# a normal chain: ||V_n f|| and ||V*_n f|| agree, E(S_n|xi_0) and E(S_n|xi_n) are one Q apart
cw = chains["cycle-walk"]
t = build_table(cw, 8)
print("\ncycle-walk ||V_n f||  ", np.round(pi_norms(cw.stationary, t.vn_f), 6))
print("cycle-walk ||V*_n f|| ", np.round(pi_norms(cw.stationary, t.vnstar_f), 6))
rd = chains["random-dense"]
t = build_table(rd, 8)
print("random-dense ||V_n f||  ", np.round(pi_norms(rd.stationary, t.vn_f), 6))
print("random-dense ||V*_n f|| ", np.round(pi_norms(rd.stationary, t.vnstar_f), 6))
