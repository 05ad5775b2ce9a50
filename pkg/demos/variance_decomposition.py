"""Walk through the variance of S_n on a two-state flip chain.

Run with ``python3 demos/variance_decomposition.py``.
"""

import numpy as np

from markovclt import gallery
from markovclt.operators import build_table
from markovclt.variance import binary_decomposition, dyadic_recursion, sigma2_closed_form, variance_profile

p = 0.3
chain = gallery.two_state_chain(p)
print("kernel:\n", chain.kernel)
print("pi:", chain.stationary, " f:", chain.observable)

# closed form: for this chain sigma^2 = (1 - p) / p
s2 = sigma2_closed_form(chain)
print(f"sigma^2 closed form = {s2:.12f}  (1-p)/p = {(1 - p) / p:.12f}")

# E(S_n^2)/n approaches sigma^2 at rate 1/n
prof = variance_profile(chain, 4096)
for n in (1, 2, 16, 256, 4096):
    print(f"  n={n:5d}  E(S_n^2)/n = {prof.var_seq[n - 1]:.8f}")

# doubling recursion: E(S_2m^2) = 2 E(S_m^2) + 2 E(S_m Sbar_m)
table = build_table(chain, 4096)
dy = dyadic_recursion(chain, 12, table)
print("\nr  E(S_2^r^2)/2^r   Delta_2^r   bound ok")
for r in range(0, 13, 3):
    print(f"{r:2d}  {dy.normalized[r]:.10f}  {dy.delta_curve[r]:.6f}  {bool(dy.diatic_holds[r])}")

# S_13 split along the binary digits of 13 = 1 + 4 + 8
b = binary_decomposition(chain, table, 13)
print(f"\nn=13: I_n={b.I_n:.6f} J_n={b.J_n:.6f} sum={b.second_moment:.6f} "
      f"exact={prof.var_seq[12] * 13:.6f}  block-pair bounds ok: {b.holder_holds}")

# eta^2 + theta^2: the bridge part of S_n is bounded here, so eta^2 -> 0
print(f"\neta^2 ~ {prof.eta2:.3e} (spread {prof.eta2_spread:.1e}), theta^2 ~ {prof.theta2:.10f}")
print(f"eta^2 + theta^2 - sigma^2 = {prof.eta2 + prof.theta2 - s2:.2e}")

# degenerate case: the deterministic 2-cycle has sigma^2 = 0 and |S_n| <= 1
cyc = gallery.deterministic_cycle()
v = variance_profile(cyc, 64).var_seq
print("\n2-cycle sigma^2:", sigma2_closed_form(cyc), " E(S_n^2)/n for n=1..6:", np.round(v[:6], 4))
