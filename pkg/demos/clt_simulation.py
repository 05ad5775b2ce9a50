"""Raw and bridge-centered sums against their normal limits.

Run with ``python3 demos/clt_simulation.py``; takes a few seconds.
"""

import numpy as np

from markovclt import gallery
from markovclt.simulate import CENTERED, RAW, calibrate_ks, clt_statistic, clt_test, simulate
from markovclt.variance import variance_profile

n, N = 1024, 10_000
print(f"99% KS distance of {N} true normal draws: {calibrate_ks(N, n_reps=100):.4f}")

for chain_name, chain in (("two-state", gallery.two_state_chain(0.3)), ("cycle-walk", gallery.cycle_walk(5, 0.8))):
    prof = variance_profile(chain, n)
    batch = simulate(chain, n, N, seed=0, workers=4)
    for kind, target in ((RAW, prof.sigma2), (CENTERED, prof.theta2)):
        r = clt_test(batch, kind, target)
        print(f"{chain_name:10s} {kind:8s} target={target:.4f} sample var={r.sample_var:.4f} KS={r.ks_distance:.4f}")

    # histogram of the raw statistic against the normal density, as text
    x = clt_statistic(batch, RAW)
    edges = np.linspace(-4, 4, 17) * np.sqrt(prof.sigma2)
    counts, _ = np.histogram(x, edges)
    for lo, c in zip(edges[:-1], counts):
        print(f"  {lo:6.2f} {'#' * int(60 * c / counts.max())}")

# same seed, any worker count: identical sums
a = simulate(gallery.random_dense(4), 64, 2000, seed=5, workers=1).sums
b = simulate(gallery.random_dense(4), 64, 2000, seed=5, workers=4, chunk_size=100).sums
print("bit-identical across workers:", np.array_equal(a, b))
