"""Meta distribution of the per-link success probability.

Run with ``python notebooks/03_meta_distribution.py``.  For a fixed network
realization each link succeeds with some probability over the fading; the
meta distribution gives the fraction of links whose success probability
exceeds a reliability target ``p_t``.
"""

import numpy as np

from fbrnet.meta import MetaQuery, meta_cdf_beta, meta_cdf_gilpelaez, meta_empirical, moment_set
from fbrnet.network import NetworkConfig
from fbrnet.simulator import SimPlan

net = NetworkConfig(1e-6)      # 1 BS/km^2, interference limited
p = np.array([0.5, 0.7, 0.9, 0.95])

# ---------------------------------------------------------------------------
#  Moments and the two reconstructions
# ---------------------------------------------------------------------------

for r0 in (150.0, 250.0, 500.0):
    q = MetaQuery(1.0, 128, 1e-2, r0=r0)
    ms = moment_set(q, net)
    print(f"r0 = {r0:g} m: mean {ms.m1:.4f}, variance {ms.variance:.5f}")
    print("   p_t   inversion  beta")
    for pt, g, b in zip(p, meta_cdf_gilpelaez(q, net, p), meta_cdf_beta(q, net, p)):
        print(f"  {pt:.2f}   {g:.4f}     {b:.4f}")

# ---------------------------------------------------------------------------
#  Simulation
# ---------------------------------------------------------------------------

q = MetaQuery(1.0, 128, 1e-2, r0=150.0)
s = meta_empirical(q, net, SimPlan(300, seed=3, fading_draws=500, region_scale=40.0))
print("\nSimulated fraction of links above p_t (300 networks):", np.round(s.ccdf(p), 3))

# ---------------------------------------------------------------------------
#  Cost of short codewords at a demanding target
# ---------------------------------------------------------------------------

q = MetaQuery(3.4594, 128, 1e-5, r0=150.0, p_t=0.9)
print(f"\nFraction above 0.9 at R_t = 3.4594: Shannon {meta_cdf_gilpelaez(q.as_ar(), net):.4f}, "
      f"n = 128 {meta_cdf_gilpelaez(q, net):.4f}")
