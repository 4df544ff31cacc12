"""Rate outage and reliability.

Run with ``python notebooks/02_outage_and_reliability.py``.  The Shannon
outage bounds the finite-blocklength outage from below; evaluating it at a
target rate shifted by the dispersion back-off bounds it from above.
"""

import numpy as np

from fbrnet.network import NetworkConfig
from fbrnet.outage import OutageQuery, outage_bounds, outage_spatial_eta4, reliability
from fbrnet.rates import CodingConfig
from fbrnet.simulator import SimPlan, empirical_outage

net = NetworkConfig.from_snr_db(0.0, 1.0)

# ---------------------------------------------------------------------------
#  Bounds vs simulation at a fixed serving distance
# ---------------------------------------------------------------------------

print("Outage at R_t = 1 bit/use, n = 128")
print("    r0   eps      lower    simulated  upper")
for r0 in (100.0, 200.0, 400.0):
    plan = SimPlan(50_000, r0=r0, seed=2)
    for eps in (1e-2, 1e-6):
        coding = CodingConfig(128, eps)
        b = outage_bounds(OutageQuery(1.0, coding, r0), net)
        sim = empirical_outage(net, 1.0, coding, plan).mean
        print(f"  {r0:5.0f}  {eps:6.0e}   {b.lower:.4f}   {sim:.4f}     {b.upper:.4f}")

# ---------------------------------------------------------------------------
#  Averaged over r0: closed form for eta = 4
# ---------------------------------------------------------------------------

print("\nUpper bound averaged over r0, closed form vs quadrature")
for rt in (0.5, 1.0, 2.0):
    q = OutageQuery(rt, CodingConfig(128, 1e-5))
    print(f"  R_t = {rt}: {outage_spatial_eta4(q, net):.6f} vs {outage_bounds(q, net).upper:.6f}")

# ---------------------------------------------------------------------------
#  Reliability: decoding errors against outage
# ---------------------------------------------------------------------------

# a tiny FER threshold forces a large back-off, hence more outage; a large one
# adds decoding errors, so the reliability peaks in between
net_r = NetworkConfig.from_snr_db(10.0, 0.1)
eps = np.geomspace(1e-8, 0.3, 12)
ar = reliability(OutageQuery(1.0, CodingConfig(128, 1e-2)), net_r, regime="ar")
print(f"\nReliability vs FER threshold (n = 128, R_t = 1, Shannon value {ar:.4f})")
for e in eps:
    print(f"  {e:8.1e}: {reliability(OutageQuery(1.0, CodingConfig(128, float(e))), net_r):.4f}")
