"""Average coding rate of a Poisson cellular downlink.

Run with ``python notebooks/01_average_rate.py``.  The script walks from the
point-to-point normal approximation to the rate averaged over interference
and over the serving distance, and checks one value against simulation.
"""

from fbrnet.network import NetworkConfig
from fbrnet.rates import CodingConfig, avg_capacity_ar, avg_rate_fixed_r0, avg_rate_spatial, awgn_fbr_rate
from fbrnet.simulator import SimPlan, empirical_avg_rate

# ---------------------------------------------------------------------------
#  Point-to-point: the price of short codewords
# ---------------------------------------------------------------------------

print("AWGN rate at 10 dB")
for n in (128, 512, 2048, 10 ** 6):
    r = awgn_fbr_rate(10.0, CodingConfig(n, 1e-5))
    print(f"  n = {n:>7}: rate {r.rate:.4f} (capacity {r.capacity_term:.4f}, "
          f"penalty {r.dispersion_term:.4f}, correction {r.correction_term:.4f})")

# ---------------------------------------------------------------------------
#  Network at a fixed serving distance
# ---------------------------------------------------------------------------

# 1 BS per km^2; the SNR is the transmit SNR referenced at 1 km
r0 = 250.0
print(f"\nAverage rate at r0 = {r0:g} m, 1 BS/km^2")
print("  snr_db   shannon   n=2048    n=128")
for snr in (-10.0, 0.0, 10.0, 20.0, 30.0):
    net = NetworkConfig.from_snr_db(snr, 1.0)
    geom = net.link(r0)
    ar = avg_capacity_ar(geom, net)
    long = avg_rate_fixed_r0(geom, net, CodingConfig(2048, 1e-5)).rate
    short = avg_rate_fixed_r0(geom, net, CodingConfig(128, 1e-5)).rate
    print(f"  {snr:6.1f}   {ar:.4f}    {long:.4f}   {short:.4f}")

# interference caps the rate: the curves flatten once noise is negligible

# ---------------------------------------------------------------------------
#  Simulation check
# ---------------------------------------------------------------------------

net = NetworkConfig.from_snr_db(0.0, 1.0)
coding = CodingConfig(128, 1e-2)
est = empirical_avg_rate(net, coding, SimPlan(50_000, r0=r0, seed=1))
ana = avg_rate_fixed_r0(net.link(r0), net, coding).rate
print(f"\nAnalysis {ana:.4f} vs simulation {est.mean:.4f} "
      f"(99% CI [{est.ci_low:.4f}, {est.ci_high:.4f}])")

# ---------------------------------------------------------------------------
#  Averaging over the nearest-BS distance
# ---------------------------------------------------------------------------

print("\nRate averaged over r0 (interference limited)")
net = NetworkConfig(1e-6)
for n in (128, 2048):
    print(f"  n = {n}: {avg_rate_spatial(net, CodingConfig(n, 1e-5)).rate:.4f} bits/use")
print(f"  Shannon: {avg_rate_spatial(net, CodingConfig(128, 1e-5)).capacity_term:.4f} bits/use")
