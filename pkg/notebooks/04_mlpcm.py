"""Multilevel polar-coded modulation.

Run with ``python notebooks/04_mlpcm.py``.  One polar code per bit level of
a Gray-labelled QAM constellation, multistage successive-cancellation
decoding, and the largest rate that meets a frame-error target.
"""

import numpy as np

from fbrnet.mlpcm import level_capacities, make_scheme, measure_fer, rate_sweep
from fbrnet.qam import cond_mi, make_qam
from fbrnet.rates import CodingConfig
from fbrnet.simulator import conditional_rates

# ---------------------------------------------------------------------------
#  Level capacities add up to the constellation mutual information
# ---------------------------------------------------------------------------

c = make_qam(16)
caps = level_capacities(c, 10.0)
print("16-QAM level capacities at 10 dB:", np.round(caps, 4), "sum", round(caps.sum(), 4),
      "MI", round(cond_mi(c, 10 ** (10.0 / 10)), 4))

# ---------------------------------------------------------------------------
#  Frame error rate of one scheme
# ---------------------------------------------------------------------------

scheme = make_scheme(4, 128, 48, 4.0)
print(f"\nQPSK, n = 128, k = 48 per level (rate {scheme.rate:.3f} bits/symbol)")
for snr in (0.0, 2.0, 4.0, 6.0):
    e, f = measure_fer(scheme, snr, 2000, np.random.default_rng(int(snr)))
    print(f"  {snr:4.1f} dB: FER {e / f:.4f}")

# ---------------------------------------------------------------------------
#  Achieved rate vs the normal approximation
# ---------------------------------------------------------------------------

grid = np.arange(-4.0, 13.0, 4.0)
pts = rate_sweep(4, grid, 1e-2, 1000, seed=4)
theory = conditional_rates(10 ** (grid / 10), CodingConfig(128, 1e-2), make_qam(4))
print("\nQPSK rate at FER 1e-2: SNR, MLPCM, normal approximation")
for p, t in zip(pts, theory):
    print(f"  {p.snr_db:5.1f} dB  {p.rate:.3f}  {t:.3f}")
