"""
Ergodic averages on a torus chain
=================================

The worked torus walk at resolution m = 8 with f the indicator of the lower
left quadrant.  The asymptotic variance comes from the exact autocovariance
series; simulated sums are compared with it.
"""

import numpy as np

from ergomix import kernel
from ergomix.models import worked_example
from ergomix.montecarlo import clt_check, lil_smoke, slln_check

chain = kernel.discretize(worked_example(1), 8)
f = np.zeros((8, 8))
f[:4, :4] = 1
f = f.reshape(-1)

var = kernel.asymptotic_variance(chain, f)
print(f"gamma^2 = {var.gamma2:.6f} (series truncated after {var.truncation} lags)")

# %%
slln = slln_check(chain, f, 100_000, seed=3)
print(f"SLLN: mean {slln.empirical_mean:.5f} vs 1/4, deviation {slln.deviation:.5f} (3 sigma {slln.threshold:.5f})")

clt = clt_check(chain, f, 10_000, 2000, seed=3)
print(f"CLT: KS distance {clt.ks:.4f} over {clt.trials} trials")

lil = lil_smoke(chain, f, 1_000_000, seed=3)
print(f"LIL: running max {lil.final:.4f}, gamma {lil.gamma:.4f}, ratio {lil.final / lil.gamma:.3f}")
for n, v in list(zip(lil.checkpoints, lil.running_max))[10::3]:
    print(f"  n = {n:8d}: {v:.4f}")
