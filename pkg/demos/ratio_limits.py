"""
How fast do ratio limits converge?
==================================

For the simple walk on Z, the Cesaro ratio
sum_{k<=n} P^k(0, 0) / sum_{k<=n} [P^k(5, 0) + P^k(5, 1)]
tends to 1/2, but the numerator and denominator differ by a potential-kernel
offset of order |x1 - x2| while both grow like sqrt(n).  The error therefore
decays like n^{-1/2}.
"""

from fractions import Fraction

import numpy as np

from ergomix.models import CoverModel
from ergomix.montecarlo import conjecture_probe, ratio_limit_check

walk = CoverModel.nearest_neighbor(1)
rep = ratio_limit_check(walk, [(0,)], [(0,), (1,)], ((0,), (5,)), 20_000)
for n in (500, 1000, 5000, 10_000, 20_000):
    dev = abs(rep.ratios[n] - 0.5)
    print(f"n = {n:6d}: ratio {rep.ratios[n]:.5f}, deviation {dev:.4f}, sqrt(n) * deviation {np.sqrt(n) * dev:.2f}")

# %%
# Bounded-density starts on the lazy walk converge much faster.
lazy = CoverModel.nearest_neighbor(1, Fraction(1, 2))
starts = ([[(0,), 0.5], [(1,), 0.5]], [[(3,), 0.25], [(4,), 0.75]])
strong = ratio_limit_check(lazy, [(0,)], [(0,), (1,)], starts, 2000, mode="strong")
print(f"strong ratio at n = 2000: {strong.ratios[-1]:.5f} (deviation {strong.deviation:.5f})")

# %%
# Dirac starts in the strong form are left as an exploratory sequence only.
probe = conjecture_probe(lazy, 3, [(0,), (1,)], 400)
print("probe tail:", np.round(probe.ratios[-5:], 4))
