"""
Mixing of a two-matrix walk on the 2-torus
==========================================

The walk applies a = [[2,1],[1,1]] or b = [[1,1],[1,2]] with equal weight and
then shifts along e1 by a random amount.  On the lattice (Z/m)^2 the
discretized chain is exact, so total variation to Haar measure can be computed
state by state and compared with the Doeblin bound 2(1 - eps)^floor(n / n0).
"""

from fractions import Fraction

import numpy as np

from ergomix import bounds, kernel
from ergomix.models import worked_example

# %%
# With a uniform shift the chain forgets its start after two steps.
chain = kernel.discretize(worked_example(1), 8)
cert = kernel.doeblin_coefficient(chain, None, 2)
print(f"delta = 1:   n0 = {cert.n0}, eps = {cert.epsilon:.4f}")

curve = bounds.doeblin_curve(chain, cert, 6)
for n, bound, tv in curve.rows:
    print(f"  n = {n}: bound {bound:.4f}, worst exact TV {tv:.2e}")

# %%
# Half the shift mass on an atom at 0 weakens the minorization to eps = 1/4.
chain = kernel.discretize(worked_example(Fraction(1, 2)), 8)
cert = kernel.doeblin_coefficient(chain, None, 2)
print(f"delta = 1/2: n0 = {cert.n0}, eps = {cert.epsilon:.4f}")

curve = bounds.doeblin_curve(chain, cert, 40)
for n, bound, tv in curve.rows[::8]:
    print(f"  n = {n:2d}: bound {bound:.3e}, worst exact TV {tv:.3e}")

# %%
# The empirical decay is much faster than the bound.
tv = np.array([r[2] for r in curve.rows])
ok = tv > 1e-14
rate = np.exp(np.polyfit(np.flatnonzero(ok), np.log(tv[ok]), 1)[0])
print(f"empirical per-step contraction ~ {rate:.3f}; bound contraction {np.sqrt(0.75):.3f}")
print("violations:", curve.violations())
