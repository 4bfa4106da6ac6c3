"""
Drift, minorization and the Rosenthal bound
===========================================

A birth-death chain on {0, ..., 20} steps down with probability 2/3 and up
with probability 1/3.  V(x) = (3/2)^x satisfies PV <= alpha V + beta with
alpha = 0.95, the sublevel set {V <= d} is small, and the two certificates
combine into an explicit convergence bound.
"""

from fractions import Fraction

import numpy as np

from ergomix import bounds, kernel

chain = kernel.birth_death_chain(21, Fraction(2, 3), Fraction(1, 3))
V = 1.5 ** np.arange(21)

# %%
# Interior states contract V by exactly 17/18; the reflecting ends need beta.
lyap = bounds.verify_lyapunov(chain, V, 0.95)
ratio = kernel.function_power(chain, V, 1) / V
print(f"interior PV/V = {ratio[5]:.4f}, beta = {lyap.beta:.4f}")

# With V = 2^x the interior ratio is exactly 1, so no alpha < 1 works there.
try:
    bounds.verify_lyapunov(chain, 2.0 ** np.arange(21), 0.9, center=[0, 20])
except bounds.DriftError as exc:
    print("2^x:", exc)

# %%
d = 24.0
A = bounds.sublevel_set(V, d)
cert = kernel.find_doeblin(chain, A, 40)
abar, R = bounds.rosenthal_constants(lyap.alpha, lyap.beta, d)
print(f"A = {A}, n0 = {cert.n0}, eps = {cert.epsilon:.4f}, alpha_bar = {abar:.4f}, R = {R:.2f}")

# %%
# The bound majorizes TV everywhere but stays at or above 2 until the
# minorization term 2(1 - eps)^floor(j / n0) can be made small, which needs j
# of several hundred.  From the top state it first drops below 2 at n = 1173.
curve = bounds.rosenthal_curve(chain, cert, lyap, d, 300)
print("violations up to n = 300:", len(curve.violations()))
print(f"exact TV at n = 300: {curve.rows[-1][2]:.2e}, bound {curve.rows[-1][1]:.3f}")

for n in (600, 1172, 1173, 1944, 4860):
    b, j = bounds.best_rosenthal_bound(cert, lyap, d, float(V[20]), n)
    print(f"  n = {n:4d}: best bound {b:.4f} at j = {j}")
