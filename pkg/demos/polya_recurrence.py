"""
Recurrence and transience of lattice walks
==========================================

Green partial sums G_N = sum_{k<=N} P^k(0, 0) are computed exactly on the dual
of a large torus.  The dyadic increment ratio
(G_N - G_{N/2}) / (G_{N/2} - G_{N/4}) tends to sqrt(2), 1 and 1/sqrt(2) for
the simple walk on Z, Z^2 and Z^3.
"""

from ergomix.models import CoverModel, measure_growth
from ergomix.montecarlo import classify_recurrence

for d, N in ((1, 10_000), (2, 10_000), (3, 2000)):
    walk = CoverModel.nearest_neighbor(d)
    growth = measure_growth(walk, 20)
    rep = classify_recurrence(walk, N=N, trials=1000 if d == 3 else 0, seed=1, mc_horizon=1000)
    line = f"Z^{d}: growth degree {growth.fitted_degree:.2f}, ratio {rep.increment_ratio:.4f} -> {rep.classification}"
    if d == 3:
        line += (f"; return probability {rep.return_probability:.4f}"
                 f" (Monte Carlo {rep.mc_return:.3f}, 95% CI {rep.mc_interval[0]:.3f}-{rep.mc_interval[1]:.3f})")
    print(line)
