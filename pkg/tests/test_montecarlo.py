import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ergomix import kernel as K
from ergomix import montecarlo as MC
from ergomix.models import AffineTorusModel, CoverModel, DisplacementLaw, worked_example


def lazy_cycle(m=5):
    return K.cyclic_chain(m, {0: 0.5, 1: 0.25, m - 1: 0.25})


# determinism


@pytest.mark.parametrize("workers", ["2", "4"])
def test_results_independent_of_worker_count(monkeypatch, workers):
    ch = lazy_cycle()
    f = np.arange(5.0)
    monkeypatch.setenv("ERGOMIX_WORKERS", "1")
    a = MC.chain_sums(ch, f, 40, 1000, seed=7)
    monkeypatch.setenv("ERGOMIX_WORKERS", workers)
    b = MC.chain_sums(ch, f, 40, 1000, seed=7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, MC.chain_sums(ch, f, 40, 1000, seed=8))


def test_blocks_use_spawned_streams():
    got = MC.run_blocks(3, 600, lambda rng, size: rng.random(size))
    expect = np.concatenate(
        [np.random.default_rng(np.random.SeedSequence(3, spawn_key=(b,))).random(s)
         for b, s in enumerate((256, 256, 88))]
    )
    assert np.array_equal(got, expect)


# trajectories


def test_trajectory_examples():
    sw = CoverModel.nearest_neighbor(1)
    t0 = MC.simulate(sw, (3,), 0, seed=1)
    assert t0.states.tolist() == [[3]]
    t = MC.simulate(sw, (0,), 101, seed=1)
    assert t.states.shape == (102, 1)
    assert np.all((t.states[:, 0] - np.arange(102)) % 2 == 0)
    assert np.all(np.abs(np.diff(t.states[:, 0])) == 1)
    thin = MC.simulate(sw, (0,), 101, seed=1, thin=10)
    assert np.array_equal(thin.states, t.states[::10])
    ident = AffineTorusModel(2, (([[1, 0], [0, 1]], 1),), DisplacementLaw.dirac((1, 0), 0))
    ti = MC.simulate(ident, (0.25, 0.5), 20, seed=0)
    assert np.allclose(ti.states, [0.25, 0.5])
    with pytest.raises(MC.SimulationError):
        MC.simulate(sw, (0,), -1, seed=0)


def test_trajectory_roundtrip_and_seed():
    t = MC.simulate(worked_example(Fraction(1, 2)), (0.1, 0.2), 50, seed=5)
    assert MC.Trajectory.from_dict(t.to_dict()) == t
    assert MC.simulate(worked_example(Fraction(1, 2)), (0.1, 0.2), 50, seed=5) == t
    assert MC.simulate(worked_example(Fraction(1, 2)), (0.1, 0.2), 50, seed=6) != t
    assert np.all((t.states >= 0) & (t.states < 1))


def _cell_histogram(model, m, n, starts, seed):
    space = K.Torus(m, model.dimension)
    counts = np.zeros(space.size)
    for i, s in enumerate(starts):
        x = MC.simulate(model, s, n, seed=seed + i).states[-1]
        counts[space.index(tuple(np.floor(m * x).astype(int) % m))] += 1
    return counts / counts.sum()


def test_torus_simulation_matches_discrete_kernel():
    m = 4
    # one step from a lattice point is exact under discretization
    model = worked_example(Fraction(1, 2))
    ch = K.discretize(model, m)
    start = (0.25, 0.5)
    emp = _cell_histogram(model, m, 1, [start] * 3000, seed=0)
    exact = K.evolve(ch, K.dirac(ch.space, (1, 2)), 1).flat
    assert 0.5 * np.abs(emp - exact).sum() < 0.05
    # two steps of the uniform case reach Haar measure from any start
    model1 = worked_example(1)
    rng = np.random.default_rng(0)
    emp2 = _cell_histogram(model1, m, 2, rng.random((3000, 2)), seed=100)
    assert 0.5 * np.abs(emp2 - 1 / m**2).sum() < 0.05


# SLLN / CLT / LIL


def test_slln_constant_function_is_exact():
    r = MC.slln_check(lazy_cycle(), np.full(5, 3.0), 1000, seed=0)
    assert r.deviation == 0 and r.passed and r.exact_mean == 3.0


def test_slln_chain_and_torus():
    r = MC.slln_check(lazy_cycle(), [1, 0, 0, 0, 0], 50_000, seed=1)
    assert r.exact_mean == pytest.approx(0.2) and r.passed
    assert r.trace[-1] == [50_000, pytest.approx(r.empirical_mean)]
    box = MC.TorusBox((0, 0), (Fraction(1, 2), Fraction(1, 2)))
    rt = MC.slln_check(worked_example(1), box, 20_000, seed=2, start=(0.3, 0.7))
    assert rt.exact_mean == 0.25 and rt.deviation < 0.02
    with pytest.raises(MC.SimulationError):
        MC.slln_check(worked_example(1), lambda x: x, 10, seed=0)


def test_clt_iid_case():
    p = np.array([0.2, 0.3, 0.5])
    ch = K.MatrixChain(np.tile(p, (3, 1)))
    f = np.array([0.0, 1.0, 4.0])
    r = MC.clt_check(ch, f, 40, 2000, seed=3)
    var = p @ f**2 - (p @ f) ** 2
    assert r.gamma2 == pytest.approx(var)
    assert r.passed and r.ks < MC.KS_THRESHOLD
    assert MC.CltReport.from_dict(r.to_dict()) == r
    assert MC.clt_check(ch, f, 40, 2000, seed=3) == r


def test_clt_degenerate_case():
    ch = K.MatrixChain([[0.5, 0.5, 0], [0, 0, 1], [1, 0, 0]])
    r = MC.clt_check(ch, [0.0, 1.0, -1.0], 10_000, 300, seed=0)
    assert r.degenerate and r.gamma2 < 1e-12 and r.passed
    assert np.max(np.abs(r.standardized)) < 5 / math.sqrt(10_000)


def test_clt_rejects_periodic_chain():
    with pytest.raises(MC.SimulationError, match="period 4"):
        MC.clt_check(K.cyclic_chain(4, {1: 1.0}), [1, 0, 0, 0], 10, 10, seed=0)


def test_lil_smoke():
    ch = lazy_cycle()
    f = np.array([1.0, 0, 0, 0, 0])
    tr = MC.lil_smoke(ch, f, 40_000, seed=4)
    assert tr.checkpoints[0] == 1 and tr.checkpoints[-1] == 40_000
    assert all(b >= a for a, b in zip(tr.running_max, tr.running_max[1:]))
    assert all(v == 0 for c, v in zip(tr.checkpoints, tr.running_max) if c < 1024)
    assert tr.gamma == pytest.approx(math.sqrt(K.asymptotic_variance(ch, f).gamma2))
    assert tr.passed
    assert MC.LilTrace.from_dict(tr.to_dict()) == tr


# recurrence


def test_green_sums_one_dimension_closed_form():
    sw = CoverModel.nearest_neighbor(1)
    Ks = [0, 1, 2, 10, 101, 400]
    oracle = np.cumsum([math.comb(2 * k, k) / 4**k for k in range(201)])
    got = MC.green_sums(sw, [(0,)], Ks)
    expect = [oracle[K_ // 2] for K_ in Ks]
    assert np.allclose(got, expect, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("model,B", [
    (CoverModel.nearest_neighbor(2), [(0, 0)]),
    (CoverModel.nearest_neighbor(2, Fraction(1, 3)), [(0, 0), (1, 0), (2, -1)]),
    (CoverModel(2, (((1, 0), 0.5), ((0, 1), 0.25), ((-1, -1), 0.25))), [(0, 0)]),
    (CoverModel.nearest_neighbor(3), [(0, 0, 0), (0, 0, 1)]),
])
def test_green_sums_fourier_matches_window(model, B):
    N = 24
    window = MC.green_sums_window(model, B, N)
    fourier = MC.green_sums(model, B, list(range(N + 1)))
    assert np.allclose(fourier, window, atol=1e-11)


@given(st.integers(0, 10_000))
@settings(max_examples=15)
def test_green_sums_monotone(seed):
    rng = np.random.default_rng(seed)
    steps = [((int(a), int(b)), float(w)) for (a, b), w in
             zip(rng.integers(-2, 3, (4, 2)), rng.dirichlet(np.ones(4)))]
    model = CoverModel(2, tuple(steps))
    G = MC.green_sums(model, [(0, 0)], list(range(15)))
    assert G[0] == pytest.approx(1.0)
    assert np.all(np.diff(G) >= -1e-12)


def test_fourier_period_budget():
    sw = CoverModel.nearest_neighbor(2)
    M, bound = MC.fourier_period(sw, 2000)
    assert bound <= MC.ALIAS_BUDGET and M < 2001
    drift = CoverModel(1, (((1,), 0.75), ((-1,), 0.25)))
    assert MC.fourier_period(drift, 50, 2) == (53, 0.0)


def test_wilson_interval_closed_form():
    for k, n in ((0, 10), (7, 20), (993, 1000)):
        z = stats.norm.ppf(0.975)
        p = k / n
        c = (p + z * z / (2 * n)) / (1 + z * z / n)
        h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        lo, hi = MC.wilson_interval(k, n)
        assert lo == pytest.approx(max(c - h, 0), abs=1e-12) and hi == pytest.approx(min(c + h, 1), abs=1e-12)


def test_classify_ratio_thresholds():
    assert MC.classify_ratio(math.sqrt(2)) == "recurrent"
    assert MC.classify_ratio(1.0) == "recurrent"
    assert MC.classify_ratio(1 / math.sqrt(2)) == "transient"
    assert MC.classify_ratio(0.85) == "inconclusive"


def test_classify_recurrence_low_dimensions():
    r1 = MC.classify_recurrence(CoverModel.nearest_neighbor(1), N=4000, trials=0)
    assert r1.classification == "recurrent" and r1.increment_ratio == pytest.approx(math.sqrt(2), rel=0.01)
    r2 = MC.classify_recurrence(CoverModel.nearest_neighbor(2), N=4000, trials=200, seed=1, mc_horizon=200)
    assert r2.classification == "recurrent" and abs(r2.increment_ratio - 1) < 0.05
    assert r2.hypotheses["symmetric"] and r2.checkpoints[-1] == 4000
    assert MC.RecurrenceReport.from_dict(r2.to_dict()) == r2


def test_classify_recurrence_three_dimensions():
    r = MC.classify_recurrence(CoverModel.nearest_neighbor(3), N=400, trials=512, seed=2, mc_horizon=400)
    assert r.classification == "transient"
    assert r.increment_ratio < MC.TRANSIENT_RATIO
    lo, hi = r.mc_interval
    assert lo <= r.mc_return <= hi < 0.99
    # exact finite-horizon return probability lies within the Monte Carlo interval
    assert 0.25 < r.return_probability < 0.36


# ratio limits


def test_ratio_cesaro_swap_gives_reciprocal():
    sw = CoverModel.nearest_neighbor(1)
    a = MC.ratio_limit_check(sw, [(0,)], [(0,), (1,)], ((0,), (5,)), 300)
    b = MC.ratio_limit_check(sw, [(0,), (1,)], [(0,)], ((5,), (0,)), 300)
    ok = np.isfinite(a.ratios) & np.isfinite(b.ratios)
    assert np.allclose(a.ratios[ok] * b.ratios[ok], 1)
    assert a.target == 0.5 and b.target == 2.0
    assert MC.RatioReport.from_dict(a.to_dict()) == a


def test_ratio_nan_while_denominator_vanishes():
    sw = CoverModel.nearest_neighbor(1)
    r = MC.ratio_limit_check(sw, [(0,)], [(0,)], ((0,), (5,)), 10)
    assert np.all(np.isnan(r.ratios[:5])) and np.isfinite(r.ratios[5])


def test_ratio_strong_mode_converges():
    lazy = CoverModel.nearest_neighbor(1, Fraction(1, 2))
    starts = ([[(0,), 0.5], [(1,), 0.5]], [[(3,), 0.25], [(4,), 0.75]])
    r = MC.ratio_limit_check(lazy, [(0,)], [(0,), (1,)], starts, 2000, mode="strong")
    assert r.deviation < 0.01


def test_ratio_strong_mode_preconditions():
    lazy = CoverModel.nearest_neighbor(1, Fraction(1, 2))
    dens = [[(0,), 0.5], [(1,), 0.5]]
    with pytest.raises(MC.SimulationError, match="open conjecture"):
        MC.ratio_limit_check(lazy, [(0,)], [(0,)], ((0,), dens), 10, mode="strong")
    with pytest.raises(MC.SimulationError, match="period 2"):
        MC.ratio_limit_check(CoverModel.nearest_neighbor(1), [(0,)], [(0,)], (dens, dens), 10, mode="strong")
    drift = CoverModel(1, (((1,), 0.5), ((-1,), 0.25), ((0,), 0.25)))
    with pytest.raises(MC.SimulationError, match="symmetric"):
        MC.ratio_limit_check(drift, [(0,)], [(0,)], (dens, dens), 10, mode="strong")
    with pytest.raises(MC.SimulationError, match="f2"):
        MC.ratio_limit_check(lazy, [(0,)], {(0,): 0.0}, ((0,), (0,)), 10)
    with pytest.raises(MC.SimulationError, match="unknown mode"):
        MC.ratio_limit_check(lazy, [(0,)], [(0,)], ((0,), (0,)), 10, mode="weak")


def test_conjecture_probe():
    lazy = CoverModel.nearest_neighbor(1, Fraction(1, 2))
    p = MC.conjecture_probe(lazy, 0, [(0,), (1,)], 400)
    assert p.ratios[0] == 1.0
    assert abs(p.ratios[-1] - 1) < 0.01
    assert MC.ProbeReport.from_dict(p.to_dict()) == p
    far = MC.conjecture_probe(lazy, 10, [(0,)], 5)
    assert np.all(far.ratios == 0)
    with pytest.raises(MC.SimulationError, match="period"):
        MC.conjecture_probe(CoverModel.nearest_neighbor(1), 0, [(0,)], 5)
