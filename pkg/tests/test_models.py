from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergomix.models import (
    AffineTorusModel,
    CoverModel,
    DisplacementLaw,
    GrowthReport,
    ModelError,
    ball_sizes,
    check_aperiodic_torus,
    check_spread_out_deterministic,
    check_spread_out_independent,
    generation_witness,
    measure_growth,
    require_adapted,
    walk_period,
    worked_example,
)
from conftest import random_unimodular

A = [[2, 1], [1, 1]]
B = [[1, 1], [1, 2]]


# spread-out criteria

@pytest.mark.parametrize(
    "a, v, expected",
    [(A, (1, 0), True), (np.eye(2, dtype=int), (1, 0), False), ([[0, -1], [1, 0]], (1, 0), True)],
)
def test_deterministic_examples(a, v, expected):
    assert check_spread_out_deterministic(a, v, 2) is expected


def test_deterministic_rejects_bad_input():
    with pytest.raises(ModelError):
        check_spread_out_deterministic(A, (0, 0))
    with pytest.raises(ModelError):
        check_spread_out_deterministic([[2, 0], [0, 1]], (1, 0))


def test_independent_examples():
    assert check_spread_out_independent([A, B], (1, 0))
    assert not check_spread_out_independent([np.eye(2, dtype=int)], (1, 0))
    # block-diagonal generators preserve the first coordinate line of R^3
    g1 = [[1, 0, 0], [0, 2, 1], [0, 1, 1]]
    g2 = [[-1, 0, 0], [0, 1, 1], [0, 0, 1]]
    assert not check_spread_out_independent([g1, g2], (1, 0, 0))
    assert check_spread_out_independent([g1, g2], (1, 1, 0))


def _float_krylov_rank(a, v):
    n = len(v)
    vecs, w = [], np.array(v, dtype=float)
    for _ in range(n):
        vecs.append(w)
        w = np.array(a, dtype=float) @ w
    return np.linalg.matrix_rank(np.array(vecs))


@given(st.integers(0, 10_000), st.sampled_from([2, 3]), st.integers(-3, 3).filter(lambda c: c != 0))
def test_scale_invariance_and_float_oracle(seed, n, c):
    rng = np.random.default_rng(seed)
    a = random_unimodular(rng, n)
    v = rng.integers(-3, 4, size=n)
    if not v.any():
        v[0] = 1
    g = np.gcd.reduce(np.abs(v))
    v = v // g
    res = check_spread_out_deterministic(a, v, n)
    assert res == check_spread_out_deterministic(a, c * v, n)
    assert res == (_float_krylov_rank(a, v) == n)


def test_single_generator_agrees_on_random_matrices(rng):
    for n in (2, 3):
        for _ in range(100):
            a = random_unimodular(rng, n)
            v = rng.integers(-2, 3, size=n)
            if not v.any():
                v[-1] = 1
            assert check_spread_out_deterministic(a, v, n) == check_spread_out_independent([a], v)


# model invariants

def test_affine_model_validation():
    law = DisplacementLaw.uniform((1, 0))
    with pytest.raises(ModelError):
        AffineTorusModel(2, (([[2, 0], [0, 1]], 1),), law)
    with pytest.raises(ModelError):
        AffineTorusModel(2, ((A, Fraction(1, 2)),), law)
    with pytest.raises(ModelError):
        DisplacementLaw((2, 0), pieces=((0, 1, 1),))
    with pytest.raises(ModelError):
        DisplacementLaw((1, 0), atoms=((0, Fraction(1, 2)),))
    m = worked_example()
    assert abs(m.weights.sum() - 1) < 1e-12
    assert m.is_spread_out()


def test_cell_masses_and_divisibility():
    law = worked_example(Fraction(1, 2)).displacement
    cells = law.cell_masses(8)
    assert cells[0] == pytest.approx(0.5 + 0.5 / 8)
    assert np.allclose(cells[1:], 0.5 / 8)
    third = DisplacementLaw((1,), atoms=((Fraction(1, 3), 1),))
    with pytest.raises(ModelError, match="divisible by 3"):
        third.cell_masses(8)
    assert third.required_modulus() == 3


@given(st.lists(st.tuples(st.integers(0, 11), st.integers(1, 5)), min_size=1, max_size=5))
def test_law_mass_invariant(atoms):
    total = sum(w for _, w in atoms)
    law = DisplacementLaw((1,), atoms=tuple((Fraction(p, 12), Fraction(w, total)) for p, w in atoms))
    assert law.total_mass() == 1
    assert abs(law.cell_masses(12).sum() - 1) < 1e-12


def test_cover_model_merges_and_validates():
    m = CoverModel(1, (((1,), 0.25), ((1,), 0.25), ((-1,), 0.5)))
    assert m.step_law == (((-1,), 0.5), ((1,), 0.5))
    assert m.is_symmetric()
    with pytest.raises(ModelError):
        CoverModel(1, (((1,), 0.6),))
    with pytest.raises(ModelError):
        CoverModel(2, (((1,), 1.0),))


def test_sampling_matches_law(rng):
    law = worked_example(Fraction(1, 2)).displacement
    x = law.sample(rng, 20_000)
    assert np.all((0 <= x) & (x < 1))
    assert abs(np.mean(x == 0) - 0.5) < 0.02


# adaptedness, period, growth

def test_generation_witness():
    assert generation_witness(CoverModel.nearest_neighbor(2)) is None
    bad = CoverModel(2, (((1, 0), 0.5), ((-1, 0), 0.5)))
    assert "rank-1" in generation_witness(bad)
    even = CoverModel(1, (((2,), 0.5), ((-2,), 0.5)))
    assert "index 2" in generation_witness(even)
    with pytest.raises(ModelError):
        require_adapted(even)


def test_walk_period():
    assert walk_period(CoverModel.nearest_neighbor(1)) == 2
    assert walk_period(CoverModel.nearest_neighbor(1, Fraction(1, 2))) == 1
    assert walk_period(CoverModel.nearest_neighbor(2)) == 2


def test_growth_examples():
    r1 = measure_growth(CoverModel.nearest_neighbor(1), 50)
    assert list(r1.ball_sizes) == [2 * n + 1 for n in range(1, 51)]
    assert r1.classification == "at_most_quadratic" and abs(r1.fitted_degree - 1) < 0.05
    r2 = measure_growth(CoverModel.nearest_neighbor(2), 50)
    assert list(r2.ball_sizes) == [2 * n * n + 2 * n + 1 for n in range(1, 51)]
    assert r2.classification == "at_most_quadratic" and abs(r2.fitted_degree - 2) < 0.1
    r3 = measure_growth(CoverModel.nearest_neighbor(3), 30)
    octa = [(2 * n + 1) * (2 * n * n + 2 * n + 3) // 3 for n in range(1, 31)]
    assert list(r3.ball_sizes) == octa
    assert r3.classification == "superquadratic"


def test_growth_rejects_non_generating():
    with pytest.raises(ModelError, match="rank-1"):
        measure_growth(CoverModel(2, (((1, 0), 0.5), ((-1, 0), 0.5))), 5)


@pytest.mark.parametrize(
    "model",
    [
        CoverModel.nearest_neighbor(1),
        CoverModel.nearest_neighbor(2),
        CoverModel(2, (((1, 1), 0.25), ((-1, -1), 0.25), ((1, 0), 0.25), ((-1, 0), 0.25))),
        CoverModel(1, (((2,), 0.5), ((-3,), 0.5))),
    ],
)
def test_ball_monotone_and_submultiplicative(model):
    s = [1] + ball_sizes(model, 12)
    assert all(x <= y for x, y in zip(s, s[1:]))
    for n in range(1, 7):
        for m in range(1, 7):
            assert s[n + m] <= s[n] * s[m]


def test_growth_report_roundtrip():
    r = measure_growth(CoverModel.nearest_neighbor(1), 10)
    assert GrowthReport.from_dict(r.to_dict()) == r


# aperiodicity on the torus

def test_aperiodic_examples():
    per, why = check_aperiodic_torus(worked_example(), 8)
    assert per == 1 and "connected" in why
    half = AffineTorusModel(1, (([[1]], 1),), DisplacementLaw.dirac((1,), Fraction(1, 2)))
    assert check_aperiodic_torus(half, 2)[0] == 2
    unif = AffineTorusModel(1, (([[1]], 1),), DisplacementLaw.uniform((1,)))
    assert check_aperiodic_torus(unif, 8)[0] == 1
