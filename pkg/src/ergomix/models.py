"""Model families: affine random walks on the torus and lattice cover models.

Affine torus walks act on T^n = R^n / Z^n by x -> a x + D v, with a drawn
from a finite law on unimodular integer matrices and D a scalar displacement
along a primitive integer direction v.  Cover models are finitely supported
random walks on the deck group Z^d of an abelian cover, where counting
measure plays the role of Haar measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np
import sympy
from sympy.matrices.normalforms import smith_normal_form

MASS_TOL = 1e-12

# fitted degree above this counts as faster than quadratic
GROWTH_THRESHOLD = 2.3


class ModelError(ValueError):
    """Raised when a model violates its structural invariants."""


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions, ``{"num", "den"}`` dicts or strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, dict):
        return Fraction(int(value["num"]), int(value["den"]))
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1 << 40)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def _as_mass(value):
    # masses stay exact when given exactly
    if isinstance(value, (dict, str)):
        return as_fraction(value)
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    return float(value)


def int_matrix(rows) -> np.ndarray:
    a = np.array(rows, dtype=object)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ModelError(f"expected a square integer matrix, got shape {a.shape}")
    out = np.array([[int(x) for x in row] for row in a], dtype=np.int64)
    if not np.array_equal(out, np.array(rows, dtype=object).astype(np.int64)):
        raise ModelError("matrix entries must be integers")
    return out


def exact_det(a) -> int:
    return int(sympy.Matrix(np.asarray(a).tolist()).det())


def exact_rank(vectors) -> int:
    """Rank over Q of a collection of integer vectors (rows)."""
    rows = [list(map(int, v)) for v in vectors]
    if not rows:
        return 0
    return int(sympy.Matrix(rows).rank())


def _check_unimodular(a: np.ndarray) -> None:
    det = exact_det(a)
    if abs(det) != 1:
        raise ModelError(f"matrix {a.tolist()} has determinant {det}, expected +-1")


def _check_direction(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    if v.ndim != 1 or not np.any(v):
        raise ModelError("direction must be a nonzero integer vector")
    return v


# ---------------------------------------------------------------------------
# torus models


@dataclass(frozen=True)
class DisplacementLaw:
    """Law of the scalar displacement along a primitive direction.

    ``atoms`` is a tuple of ``(position, mass)`` with rational positions in
    [0, 1); ``pieces`` is a tuple of ``(start, end, height)`` describing a
    piecewise-constant density with rational breakpoints.
    """

    direction: tuple[int, ...]
    atoms: tuple = ()
    pieces: tuple = ()

    def __post_init__(self):
        v = _check_direction(self.direction)
        if reduce(math.gcd, (abs(int(x)) for x in v)) != 1:
            raise ModelError(f"direction {v.tolist()} is not primitive")
        object.__setattr__(self, "direction", tuple(int(x) for x in v))
        atoms = tuple((as_fraction(p), _as_mass(w)) for p, w in self.atoms)
        pieces = tuple(
            (as_fraction(s), as_fraction(e), _as_mass(h)) for s, e, h in self.pieces
        )
        for p, w in atoms:
            if not 0 <= p < 1:
                raise ModelError(f"atom position {p} outside [0, 1)")
            if w < 0:
                raise ModelError(f"negative atom mass {w}")
        for s, e, h in pieces:
            if not 0 <= s < e <= 1:
                raise ModelError(f"density piece [{s}, {e}) is not inside [0, 1]")
            if h < 0:
                raise ModelError(f"negative density height {h}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "pieces", pieces)
        total = self.total_mass()
        if abs(float(total) - 1.0) > MASS_TOL:
            raise ModelError(f"displacement law has total mass {float(total)!r}")

    @classmethod
    def uniform(cls, direction) -> DisplacementLaw:
        return cls(direction, pieces=((Fraction(0), Fraction(1), Fraction(1)),))

    @classmethod
    def dirac(cls, direction, position=0) -> DisplacementLaw:
        return cls(direction, atoms=((as_fraction(position), Fraction(1)),))

    def total_mass(self):
        return sum((w for _, w in self.atoms), Fraction(0)) + sum(
            ((e - s) * h for s, e, h in self.pieces), Fraction(0)
        )

    def denominators(self) -> set[int]:
        dens = {p.denominator for p, _ in self.atoms}
        for s, e, _ in self.pieces:
            dens.update((s.denominator, e.denominator))
        return dens

    def required_modulus(self) -> int:
        """Smallest resolution m at which cell integration is exact."""
        return reduce(math.lcm, self.denominators(), 1)

    def density_floor(self) -> float:
        """Infimum over [0, 1) of the absolutely continuous part."""
        grid = sorted({Fraction(0), Fraction(1)} | {x for s, e, _ in self.pieces for x in (s, e)})
        floor = math.inf
        for lo, hi in zip(grid, grid[1:]):
            mid = (lo + hi) / 2
            h = sum((h for s, e, h in self.pieces if s <= mid < e), Fraction(0))
            floor = min(floor, float(h))
        return floor

    def cell_masses(self, m: int) -> np.ndarray:
        """Mass of each cell [k/m, (k+1)/m); atoms are attributed to their cell."""
        bad = sorted(d for d in self.denominators() if m % d)
        if bad:
            raise ModelError(
                f"resolution {m} incompatible with the scalar law: "
                f"m must be divisible by {reduce(math.lcm, bad, 1)} (denominators {bad})"
            )
        out = [Fraction(0)] * m
        for p, w in self.atoms:
            out[int(p * m)] += w
        for s, e, h in self.pieces:
            for k in range(int(s * m), int(e * m)):
                out[k] += h / m
        return np.array([float(x) for x in out])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw scalar displacements in [0, 1)."""
        comps = [("atom", float(p), float(w)) for p, w in self.atoms]
        comps += [("piece", (float(s), float(e)), float((e - s) * h)) for s, e, h in self.pieces]
        probs = np.array([c[2] for c in comps])
        idx = rng.choice(len(comps), size=size, p=probs / probs.sum())
        u = rng.random(size)
        out = np.empty(size)
        for i, (kind, where, _) in enumerate(comps):
            sel = idx == i
            if kind == "atom":
                out[sel] = where
            else:
                out[sel] = where[0] + (where[1] - where[0]) * u[sel]
        return out


@dataclass(frozen=True)
class AffineTorusModel:
    """Random affine map x -> a x + D v on the n-torus.

    ``linear_parts`` lists ``(matrix, weight)`` pairs; the displacement is drawn
    independently of the linear part when ``independent`` is true.
    """

    dimension: int
    linear_parts: tuple
    displacement: DisplacementLaw
    independent: bool = True
    name: str = ""

    def __post_init__(self):
        n = int(self.dimension)
        if n < 1:
            raise ModelError("dimension must be positive")
        parts = []
        for mat, w in self.linear_parts:
            a = int_matrix(mat)
            if a.shape != (n, n):
                raise ModelError(f"matrix shape {a.shape} does not match dimension {n}")
            _check_unimodular(a)
            w = _as_mass(w)
            if w < 0:
                raise ModelError(f"negative weight {w}")
            a.setflags(write=False)
            parts.append((a, w))
        if not parts:
            raise ModelError("at least one linear part is required")
        total = sum(float(w) for _, w in parts)
        if abs(total - 1.0) > MASS_TOL:
            raise ModelError(f"linear weights sum to {total!r}")
        if len(self.displacement.direction) != n:
            raise ModelError("direction length does not match dimension")
        object.__setattr__(self, "linear_parts", tuple(parts))

    @property
    def direction(self) -> np.ndarray:
        return np.array(self.displacement.direction, dtype=np.int64)

    @property
    def matrices(self) -> list[np.ndarray]:
        return [a for a, _ in self.linear_parts]

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.linear_parts])

    def is_spread_out(self) -> bool:
        gens = [a for a, w in self.linear_parts if w > 0]
        if len(gens) == 1:
            return check_spread_out_deterministic(gens[0], self.direction, self.dimension)
        return check_spread_out_independent(gens, self.direction)

    def sample(self, rng: np.random.Generator, size: int):
        """Draw ``size`` i.i.d. steps as (linear-part indices, scalar displacements)."""
        idx = rng.choice(len(self.linear_parts), size=size, p=self.weights / self.weights.sum())
        return idx, self.displacement.sample(rng, size)


def worked_example(density_weight=1) -> AffineTorusModel:
    """Two-matrix walk on T^2 with a = (2 1; 1 1), b = (1 1; 1 2), v = e1.

    The scalar law mixes ``density_weight`` of the uniform density with an atom
    at 0 carrying the rest, so its density is bounded below by ``density_weight``.
    """
    w = as_fraction(density_weight)
    if not 0 < w <= 1:
        raise ModelError("density weight must lie in (0, 1]")
    atoms = ((Fraction(0), 1 - w),) if w < 1 else ()
    law = DisplacementLaw((1, 0), atoms=atoms, pieces=((Fraction(0), Fraction(1), w),))
    half = Fraction(1, 2)
    return AffineTorusModel(
        2, (([[2, 1], [1, 1]], half), ([[1, 1], [1, 2]], half)), law,
        name=f"worked-example-delta-{w}",
    )


def check_spread_out_deterministic(a, v, n: int | None = None) -> bool:
    """Whether v, a v, ..., a^{n-1} v span R^n (exact rank)."""
    a = int_matrix(a)
    n = a.shape[0] if n is None else int(n)
    if a.shape != (n, n):
        raise ModelError(f"matrix shape {a.shape} does not match dimension {n}")
    _check_unimodular(a)
    v = _check_direction(v)
    if v.shape != (n,):
        raise ModelError("vector length does not match dimension")
    A = sympy.Matrix(a.tolist())
    w = sympy.Matrix(v.tolist())
    krylov = []
    for _ in range(n):
        krylov.append(list(w))
        w = A * w
    return exact_rank(krylov) == n


def invariant_span(generators, v) -> sympy.Matrix:
    """Smallest subspace containing v and invariant under every generator.

    Returned as a matrix whose columns form a basis.
    """
    gens = [sympy.Matrix(int_matrix(g).tolist()) for g in generators]
    W = sympy.Matrix(_check_direction(v).tolist())
    n = W.shape[0]
    for _ in range(n):
        cols = [W] + [g * W for g in gens]
        basis = sympy.Matrix.hstack(*cols).columnspace()
        new = sympy.Matrix.hstack(*basis)
        if new.shape[1] == W.shape[1]:
            break
        W = new
    return W


def check_spread_out_independent(generators, v) -> bool:
    """Whether v lies in no proper subspace invariant under all generators."""
    generators = list(generators)
    if not generators:
        raise ModelError("need at least one generator")
    v = _check_direction(v)
    for g in generators:
        g = int_matrix(g)
        if g.shape != (len(v), len(v)):
            raise ModelError("generator shape does not match vector length")
        _check_unimodular(g)
    return invariant_span(generators, v).shape[1] == len(v)


def check_aperiodic_torus(model: AffineTorusModel, m: int | None = None, cutoff: int = 64):
    """Period of the discretized chain, with the reason it is (or is not) 1.

    Returns ``(period, reason)``; ``period`` is None when the period search was
    inconclusive within ``cutoff`` steps.
    """
    from ergomix import kernel

    m = model.displacement.required_modulus() if m is None else int(m)
    chain = kernel.discretize(model, m)
    result = kernel.period(chain, 0, cutoff=cutoff)
    if result.period is None:
        return None, f"support of the first {cutoff} steps does not cover the (Z/{m}Z)^{model.dimension} chain"
    if result.period == 1:
        reason = (
            "T^n is connected, so a spread-out walk has no nontrivial clopen cycle; "
            f"the resolution-{m} chain has period 1"
        )
    else:
        reason = (
            f"the resolution-{m} chain cycles through {result.period} classes; "
            "at this resolution the scalar law is lattice-supported"
        )
    return result.period, reason


# ---------------------------------------------------------------------------
# cover models on Z^d


@dataclass(frozen=True)
class CoverModel:
    """Finitely supported step law on the deck group Z^d."""

    degree: int
    step_law: tuple
    name: str = ""

    def __post_init__(self):
        d = int(self.degree)
        if d < 1:
            raise ModelError("degree must be positive")
        merged: dict[tuple, object] = {}
        for point, mass in self.step_law:
            pt = tuple(int(x) for x in np.atleast_1d(point))
            if len(pt) != d:
                raise ModelError(f"step {pt} does not live in Z^{d}")
            mass = _as_mass(mass)
            if mass < 0:
                raise ModelError(f"negative mass at {pt}")
            merged[pt] = merged.get(pt, 0) + mass
        law = tuple(sorted((pt, w) for pt, w in merged.items() if w > 0))
        if not law:
            raise ModelError("step law is empty")
        total = sum(float(w) for _, w in law)
        if abs(total - 1.0) > MASS_TOL:
            raise ModelError(f"step masses sum to {total!r}")
        object.__setattr__(self, "degree", d)
        object.__setattr__(self, "step_law", law)

    @classmethod
    def nearest_neighbor(cls, d: int, laziness=0) -> CoverModel:
        lazy = as_fraction(laziness)
        steps = [((0,) * d, lazy)] if lazy else []
        w = (1 - lazy) / (2 * d)
        for i in range(d):
            for s in (1, -1):
                e = [0] * d
                e[i] = s
                steps.append((tuple(e), w))
        return cls(d, tuple(steps), name=f"nn-Z{d}" + (f"-lazy{lazy}" if lazy else ""))

    @property
    def support(self) -> np.ndarray:
        return np.array([pt for pt, _ in self.step_law], dtype=np.int64).reshape(-1, self.degree)

    @property
    def masses(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.step_law])

    @property
    def reach(self) -> int:
        """Largest sup-norm of a single step."""
        return int(np.abs(self.support).max())

    def is_symmetric(self) -> bool:
        law = dict(self.step_law)
        return all(law.get(tuple(-x for x in pt)) == w for pt, w in law.items())

    def symmetric_neighborhood(self) -> np.ndarray:
        """V = supp u -supp u {0} as an array of lattice points."""
        pts = {tuple(p) for p in self.support} | {tuple(-p) for p in self.support}
        pts.add((0,) * self.degree)
        return np.array(sorted(pts), dtype=np.int64)

    def mean(self) -> np.ndarray:
        return self.masses @ self.support


def _lattice_index(vectors: np.ndarray, d: int) -> tuple[int, int]:
    """(rank, index in Z^d) of the subgroup generated by the given vectors.

    The index is 0 when the rank is deficient.
    """
    vecs = [list(map(int, v)) for v in vectors if np.any(v)]
    if not vecs:
        return 0, 0
    snf = smith_normal_form(sympy.Matrix(vecs), domain=sympy.ZZ)
    diag = [abs(int(snf[i, i])) for i in range(min(snf.shape)) if snf[i, i] != 0]
    rank = len(diag)
    if rank < d:
        return rank, 0
    return rank, math.prod(diag)


def generation_witness(model: CoverModel) -> str | None:
    """None if supp(mu) generates Z^d as a group, else a description of the defect."""
    rank, index = _lattice_index(model.support, model.degree)
    if rank < model.degree:
        return f"support spans a rank-{rank} sublattice of Z^{model.degree}"
    if index != 1:
        return f"support generates a sublattice of index {index} in Z^{model.degree} ({index} cosets)"
    return None


def require_adapted(model: CoverModel) -> None:
    why = generation_witness(model)
    if why is not None:
        raise ModelError(f"step law is not adapted: {why}")


def walk_period(model: CoverModel) -> int:
    """Period of the walk on Z^d for an adapted law.

    Equals the index of the subgroup generated by differences of support points;
    it is 1 exactly when the law is not carried by a coset of a proper subgroup.
    """
    require_adapted(model)
    supp = model.support
    diffs = (supp[:, None, :] - supp[None, :, :]).reshape(-1, model.degree)
    rank, index = _lattice_index(diffs, model.degree)
    if rank < model.degree:
        # all mass on one point of a rank-deficient difference lattice cannot be adapted
        raise ModelError("difference lattice is degenerate")
    return index


@dataclass(frozen=True)
class GrowthReport:
    ball_sizes: tuple[int, ...]
    fitted_degree: float
    classification: str

    def to_dict(self) -> dict:
        return {
            "ball_sizes": list(self.ball_sizes),
            "fitted_degree": self.fitted_degree,
            "classification": self.classification,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GrowthReport:
        return cls(tuple(d["ball_sizes"]), float(d["fitted_degree"]), d["classification"])


def ball_sizes(model: CoverModel, n_max: int) -> list[int]:
    """|V^n . 0| for n = 1..n_max, with V the symmetric neighborhood of the law."""
    V = model.symmetric_neighborhood()
    r = int(np.abs(V).max()) * n_max
    shape = (2 * r + 1,) * model.degree
    ball = np.zeros(shape, dtype=bool)
    ball[(r,) * model.degree] = True
    sizes = []
    for _ in range(n_max):
        new = np.zeros_like(ball)
        for z in V:
            new |= _shift_bool(ball, z)
        ball = new
        sizes.append(int(ball.sum()))
    return sizes


def _shift_bool(arr: np.ndarray, z) -> np.ndarray:
    out = np.zeros_like(arr)
    src, dst = [], []
    for k, n in zip(z, arr.shape):
        k = int(k)
        if k >= 0:
            src.append(slice(0, n - k))
            dst.append(slice(k, n))
        else:
            src.append(slice(-k, n))
            dst.append(slice(0, n + k))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def fit_degree(sizes: Sequence[int]) -> float:
    """Least-squares slope of log|ball| against log n over the top half of n."""
    n = np.arange(1, len(sizes) + 1)
    lo = len(sizes) // 2
    x, y = np.log(n[lo:]), np.log(np.asarray(sizes[lo:], dtype=float))
    if len(x) < 2:
        return math.nan
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def measure_growth(model: CoverModel, n_max: int = 50) -> GrowthReport:
    require_adapted(model)
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    sizes = ball_sizes(model, n_max)
    deg = fit_degree(sizes)
    if not math.isfinite(deg):
        cls = "inconclusive"
    elif deg <= GROWTH_THRESHOLD:
        cls = "at_most_quadratic"
    else:
        cls = "superquadratic"
    return GrowthReport(tuple(sizes), deg, cls)
