"""Trajectory simulation and empirical limit-theorem checks.

Randomness is organised in fixed-size blocks of trials.  Block ``b`` draws from
``np.random.SeedSequence(seed, spawn_key=(b,))`` and results are concatenated
in block order, so reports depend only on the seed and never on how many
worker threads (``ERGOMIX_WORKERS``) processed the blocks.

Everything that can be computed exactly (Green sums, ratio sequences, the
conjecture probe) is computed from exact convolutions or Fourier sums; Monte
Carlo only corroborates.
"""

from __future__ import annotations

import bisect
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from ergomix import kernel
from ergomix.kernel import LatticeChain, MatrixChain, TorusChain
from ergomix.models import AffineTorusModel, CoverModel, as_fraction, require_adapted, walk_period

BLOCK_TRIALS = 256
KS_THRESHOLD = 0.05
RECURRENT_RATIO = 0.9
TRANSIENT_RATIO = 0.8
ALIAS_BUDGET = 1e-12


class SimulationError(ValueError):
    """Raised when an experiment's preconditions fail."""


def workers() -> int:
    """Worker count from ``ERGOMIX_WORKERS`` (default 1); never affects results."""
    try:
        return max(1, int(os.environ.get("ERGOMIX_WORKERS", "1")))
    except ValueError:
        return 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))


def run_blocks(seed: int, trials: int, fn: Callable[[np.random.Generator, int], np.ndarray]) -> np.ndarray:
    """Evaluate ``fn(rng, size)`` over trial blocks and concatenate in block order."""
    sizes = [min(BLOCK_TRIALS, trials - s) for s in range(0, trials, BLOCK_TRIALS)]
    jobs = [(block_rng(seed, b), size) for b, size in enumerate(sizes)]
    if workers() > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers()) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    return np.concatenate(parts) if parts else np.empty(0)


def _clean(x):
    """JSON-friendly float list with NaN mapped to None."""
    return [None if (v is None or not math.isfinite(v)) else float(v) for v in np.asarray(x, dtype=float)]


def _unclean(x):
    return np.array([np.nan if v is None else v for v in x], dtype=float)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled path Phi_0, Phi_thin, Phi_2thin, ... of a random walk."""

    model_id: str
    start: tuple
    seed: int
    length: int
    states: np.ndarray
    thin: int = 1

    def __post_init__(self):
        self.states.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            (self.model_id, self.start, self.seed, self.length, self.thin)
            == (other.model_id, other.start, other.seed, other.length, other.thin)
            and self.states.dtype == other.states.dtype
            and np.array_equal(self.states, other.states)
        )

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "start": list(self.start),
            "seed": self.seed,
            "length": self.length,
            "thin": self.thin,
            "dtype": str(self.states.dtype),
            "states": self.states.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> Trajectory:
        states = np.array(d["states"], dtype=d["dtype"])
        return cls(d["model_id"], tuple(d["start"]), d["seed"], d["length"], states, d["thin"])


def simulate(model, start, n: int, seed: int, thin: int = 1) -> Trajectory:
    """Simulate n steps of Phi_k = Y_k ... Y_1 x_0.

    Torus models carry double-precision coordinates in [0, 1)^n, wrapped after
    every affine step; cover models carry exact integer coordinates.
    """
    if n < 0 or thin < 1:
        raise SimulationError("need n >= 0 and thin >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    if isinstance(model, AffineTorusModel):
        x = np.mod(np.asarray(start, dtype=float).reshape(model.dimension), 1.0)
        idx, disp = model.sample(rng, n)
        mats = [a.astype(float) for a in model.matrices]
        v = model.direction.astype(float)
        out = [x.copy()]
        for k in range(n):
            x = np.mod(mats[idx[k]] @ x + disp[k] * v, 1.0)
            if (k + 1) % thin == 0:
                out.append(x.copy())
        states = np.array(out)
    elif isinstance(model, CoverModel):
        x0 = np.asarray(start, dtype=np.int64).reshape(model.degree)
        choice = rng.choice(len(model.step_law), size=n, p=model.masses)
        path = np.vstack([x0, x0 + np.cumsum(model.support[choice], axis=0)])
        states = path[::thin].copy()
    elif isinstance(model, LatticeChain):
        x0 = model.space.index(start)
        u = rng.random(n)
        states = np.array(_walk_single(Sampler.of(model), x0, u)[::thin], dtype=np.int64)
    else:
        raise SimulationError(f"cannot simulate {type(model).__name__}")
    start_t = tuple(np.atleast_1d(np.asarray(start)).tolist())
    name = getattr(model, "name", "") or type(model).__name__
    return Trajectory(name, start_t, int(seed), int(n), states, int(thin))


class Sampler:
    """Per-state successor lists with cumulative probabilities."""

    def __init__(self, succ: np.ndarray, cum: np.ndarray, count: np.ndarray):
        self.succ, self.cum, self.count = succ, cum, count
        self._lists = None

    @classmethod
    def of(cls, chain: LatticeChain) -> Sampler:
        if isinstance(chain, TorusChain):
            table, probs = chain.step_table()
            cum = np.tile(np.cumsum(probs), (table.shape[0], 1))
            return cls(table, cum, np.full(table.shape[0], table.shape[1]))
        if isinstance(chain, MatrixChain):
            P = chain.P
            S = P.shape[0]
            k = int((P > 0).sum(axis=1).max())
            succ = np.zeros((S, k), dtype=np.int64)
            cum = np.full((S, k), np.inf)
            count = np.zeros(S, dtype=np.int64)
            for x in range(S):
                nz = np.flatnonzero(P[x] > 0)
                succ[x, : len(nz)] = nz
                cum[x, : len(nz)] = np.cumsum(P[x, nz])
                count[x] = len(nz)
            return cls(succ, cum, count)
        raise SimulationError(f"no sampler for {type(chain).__name__}")

    def step(self, states: np.ndarray, u: np.ndarray) -> np.ndarray:
        k = (self.cum[states] <= u[:, None]).sum(axis=1)
        k = np.minimum(k, self.count[states] - 1)
        return self.succ[states, k]

    def lists(self):
        if self._lists is None:
            self._lists = (
                [list(map(int, self.succ[x, : self.count[x]])) for x in range(len(self.count))],
                [list(map(float, self.cum[x, : self.count[x]])) for x in range(len(self.count))],
            )
        return self._lists


def _walk_single(sampler: Sampler, x0: int, u: np.ndarray) -> list[int]:
    succ, cum = sampler.lists()
    path = [int(x0)]
    x = int(x0)
    for ui in u.tolist():
        row = succ[x]
        x = row[min(bisect.bisect_right(cum[x], ui), len(row) - 1)]
        path.append(x)
    return path


def _path_values(chain, f, x0: int, n: int, seed: int) -> np.ndarray:
    """f(Phi_0), ..., f(Phi_{n-1}) along one seeded path."""
    u = np.random.default_rng(np.random.SeedSequence(int(seed))).random(n)
    path = np.array(_walk_single(Sampler.of(chain), x0, u)[:n])
    return np.asarray(f, dtype=float).reshape(-1)[path]


def chain_sums(chain: LatticeChain, f, n: int, trials: int, seed: int, start=None) -> np.ndarray:
    """Sigma_n(f) = sum_{k<n} f(Phi_k) for independent trials.

    ``start=None`` draws Phi_0 from the stationary law; otherwise every trial
    starts from the given state.
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    sampler = Sampler.of(chain)
    pi = kernel.stationary(chain).flat
    cum_pi = np.cumsum(pi)

    def block(rng, size):
        if start is None:
            x = np.minimum(np.searchsorted(cum_pi, rng.random(size), side="right"), len(pi) - 1)
        else:
            x = np.full(size, chain.space.index(start), dtype=np.int64)
        total = np.zeros(size)
        for _ in range(n):
            total += f[x]
            x = sampler.step(x, rng.random(size))
        return total

    return run_blocks(seed, trials, block)


# ---------------------------------------------------------------------------
# SLLN / CLT / LIL


def _require_aperiodic(chain):
    per = kernel.period(chain, 0)
    if per.period != 1:
        raise SimulationError(
            f"limit theorems need an aperiodic chain; detected period {per.period}"
        )


@dataclass
class SllnResult:
    n: int
    empirical_mean: float
    exact_mean: float
    deviation: float
    threshold: float | None
    passed: bool | None
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d) -> SllnResult:
        return cls(**d)


def _running_mean_trace(vals: np.ndarray) -> list:
    """[n, Sigma_n / n] at powers of two and at the final n."""
    n = len(vals)
    csum = np.cumsum(vals)
    cps = [1 << k for k in range(n.bit_length()) if (1 << k) <= n]
    if cps and cps[-1] != n:
        cps.append(n)
    return [[int(c), float(csum[c - 1] / c)] for c in cps]


@dataclass(frozen=True)
class TorusBox:
    """Axis-parallel box [lower, upper) in [0,1)^n with rational corners."""

    lower: tuple
    upper: tuple

    def measure(self) -> float:
        return float(np.prod([float(h) - float(l) for l, h in zip(self.lower, self.upper)]))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        lo = np.array([float(v) for v in self.lower])
        hi = np.array([float(v) for v in self.upper])
        return np.all((points >= lo) & (points < hi), axis=-1).astype(float)


def slln_check(target, f, n: int, seed: int, start=0, gamma2: float | None = None) -> SllnResult:
    """Deviation |Sigma_n(f)/n - integral of f| along one path.

    ``target`` is a lattice chain with f an array over its states (exact mean
    from the stationary law, variance oracle from the autocovariance series), or
    an affine torus model with f a :class:`TorusBox` (exact mean = box volume).
    """
    if isinstance(target, LatticeChain):
        fv = np.asarray(f, dtype=float).reshape(-1)
        exact = float(kernel.stationary(target).flat @ fv)
        if np.ptp(fv) == 0:
            c = float(fv[0])
            return SllnResult(n, c, c, 0.0, 0.0, True, _running_mean_trace(np.full(n, c)))
        if gamma2 is None:
            gamma2 = kernel.asymptotic_variance(target, fv).gamma2
        vals = _path_values(target, fv, target.space.index(start), n, seed)
    elif isinstance(target, AffineTorusModel):
        if not isinstance(f, TorusBox):
            raise SimulationError("torus models need a TorusBox so the exact mean is known")
        exact = f.measure()
        traj = simulate(target, start if np.ndim(start) else [0.0] * target.dimension, n, seed)
        vals = f(traj.states[:n])
    else:
        raise SimulationError("exact mean unknown; provide a chain-backed f")
    emp = float(vals.sum() / n)
    dev = abs(emp - exact)
    thr = None if gamma2 is None else 3.0 * math.sqrt(gamma2 / n)
    passed = None if thr is None else bool(dev <= thr)
    return SllnResult(n, emp, exact, dev, thr, passed, _running_mean_trace(vals))


@dataclass(eq=False)
class CltReport:
    f_id: str
    gamma2: float
    trials: int
    n: int
    standardized: np.ndarray
    ks: float
    slln_deviation: float
    degenerate: bool
    passed: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["standardized"] = self.standardized.tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> CltReport:
        d = dict(d)
        d["standardized"] = np.array(d["standardized"], dtype=float)
        return cls(**d)

    def __eq__(self, other):
        if not isinstance(other, CltReport):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        return a == b


def clt_check(chain: LatticeChain, f, n: int, trials: int, seed: int, f_id: str = "f") -> CltReport:
    """KS distance between standardized sums n^{-1/2} Sigma_n(fbar) and N(0, gamma^2).

    Trials start from the stationary law.  When gamma^2 vanishes the limit is
    the Dirac mass at 0 and the check becomes max |value| < 5/sqrt(n).
    """
    _require_aperiodic(chain)
    fv = np.asarray(f, dtype=float).reshape(-1)
    mean = float(kernel.stationary(chain).flat @ fv)
    gamma2 = kernel.asymptotic_variance(chain, fv).gamma2
    sums = chain_sums(chain, fv, n, trials, seed)
    z = (sums - n * mean) / math.sqrt(n)
    slln_dev = abs(float(sums[0]) / n - mean)
    degenerate = gamma2 < 1e-12
    if degenerate:
        # KS distance to the point mass at 0
        ks = float(max(np.mean(z < 0), np.mean(z > 0)))
        passed = bool(np.max(np.abs(z)) < 5.0 / math.sqrt(n))
    else:
        ks = float(stats.kstest(z, stats.norm(scale=math.sqrt(gamma2)).cdf).statistic)
        passed = ks < KS_THRESHOLD
    return CltReport(f_id, gamma2, trials, n, z, ks, slln_dev, degenerate, passed)


@dataclass
class LilTrace:
    checkpoints: list
    running_max: list
    gamma: float
    final: float
    passed: bool | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d) -> LilTrace:
        return cls(**d)


def lil_smoke(chain: LatticeChain, f, n_max: int, seed: int, start=0, n_min: int = 1024) -> LilTrace:
    """Running maximum of |Sigma_n(fbar)| / sqrt(2 n ln ln n) over n_min <= n.

    Values are recorded at dyadic checkpoints and at n_max.  The smoke check
    asks the final value to lie in [0.2 gamma, 3 gamma] when gamma > 0.
    """
    _require_aperiodic(chain)
    fv = np.asarray(f, dtype=float).reshape(-1)
    mean = float(kernel.stationary(chain).flat @ fv)
    gamma = math.sqrt(kernel.asymptotic_variance(chain, fv).gamma2)
    vals = _path_values(chain, fv - mean, chain.space.index(start), n_max, seed)
    partial = np.cumsum(vals)
    ns = np.arange(1, n_max + 1)
    stat = np.zeros(n_max)
    ok = ns >= max(n_min, 16)
    stat[ok] = np.abs(partial[ok]) / np.sqrt(2 * ns[ok] * np.log(np.log(ns[ok])))
    running = np.maximum.accumulate(stat)
    cps = [1 << k for k in range(n_max.bit_length()) if (1 << k) <= n_max]
    if cps[-1] != n_max:
        cps.append(n_max)
    trace = [float(running[c - 1]) for c in cps]
    final = trace[-1]
    if gamma < 1e-9:
        passed = None
    else:
        passed = bool(0.2 * gamma <= final <= 3 * gamma)
    return LilTrace([int(c) for c in cps], trace, gamma, final, passed)


# ---------------------------------------------------------------------------
# recurrence


def _alias_bound(model: CoverModel, M: int, N: int, rB: int) -> float:
    """Bernstein bound on the mass a period-M torus folds back onto B up to time N."""
    mean = model.mean()
    if np.any(np.abs(mean) > 1e-15):
        return math.inf
    t = M - rB
    if t <= 0:
        return math.inf
    r = model.reach
    var = (model.masses[:, None] * model.support.astype(float) ** 2).sum(axis=0)
    ns = np.arange(1, N + 1)
    total = 0.0
    for s2 in var:
        total += float(np.sum(2.0 * np.exp(-(t * t) / (2.0 * (ns * s2 + r * t / 3.0)))))
    return total


def fourier_period(model: CoverModel, N: int, rB: int = 0, budget: float = ALIAS_BUDGET) -> tuple[int, float]:
    """Smallest torus period M whose aliasing error on Green sums up to N is below budget.

    Returns (M, bound); M = N*reach + rB + 1 is exact (bound 0).
    """
    exact = N * model.reach + rB + 1
    M = max(2 * rB + 2, 8)
    while M < exact:
        b = _alias_bound(model, M, N, rB)
        if b <= budget:
            return M, b
        M = int(M * 1.25) + 1
    return exact, 0.0


def green_sums(model: CoverModel, B, horizons: Sequence[int], M: int | None = None, slab: int = 1 << 16) -> np.ndarray:
    """Exact Green partial sums G_K = sum_{k=0}^{K} P^k(0, B) for each K.

    Computed on the dual of a period-M torus with the closed geometric sum
    (1 - phi^{K+1}) / (1 - phi) per frequency.
    """
    horizons = [int(h) for h in horizons]
    B = np.asarray(B, dtype=np.int64).reshape(-1, model.degree)
    rB = int(np.abs(B).max()) if B.size else 0
    if M is None:
        M, _ = fourier_period(model, max(horizons), rB)
    d = model.degree
    supp = model.support.astype(float)
    w = model.masses
    theta1 = 2 * np.pi * np.arange(M) / M
    total = np.zeros(len(horizons))
    # iterate over the leading frequency axis in slabs to bound memory
    rest = M ** (d - 1)
    per = max(1, slab // max(rest, 1))
    grids_rest = np.meshgrid(*([theta1] * (d - 1)), indexing="ij") if d > 1 else []
    rest_flat = [g.reshape(-1) for g in grids_rest]
    for s in range(0, M, per):
        t0 = theta1[s : s + per]
        th = [np.repeat(t0, rest)] + [np.tile(g, len(t0)) for g in rest_flat]
        th = np.stack(th, axis=1)
        phase = th @ supp.T
        one_minus = (w * 2.0 * np.sin(phase / 2.0) ** 2).sum(axis=1) - 1j * (w * np.sin(phase)).sum(axis=1)
        char_B = np.exp(-1j * (th @ B.T.astype(float))).sum(axis=1)
        zero = np.abs(one_minus) == 0
        # phi = 0 exactly contributes only the k = 0 term
        null = np.abs(1.0 - one_minus) == 0
        safe = np.where(zero | null, 0.5, one_minus)
        log_phi = np.log1p(-safe)
        for i, K in enumerate(horizons):
            geo = -np.expm1((K + 1) * log_phi) / safe
            geo = np.where(zero, K + 1, np.where(null, 1.0, geo))
            total[i] += float(np.real(geo * char_B).sum())
    return total / M ** d


def green_sums_window(model: CoverModel, B, N: int) -> np.ndarray:
    """G_0..G_N by exact window convolution (small N only)."""
    radius = N * model.reach + 1
    chain = kernel.window_chain(model, radius)
    dist = kernel.dirac(chain.space, (0,) * model.degree).values
    idx = [chain.space.index(b) for b in np.asarray(B).reshape(-1, model.degree)]
    out, g = [], 0.0
    for _ in range(N + 1):
        g += float(dist.reshape(-1)[idx].sum())
        out.append(g)
        dist = chain.push(dist)
    return np.array(out)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class RecurrenceReport:
    model_id: str
    B: list
    horizon: int
    checkpoints: list
    green: list
    increment_ratio: float
    return_probability: float
    mc_trials: int
    mc_return: float
    mc_interval: tuple
    mean_visits: float
    classification: str
    hypotheses: dict = field(default_factory=dict)
    fourier_period: int = 0
    alias_bound: float = 0.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["mc_interval"] = list(self.mc_interval)
        return d

    @classmethod
    def from_dict(cls, d) -> RecurrenceReport:
        d = dict(d)
        d["mc_interval"] = tuple(d["mc_interval"])
        return cls(**d)


def classify_ratio(ratio: float) -> str:
    if ratio >= RECURRENT_RATIO:
        return "recurrent"
    if ratio <= TRANSIENT_RATIO:
        return "transient"
    return "inconclusive"


def _mc_returns(model: CoverModel, B, N: int, trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    Bset = np.asarray(B, dtype=np.int64).reshape(-1, model.degree)
    supp, w = model.support, model.masses

    def block(rng, size):
        x = np.zeros((size, model.degree), dtype=np.int64)
        returned = np.zeros(size, dtype=bool)
        visits = np.zeros(size)
        for _ in range(N):
            x += supp[rng.choice(len(w), size=size, p=w)]
            inside = (x[:, None, :] == Bset[None, :, :]).all(axis=2).any(axis=1)
            returned |= inside
            visits += inside
        return np.stack([returned.astype(float), visits], axis=1).reshape(-1)

    flat = run_blocks(seed, trials, block).reshape(-1, 2)
    return flat[:, 0], flat[:, 1]


def classify_recurrence(
    model: CoverModel, B=None, N: int = 10_000, trials: int = 2000, seed: int = 0,
    mc_horizon: int | None = None,
) -> RecurrenceReport:
    """Recurrence/transience verdict for a walk on Z^d.

    The verdict reads the dyadic increment ratio
    (G_N - G_{N/2}) / (G_{N/2} - G_{N/4}) of exact Green partial sums, which
    tends to sqrt(2), 1 and 1/sqrt(2) for growth like sqrt(N), log N and a
    convergent sum with N^{-1/2} tail.  The return probability
    1 - 1/G_N (for B = {0}) and a Monte Carlo estimate are reported alongside.
    """
    require_adapted(model)
    if B is None:
        B = [(0,) * model.degree]
    B = np.asarray(B, dtype=np.int64).reshape(-1, model.degree)
    if N < 4:
        raise SimulationError("horizon must be at least 4")
    cps = sorted({max(1, (N * j) // 16) for j in range(1, 17)} | {N // 4, N // 2, N})
    rB = int(np.abs(B).max())
    M, bound = fourier_period(model, N, rB)
    G = green_sums(model, B, cps, M=M)
    g = dict(zip(cps, G))
    ratio = (g[N] - g[N // 2]) / (g[N // 2] - g[N // 4])
    ret = 1.0 - 1.0 / g[N] if len(B) == 1 and not np.any(B) else float("nan")
    hmc = N if mc_horizon is None else mc_horizon
    if trials > 0:
        returned, visits = _mc_returns(model, B, hmc, trials, seed)
        k = int(returned.sum())
        mc, ci, eta = k / trials, wilson_interval(k, trials), float(visits.mean())
    else:
        mc, ci, eta = float("nan"), (float("nan"), float("nan")), float("nan")
    verdict = classify_ratio(ratio)
    if verdict == "transient" and trials > 0 and ci[1] >= 0.99:
        verdict = "inconclusive"
    from ergomix.models import measure_growth

    growth = measure_growth(model, n_max=20 if model.degree > 2 else 50)
    hyp = {
        "symmetric": model.is_symmetric(),
        "finite_support": True,
        "adapted": True,
        "growth": growth.classification,
    }
    return RecurrenceReport(
        model.name, B.tolist(), N, cps, [float(x) for x in G], float(ratio), float(ret),
        int(trials), float(mc), ci, eta, verdict, hyp, int(M), float(bound),
    )


# ---------------------------------------------------------------------------
# ratio limits


def _as_measure(spec, d: int) -> dict:
    """Point or {point: mass} / [(point, mass)] into a dict of lattice points."""
    if isinstance(spec, Mapping):
        items = spec.items()
    elif not _is_point(spec):
        items = spec
    else:
        return {tuple(np.atleast_1d(np.asarray(spec, dtype=np.int64)).tolist()): 1.0}
    out: dict = {}
    for p, w in items:
        key = tuple(np.atleast_1d(np.asarray(p, dtype=np.int64)).tolist())
        out[key] = out.get(key, 0.0) + _real(w)
    return out


def _real(x) -> float:
    return float(x) if isinstance(x, (int, float, np.number)) else float(as_fraction(x))


def _is_point(spec) -> bool:
    return not isinstance(spec, Mapping) and not (
        isinstance(spec, (list, tuple)) and spec and isinstance(spec[0], (list, tuple))
    )


def _function(spec, d: int) -> dict:
    if isinstance(spec, Mapping):
        items = spec.items()
    else:
        items = [(p, 1.0) for p in spec]
    out: dict = {}
    for p, v in items:
        key = tuple(np.atleast_1d(np.asarray(p, dtype=np.int64)).tolist())
        out[key] = out.get(key, 0.0) + _real(v)
    if any(len(k) != d for k in out):
        raise SimulationError(f"function support must lie in Z^{d}")
    return out


def _exact_pairings(model: CoverModel, nu: dict, f: dict, n: int) -> np.ndarray:
    """(mu^k * nu)(f) for k = 0..n by exact window convolution."""
    d = model.degree
    spread = max(max(abs(c) for p in nu for c in p), max(abs(c) for p in f for c in p))
    radius = n * model.reach + spread + 1
    chain = kernel.window_chain(model, radius)
    dist = np.zeros(chain.space.shape)
    for p, w in nu.items():
        dist[chain.space.index(p) if d > 1 else chain.space.index(p[0])] += w
    fv = np.zeros(chain.space.shape)
    for p, v in f.items():
        fv[chain.space.index(p) if d > 1 else chain.space.index(p[0])] += v
    out = np.empty(n + 1)
    for k in range(n + 1):
        out[k] = float((dist * fv).sum())
        if k < n:
            dist = chain.push(dist)
    return out


@dataclass(eq=False)
class RatioReport:
    mode: str
    f1: list
    f2: list
    starts: list
    n: int
    ratios: np.ndarray
    target: float
    deviation: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ratios"] = _clean(self.ratios)
        return d

    @classmethod
    def from_dict(cls, d) -> RatioReport:
        d = dict(d)
        d["ratios"] = _unclean(d["ratios"])
        return cls(**d)

    def __eq__(self, other):
        if not isinstance(other, RatioReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def ratio_limit_check(model: CoverModel, f1, f2, starts, n: int, mode: str = "cesaro") -> RatioReport:
    """Exact ratio sequence against the target sum(f1) / sum(f2).

    ``cesaro`` compares sum_{j<=k} (mu^j * nu_1)(f1) with the same for
    (nu_2, f2); ``strong`` compares (mu^k * nu_1)(f1) with (mu^k * nu_2)(f2)
    and requires bounded finitely supported densities as starts together with
    a symmetric aperiodic law.  Functions are point lists (indicators) or
    {point: value} maps; entries are NaN while the denominator vanishes.
    """
    if mode not in ("cesaro", "strong"):
        raise SimulationError(f"unknown mode {mode!r}")
    d = model.degree
    g1, g2 = _function(f1, d), _function(f2, d)
    if any(v < 0 for v in g2.values()) or sum(g2.values()) <= 0:
        raise SimulationError("f2 must be nonnegative with positive total")
    s1, s2 = starts
    nu1, nu2 = _as_measure(s1, d), _as_measure(s2, d)
    require_adapted(model)
    if mode == "strong":
        if _is_point(s1) or _is_point(s2) or len(nu1) < 2 or len(nu2) < 2:
            raise SimulationError(
                "strong mode needs bounded densities as starts; the Dirac-start version "
                "is an open conjecture and is not attempted"
            )
        if not model.is_symmetric():
            raise SimulationError("strong mode needs a symmetric law")
        per = walk_period(model)
        if per != 1:
            raise SimulationError(f"strong mode needs an aperiodic law; the walk has period {per}")
    for nu in (nu1, nu2):
        if any(w < 0 for w in nu.values()) or abs(sum(nu.values()) - 1) > 1e-12:
            raise SimulationError("start measures must be probability vectors")
    num = _exact_pairings(model, nu1, g1, n)
    den = _exact_pairings(model, nu2, g2, n)
    if mode == "cesaro":
        num, den = np.cumsum(num), np.cumsum(den)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    target = sum(g1.values()) / sum(g2.values())
    dev = abs(float(ratios[-1]) - target) if np.isfinite(ratios[-1]) else float("inf")
    enc = lambda g: [[list(k), v] for k, v in sorted(g.items())]
    return RatioReport(mode, enc(g1), enc(g2), [enc(nu1), enc(nu2)], int(n), ratios, float(target), dev)


@dataclass(eq=False)
class ProbeReport:
    x: list
    A: list
    n_max: int
    ratios: np.ndarray
    tail_max: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ratios"] = _clean(self.ratios)
        return d

    @classmethod
    def from_dict(cls, d) -> ProbeReport:
        d = dict(d)
        d["ratios"] = _unclean(d["ratios"])
        return cls(**d)

    def __eq__(self, other):
        if not isinstance(other, ProbeReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def conjecture_probe(model: CoverModel, x, A, n_max: int) -> ProbeReport:
    """Sequence (mu^n * delta_x)(A) / (mu^n * m_A)(A) for n = 0..n_max.

    Exploratory output only; ``tail_max`` is the maximum over the second half.
    """
    if not model.is_symmetric():
        raise SimulationError("the probe needs a symmetric law")
    per = walk_period(model)
    if per != 1:
        raise SimulationError(f"the probe needs an aperiodic law; the walk has period {per}")
    d = model.degree
    Aset = _function(A, d)
    indicator = {p: 1.0 for p in Aset}
    mA = {p: 1.0 / len(indicator) for p in indicator}
    num = _exact_pairings(model, _as_measure(x, d), indicator, n_max)
    den = _exact_pairings(model, mA, indicator, n_max)
    ratios = num / den
    tail = ratios[n_max // 2 :]
    return ProbeReport(
        list(np.atleast_1d(x).tolist()), [list(p) for p in sorted(indicator)], int(n_max),
        ratios, float(np.max(tail)),
    )
