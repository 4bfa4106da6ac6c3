"""Exact finite-state transition kernels.

Three chain flavours share one interface (``push`` for measures, ``pull`` for
functions):

* :class:`TorusChain` on (Z/mZ)^n: a mixture of lattice permutations x -> a x
  followed by circular convolution along the displacement direction;
* :class:`WindowChain` on a box of Z^d with absorbing boundary, so escaped mass
  is tracked and every in-window probability is a certified lower bound;
* :class:`MatrixChain` for an explicit stochastic matrix.

Arrays carry the state-space shape in their trailing axes; any leading axes
are batch axes, which lets many starting points evolve together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ergomix.models import AffineTorusModel, CoverModel, ModelError

MASS_TOL = 1e-12


class ChainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# state spaces


@dataclass(frozen=True)
class Torus:
    """(Z/mZ)^n, states stored row-major over coordinates."""

    m: int
    n: int

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    def index(self, state) -> int:
        """Flat index of a state given by coordinates or by a flat index."""
        if np.ndim(state) == 0:
            i = int(state)
            if not 0 <= i < self.size:
                raise ChainError(f"flat index {i} out of range")
            return i
        coords = np.asarray(state, dtype=np.int64) % self.m
        if coords.shape != (self.n,):
            raise ChainError(f"state {state!r} is not a point of (Z/{self.m}Z)^{self.n}")
        return int(np.ravel_multi_index(tuple(coords), self.shape))

    def coords(self) -> np.ndarray:
        """(size, n) array of the coordinates of every state."""
        return np.indices(self.shape).reshape(self.n, -1).T


@dataclass(frozen=True)
class Window:
    """The box [-radius, radius]^d inside Z^d."""

    d: int
    radius: int

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.radius + 1,) * self.d

    @property
    def size(self) -> int:
        return (2 * self.radius + 1) ** self.d

    def index(self, point) -> int:
        p = np.atleast_1d(np.asarray(point, dtype=np.int64))
        if p.shape != (self.d,) or np.any(np.abs(p) > self.radius):
            raise ChainError(f"point {p.tolist()} is outside the window of radius {self.radius}")
        return int(np.ravel_multi_index(tuple(p + self.radius), self.shape))

    def coords(self) -> np.ndarray:
        return np.indices(self.shape).reshape(self.d, -1).T - self.radius


@dataclass(frozen=True)
class Finite:
    size: int

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,)

    def index(self, state) -> int:
        i = int(state)
        if not 0 <= i < self.size:
            raise ChainError(f"state {i} out of range")
        return i

    def coords(self) -> np.ndarray:
        return np.arange(self.size)[:, None]


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True, eq=False)
class Distribution:
    """Dense nonnegative vector over a state space.

    ``escaped`` is the mass that left a window; for torus and finite spaces
    it stays 0.
    """

    space: Torus | Window | Finite
    values: np.ndarray
    escaped: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.space.shape:
            if v.size != self.space.size:
                raise ChainError(f"vector of shape {v.shape} does not fit space {self.space}")
            v = v.reshape(self.space.shape)
        if np.any(v < -MASS_TOL):
            raise ChainError("distribution has negative entries")
        v = np.clip(v, 0.0, None)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __getitem__(self, state) -> float:
        return float(self.flat[self.space.index(state)])

    def __eq__(self, other):
        return (
            isinstance(other, Distribution)
            and self.space == other.space
            and np.array_equal(self.values, other.values)
            and self.escaped == other.escaped
        )

    __hash__ = None


def dirac(space, state) -> Distribution:
    v = np.zeros(space.size)
    v[space.index(state)] = 1.0
    return Distribution(space, v)


def uniform(space) -> Distribution:
    return Distribution(space, np.full(space.size, 1.0 / space.size))


def from_points(space, masses) -> Distribution:
    """Distribution from a mapping or iterable of ``(state, mass)`` pairs."""
    items = masses.items() if hasattr(masses, "items") else masses
    v = np.zeros(space.size)
    for state, w in items:
        v[space.index(state)] += float(w)
    return Distribution(space, v)


def _as_values(d) -> np.ndarray:
    return d.values if isinstance(d, Distribution) else np.asarray(d, dtype=float)


# ---------------------------------------------------------------------------
# chains


class LatticeChain:
    """Common interface; subclasses implement one step on measures and functions."""

    space: Torus | Window | Finite

    def push(self, arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pull(self, f: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def ndim(self) -> int:
        return len(self.space.shape)

    def transition_matrix(self) -> np.ndarray:
        S = self.space.size
        eye = np.eye(S).reshape((S,) + self.space.shape)
        return self.push(eye).reshape(S, S)


def _roll(arr: np.ndarray, shift, ndim: int) -> np.ndarray:
    shift = tuple(int(s) for s in shift)
    if not any(shift):
        return arr
    return np.roll(arr, shift, axis=tuple(range(-ndim, 0)))


class TorusChain(LatticeChain):
    """Mixture over components ``(matrix, weight, scalar_probs, direction)``.

    One step applies x -> a x mod m and then adds k v with probability
    ``scalar_probs[k]``.
    """

    def __init__(self, m: int, n: int, components: Sequence):
        self.space = Torus(int(m), int(n))
        comps = []
        total = 0.0
        coords = self.space.coords()
        for a, w, probs, v in components:
            a = np.asarray(a, dtype=np.int64)
            probs = np.asarray(probs, dtype=float)
            v = np.asarray(v, dtype=np.int64)
            if a.shape != (n, n) or probs.shape != (m,) or v.shape != (n,):
                raise ChainError("component shapes do not match the torus")
            if w < 0 or np.any(probs < 0) or abs(probs.sum() - 1) > MASS_TOL:
                raise ChainError("component weights must be probabilities")
            if math.gcd(int(round(np.linalg.det(a))) % m, m) != 1 and m > 1:
                raise ChainError(f"matrix {a.tolist()} is not invertible mod {m}")
            dest = np.ravel_multi_index(tuple(((coords @ a.T) % m).T), self.space.shape)
            if len(np.unique(dest)) != self.space.size:
                raise ChainError(f"matrix {a.tolist()} does not permute (Z/{m}Z)^{n}")
            ks = [int(k) for k in np.flatnonzero(probs)]
            comps.append((a, float(w), probs, v, dest, ks))
            total += float(w)
        if abs(total - 1) > MASS_TOL:
            raise ChainError(f"mixture weights sum to {total!r}")
        self.components = tuple(comps)

    def push(self, arr):
        arr = np.asarray(arr, dtype=float)
        batch = arr.shape[: arr.ndim - self.ndim]
        flat = arr.reshape(batch + (-1,))
        out = np.zeros_like(arr)
        m = self.space.m
        for a, w, probs, v, dest, ks in self.components:
            if w == 0:
                continue
            perm = np.empty_like(flat)
            perm[..., dest] = flat
            perm = perm.reshape(arr.shape)
            conv = np.zeros_like(arr)
            for k in ks:
                conv += probs[k] * _roll(perm, (k * v) % m, self.ndim)
            out += w * conv
        return out

    def pull(self, f):
        f = np.asarray(f, dtype=float)
        batch = f.shape[: f.ndim - self.ndim]
        out = np.zeros_like(f)
        m = self.space.m
        for a, w, probs, v, dest, ks in self.components:
            if w == 0:
                continue
            g = np.zeros_like(f)
            for k in ks:
                g += probs[k] * _roll(f, (-k * v) % m, self.ndim)
            h = g.reshape(batch + (-1,))[..., dest].reshape(f.shape)
            out += w * h
        return out

    def step_table(self):
        """Deterministic successor table for simulation.

        Returns ``(table, probs)`` where ``table[x, o]`` is the successor of flat
        state x under outcome o and ``probs[o]`` its probability.
        """
        m, n = self.space.m, self.space.n
        coords = self.space.coords()
        cols, probs = [], []
        for a, w, p, v, dest, ks in self.components:
            if w == 0:
                continue
            for k in ks:
                nxt = (coords @ a.T + k * v) % m
                cols.append(np.ravel_multi_index(tuple(nxt.T), self.space.shape))
                probs.append(w * p[k])
        return np.stack(cols, axis=1), np.array(probs)


def cyclic_chain(m: int, probs) -> TorusChain:
    """Walk on Z/m adding k with probability ``probs[k]`` (a mapping or vector)."""
    vec = np.zeros(m)
    items = probs.items() if hasattr(probs, "items") else enumerate(probs)
    for k, w in items:
        vec[int(k) % m] += float(w)
    return TorusChain(m, 1, [(np.eye(1, dtype=np.int64), 1.0, vec, np.array([1]))])


def discretize(model: AffineTorusModel, m: int) -> TorusChain:
    """Exact lattice chain of an affine torus model at resolution m.

    Each linear part permutes the (1/m)-lattice; the scalar law becomes the
    vector of cell masses, so compatibility of m with every rational
    breakpoint is required.
    """
    m = int(m)
    if m < 1:
        raise ChainError("resolution must be positive")
    try:
        probs = model.displacement.cell_masses(m)
    except ModelError as exc:
        raise ChainError(str(exc)) from exc
    v = model.direction
    comps = [(a, float(w), probs, v) for a, w in model.linear_parts]
    return TorusChain(m, model.dimension, comps)


class WindowChain(LatticeChain):
    """Translation-invariant walk on Z^d restricted to a box.

    ``boundary="absorbing"`` drops mass that leaves the box (callers recover it
    as 1 - mass); ``boundary="none"`` raises as soon as any mass would leave.
    """

    def __init__(self, d: int, radius: int, offsets, masses, boundary: str = "absorbing"):
        if boundary not in ("absorbing", "none"):
            raise ChainError(f"unknown boundary policy {boundary!r}")
        self.space = Window(int(d), int(radius))
        self.offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, d)
        self.masses = np.asarray(masses, dtype=float)
        if abs(self.masses.sum() - 1) > MASS_TOL or np.any(self.masses < 0):
            raise ChainError("step masses must form a probability vector")
        self.boundary = boundary

    def _shift(self, arr, z):
        out = np.zeros_like(arr)
        src, dst = [], []
        for k, size in zip(z, self.space.shape):
            k = int(k)
            if abs(k) >= size:
                return out
            if k >= 0:
                src.append(slice(0, size - k))
                dst.append(slice(k, size))
            else:
                src.append(slice(-k, size))
                dst.append(slice(0, size + k))
        lead = (Ellipsis,)
        out[lead + tuple(dst)] = arr[lead + tuple(src)]
        return out

    def push(self, arr):
        arr = np.asarray(arr, dtype=float)
        out = np.zeros_like(arr)
        for z, w in zip(self.offsets, self.masses):
            out += w * self._shift(arr, z)
        if self.boundary == "none":
            axes = tuple(range(-self.ndim, 0))
            lost = arr.sum(axis=axes) - out.sum(axis=axes)
            if np.any(np.abs(lost) > 1e-15):
                raise ChainError("mass left the window but boundary policy is 'none'")
        return out

    def pull(self, f):
        f = np.asarray(f, dtype=float)
        out = np.zeros_like(f)
        for z, w in zip(self.offsets, self.masses):
            out += w * self._shift(f, -z)
        return out


def window_chain(model: CoverModel, radius: int, boundary: str = "absorbing") -> WindowChain:
    return WindowChain(model.degree, radius, model.support, model.masses, boundary)


class MatrixChain(LatticeChain):
    """Chain given by an explicit row-stochastic matrix."""

    def __init__(self, P):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ChainError("transition matrix must be square")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > MASS_TOL):
            raise ChainError("transition matrix must be row-stochastic")
        self.P = P
        self.space = Finite(P.shape[0])

    def push(self, arr):
        return np.asarray(arr, dtype=float) @ self.P

    def pull(self, f):
        return np.einsum("ij,...j->...i", self.P, np.asarray(f, dtype=float))

    def transition_matrix(self):
        return self.P.copy()


def birth_death_chain(size: int, down: float, up: float) -> MatrixChain:
    """Nearest-neighbour walk on {0, ..., size-1}; blocked moves hold in place."""
    hold = 1.0 - down - up
    if hold < -MASS_TOL:
        raise ChainError("down + up exceeds 1")
    if abs(hold) <= MASS_TOL:
        hold = 0.0  # rounding residue must not create self-loops
    P = np.zeros((size, size))
    for x in range(size):
        P[x, x] += max(hold, 0.0)
        P[x, max(x - 1, 0)] += down
        P[x, min(x + 1, size - 1)] += up
    return MatrixChain(P)


# ---------------------------------------------------------------------------
# operations


def evolve_array(chain: LatticeChain, arr, n: int) -> np.ndarray:
    if n < 0:
        raise ChainError("number of steps must be nonnegative")
    arr = np.asarray(arr, dtype=float)
    if arr.shape[arr.ndim - chain.ndim:] != chain.space.shape:
        raise ChainError(f"array of shape {arr.shape} does not match {chain.space}")
    for _ in range(n):
        arr = chain.push(arr)
    return arr


def evolve(chain: LatticeChain, dist: Distribution, n: int) -> Distribution:
    """Law after n steps started from ``dist``."""
    if dist.space != chain.space:
        raise ChainError(f"distribution lives on {dist.space}, chain on {chain.space}")
    out = evolve_array(chain, dist.values, n)
    escaped = dist.escaped + max(dist.mass - float(out.sum()), 0.0)
    return Distribution(chain.space, out, escaped)


def tv_norm(d1, d2) -> float:
    """Sum of absolute differences (twice the sup-over-sets distance)."""
    a, b = _as_values(d1), _as_values(d2)
    if isinstance(d1, Distribution) and isinstance(d2, Distribution) and d1.space != d2.space:
        raise ChainError("distributions live on different spaces")
    if a.shape != b.shape:
        raise ChainError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def tv_rows(arr, target) -> np.ndarray:
    """TV norm of each batch row of ``arr`` against ``target``."""
    arr = np.asarray(arr)
    t = _as_values(target)
    axes = tuple(range(arr.ndim - t.ndim, arr.ndim))
    return np.abs(arr - t).sum(axis=axes)


def stationary(chain: LatticeChain) -> Distribution:
    """Invariant probability: Haar (uniform) on tori, solved for finite chains."""
    if isinstance(chain, WindowChain):
        raise ChainError("window chains on Z^d carry no invariant probability")
    if isinstance(chain, TorusChain):
        pi = uniform(chain.space)
        resid = tv_norm(pi, chain.push(pi.values))
        if resid > 1e-12:
            raise ChainError(f"uniform law is not invariant (residual {resid:.3e})")
        return pi
    P = chain.transition_matrix()
    S = P.shape[0]
    A = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    resid = float(np.abs(pi @ P - pi).sum())
    if resid > 1e-10:
        raise ChainError(f"no unique invariant probability (residual {resid:.3e})")
    return Distribution(chain.space, pi)


class PeriodResult(NamedTuple):
    period: int | None
    classes: tuple[tuple[int, ...], ...]
    cutoff: int

    @property
    def conclusive(self) -> bool:
        return self.period is not None


def period(chain: LatticeChain, x=0, cutoff: int | None = None) -> PeriodResult:
    """gcd of return times to x up to ``cutoff``, with the cyclic classes.

    Returns ``period=None`` when the steps up to ``cutoff`` do not reach every
    state, since a gcd over an incomplete support could be wrong.
    """
    S = chain.space.size
    cutoff = 2 * S + 2 if cutoff is None else int(cutoff)
    x = chain.space.index(x)
    reach = np.zeros(S)
    reach[x] = 1.0
    first_time = np.full(S, -1, dtype=np.int64)
    first_time[x] = 0
    g = 0
    times = [reach > 0]
    for n in range(1, cutoff + 1):
        reach = (chain.push(reach.reshape(chain.space.shape)).reshape(-1) > 0).astype(float)
        mask = reach > 0
        times.append(mask)
        if mask[x]:
            g = math.gcd(g, n)
        new = mask & (first_time < 0)
        first_time[new] = n
    if np.any(first_time < 0) or g == 0:
        return PeriodResult(None, (), cutoff)
    classes = [[] for _ in range(g)]
    for y in range(S):
        classes[int(first_time[y]) % g].append(y)
    return PeriodResult(g, tuple(tuple(c) for c in classes), cutoff)


def _state_indices(space, A) -> np.ndarray:
    if A is None:
        return np.arange(space.size)
    idx = sorted({space.index(a) for a in A})
    if not idx:
        raise ChainError("set A must be nonempty")
    return np.array(idx, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class DoeblinCertificate:
    """Witness that ``P^{n0}(x, .) >= epsilon * lam`` for every x in ``set_A``.

    ``set_A`` holds flat state indices, or None for the whole space.  A
    certificate with ``epsilon == 0`` records that A is not small at this n0
    and is falsy.
    """

    n0: int
    epsilon: float
    lam: Distribution | None
    set_A: tuple[int, ...] | None = None

    def __bool__(self):
        return self.epsilon > 0

    @property
    def whole_space(self) -> bool:
        return self.set_A is None

    def verify(self, chain: LatticeChain, tol: float = 1e-12) -> bool:
        """Pointwise re-check of the minorization on every x in A."""
        if not self:
            return True
        idx = _state_indices(chain.space, self.set_A)
        lam = self.lam.flat
        for chunk in np.array_split(idx, max(1, len(idx) // 512)):
            rows = _evolve_rows(chain, chunk, self.n0)
            if np.any(rows < self.epsilon * lam - tol):
                return False
        return True


def _evolve_rows(chain, idx, n) -> np.ndarray:
    """P^n(x, .) for each flat state x in idx, as a (len(idx), size) array."""
    S = chain.space.size
    arr = np.zeros((len(idx), S))
    arr[np.arange(len(idx)), idx] = 1.0
    arr = evolve_array(chain, arr.reshape((len(idx),) + chain.space.shape), n)
    return arr.reshape(len(idx), S)


def doeblin_coefficient(chain: LatticeChain, A=None, n0: int = 1, chunk: int = 1024) -> DoeblinCertificate:
    """Exact minorization constant from the pointwise-minimum envelope.

    ``e(y) = min_{x in A} P^{n0}(x, y)``, ``epsilon = sum(e)``, ``lam = e / epsilon``.
    ``A=None`` means the whole state space.
    """
    if n0 < 1:
        raise ChainError("n0 must be at least 1")
    idx = _state_indices(chain.space, A)
    env = None
    for start in range(0, len(idx), chunk):
        rows = _evolve_rows(chain, idx[start : start + chunk], n0)
        low = rows.min(axis=0)
        env = low if env is None else np.minimum(env, low)
    eps = float(env.sum())
    set_A = None if A is None else tuple(int(i) for i in idx)
    if eps <= 0:
        return DoeblinCertificate(n0, 0.0, None, set_A)
    eps = min(eps, 1.0)
    return DoeblinCertificate(n0, eps, Distribution(chain.space, env / env.sum()), set_A)


def find_doeblin(chain: LatticeChain, A=None, max_n0: int = 6) -> DoeblinCertificate:
    """First n0 <= max_n0 at which A is small; the last failure otherwise."""
    cert = None
    for n0 in range(1, max_n0 + 1):
        cert = doeblin_coefficient(chain, A, n0)
        if cert:
            return cert
    return cert


class VarianceResult(NamedTuple):
    gamma2: float
    truncation: int


def _centered(chain, f):
    pi = stationary(chain)
    f = np.asarray(f, dtype=float).reshape(chain.space.shape)
    fbar = f - float((pi.values * f).sum())
    return pi, fbar


def autocovariances(chain: LatticeChain, f, k_max: int) -> np.ndarray:
    """Stationary autocovariances <fbar, P^k fbar>_pi for k = 0..k_max."""
    pi, fbar = _centered(chain, f)
    mu = pi.values * fbar
    out = [float((mu * fbar).sum())]
    for _ in range(k_max):
        mu = chain.push(mu)
        out.append(float((mu * fbar).sum()))
    return np.array(out)


def asymptotic_variance(
    chain: LatticeChain, f, k_max: int = 100_000, tol: float = 1e-12, patience: int = 10
) -> VarianceResult:
    """CLT variance via the stationary autocovariance series.

    Var_pi(fbar) + 2 sum_{k>=1} <fbar, P^k fbar>_pi, truncated once ``patience``
    consecutive terms fall below ``tol``.
    """
    pi, fbar = _centered(chain, f)
    mu = pi.values * fbar
    total = float((mu * fbar).sum())
    quiet = 0
    for k in range(1, k_max + 1):
        mu = chain.push(mu)
        c = float((mu * fbar).sum())
        total += 2.0 * c
        quiet = quiet + 1 if abs(c) < tol else 0
        if quiet >= patience:
            if total < -1e-9:
                raise ChainError(f"negative asymptotic variance {total!r}")
            return VarianceResult(max(total, 0.0), k)
    per = period(chain, 0)
    hint = (
        f"chain has period {per.period}; the series does not converge"
        if per.period not in (None, 1)
        else "increase k_max"
    )
    raise ChainError(f"autocovariance series did not converge within {k_max} terms: {hint}")


def finite_horizon_variance(chain: LatticeChain, f, n: int) -> float:
    """(1/n) E_pi[Sigma_n(fbar)^2] computed exactly from autocovariances."""
    c = autocovariances(chain, f, n - 1)
    k = np.arange(1, n)
    return float(c[0] + 2.0 * np.sum((1.0 - k / n) * c[1:]))


def function_power(chain: LatticeChain, f, k: int) -> np.ndarray:
    """P^k f as a function on states."""
    f = np.asarray(f, dtype=float).reshape(chain.space.shape)
    for _ in range(k):
        f = chain.pull(f)
    return f
