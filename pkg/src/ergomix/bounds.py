"""Closed-form convergence and recurrence bounds.

Doeblin and drift-and-minorization (Rosenthal) rates for total variation,
Foster-Lyapunov drift verification, and the Chebyshev-polynomial (Carne)
lower bound on return probabilities for symmetric walks on Z^d.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from ergomix import kernel
from ergomix.kernel import ChainError, DoeblinCertificate, LatticeChain
from ergomix.models import CoverModel, ModelError, ball_sizes

EXACT_WEIGHTS_MAX_N = 64


class BoundError(ValueError):
    pass


class DriftError(BoundError):
    """Drift inequality fails; ``witness`` is the offending flat state index."""

    def __init__(self, message, witness=None, excess=None):
        super().__init__(message)
        self.witness = witness
        self.excess = excess


# ---------------------------------------------------------------------------
# bound curves


@dataclass(frozen=True)
class BoundCurve:
    """Rows ``(n, bound, empirical_tv)``; ``empirical_tv`` may be None."""

    rows: tuple
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": [list(r) for r in self.rows], "provenance": dict(self.provenance)}

    @classmethod
    def from_dict(cls, d) -> BoundCurve:
        return cls(tuple(tuple(r) for r in d["rows"]), dict(d["provenance"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "bound", "empirical_tv"])
        for n, b, e in self.rows:
            w.writerow([n, repr(float(b)), "" if e is None else repr(float(e))])
        return buf.getvalue()

    def violations(self, tol: float = 1e-10) -> list:
        return [r for r in self.rows if r[2] is not None and r[2] > r[1] + tol]


# ---------------------------------------------------------------------------
# Doeblin


def doeblin_bound(cert: DoeblinCertificate, n: int) -> float:
    """2 (1 - epsilon)^floor(n / n0) for a whole-space certificate."""
    if not cert.whole_space:
        raise BoundError(
            "certificate covers a proper subset; use rosenthal_bound with a drift function"
        )
    if not cert:
        raise BoundError("certificate has epsilon = 0")
    return 2.0 * (1.0 - cert.epsilon) ** (n // cert.n0)


def doeblin_curve(chain: LatticeChain, cert: DoeblinCertificate, n_max: int, starts=None) -> BoundCurve:
    """Doeblin bound next to the worst exact TV over ``starts`` (all states by default)."""
    pi = kernel.stationary(chain)
    space = chain.space
    idx = np.arange(space.size) if starts is None else np.array([space.index(s) for s in starts])
    arr = np.zeros((len(idx), space.size))
    arr[np.arange(len(idx)), idx] = 1.0
    arr = arr.reshape((len(idx),) + space.shape)
    rows = []
    for n in range(n_max + 1):
        if n:
            arr = chain.push(arr)
        tv = float(kernel.tv_rows(arr, pi).max())
        rows.append((n, doeblin_bound(cert, n), tv))
    prov = {"theorem": "doeblin", "n0": cert.n0, "epsilon": cert.epsilon}
    return BoundCurve(tuple(rows), prov)


# ---------------------------------------------------------------------------
# Lyapunov drift


@dataclass(frozen=True)
class LyapunovCertificate:
    """``PV <= alpha V + beta`` on ``region``.

    ``center`` lists the states where ``PV > alpha V``, i.e. where the additive
    constant is actually used.
    """

    V: tuple
    alpha: float
    beta: float
    region: tuple
    center: tuple = ()

    def verify(self, chain: LatticeChain, tol: float = 1e-10) -> bool:
        V = np.asarray(self.V, dtype=float)
        PV = kernel.function_power(chain, V, 1).reshape(-1)
        idx = np.asarray(self.region, dtype=np.int64)
        return bool(np.all(PV[idx] <= self.alpha * V[idx] + self.beta + tol))

    def to_dict(self) -> dict:
        return {
            "V": list(self.V),
            "alpha": self.alpha,
            "beta": self.beta,
            "region": list(self.region),
            "center": list(self.center),
        }

    @classmethod
    def from_dict(cls, d) -> LyapunovCertificate:
        return cls(tuple(d["V"]), d["alpha"], d["beta"], tuple(d["region"]), tuple(d["center"]))


def _as_function(chain, V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.size != chain.space.size:
        raise BoundError(f"function has {V.size} values, chain has {chain.space.size} states")
    return V.reshape(-1)


def verify_lyapunov(chain: LatticeChain, V, alpha: float, center=None, tol: float = 1e-12) -> LyapunovCertificate:
    """Certify ``PV <= alpha V + beta`` with the least admissible beta.

    Without ``center`` the constant is ``beta = max_x (PV - alpha V)^+`` over all
    states, which is always finite on a finite chain.  With ``center`` (flat
    indices) the contraction ``PV <= alpha V`` must hold outside it and beta
    is taken over the center only; a violation raises :class:`DriftError`
    naming the state.
    """
    if not 0 < alpha < 1:
        raise BoundError(f"alpha must lie in (0, 1), got {alpha}")
    V = _as_function(chain, V)
    if np.any(V < 1):
        bad = int(np.argmin(V))
        raise BoundError(f"V must be >= 1 everywhere; V[{bad}] = {V[bad]}")
    PV = kernel.function_power(chain, V, 1).reshape(-1)
    excess = PV - alpha * V
    if center is None:
        inside = np.ones(V.size, dtype=bool)
    else:
        inside = np.zeros(V.size, dtype=bool)
        inside[[chain.space.index(c) for c in center]] = True
        outside = np.flatnonzero(~inside & (excess > tol * np.maximum(V, 1.0)))
        if outside.size:
            w = int(outside[np.argmax(excess[outside] / V[outside])])
            raise DriftError(
                f"PV > alpha V at state {w} outside the center "
                f"(PV/V = {PV[w] / V[w]:.6g} > alpha = {alpha})",
                witness=w,
                excess=float(excess[w]),
            )
    beta = max(float(excess[inside].max()), 0.0)
    return LyapunovCertificate(
        tuple(float(x) for x in V),
        float(alpha),
        beta,
        tuple(range(V.size)),
        tuple(int(i) for i in np.flatnonzero(excess > tol * np.maximum(V, 1.0))),
    )


def build_lyapunov_from_power(chain: LatticeChain, Vprime, n0: int, alpha: float, beta: float | None = None):
    """One-step drift function from a function contracted only by P^{n0}.

    V = sum_{k<n0} alpha^{(n0-1-k)/n0} P^k V', which satisfies
    PV <= alpha^{1/n0} V + beta whenever P^{n0} V' <= alpha V' + beta.
    Returns ``(V, beta)``; beta is computed when not supplied.
    """
    if n0 < 1:
        raise BoundError("n0 must be at least 1")
    if not 0 < alpha < 1:
        raise BoundError(f"alpha must lie in (0, 1), got {alpha}")
    Vp = _as_function(chain, Vprime)
    if np.any(Vp < 1):
        raise BoundError("V' must be >= 1 everywhere")
    powers = [Vp]
    for _ in range(n0):
        powers.append(chain.pull(powers[-1].reshape(chain.space.shape)).reshape(-1))
    excess = powers[n0] - alpha * Vp
    if beta is None:
        beta = max(float(excess.max()), 0.0)
    else:
        bad = np.flatnonzero(excess > beta + 1e-12 * np.maximum(Vp, 1.0))
        if bad.size:
            w = int(bad[0])
            raise DriftError(
                f"P^{n0} V' <= alpha V' + beta fails at state {w} "
                f"(excess {excess[w]:.6g} > beta = {beta})",
                witness=w,
                excess=float(excess[w]),
            )
    V = sum(alpha ** ((n0 - 1 - k) / n0) * powers[k] for k in range(n0))
    rate = alpha ** (1.0 / n0)
    PV = chain.pull(V.reshape(chain.space.shape)).reshape(-1)
    slack = PV - (rate * V + beta)
    if np.any(slack > 1e-10 * np.maximum(V, 1.0)):
        w = int(np.argmax(slack))
        raise DriftError(f"constructed V violates its drift bound at state {w}", witness=w)
    return V, float(beta)


# ---------------------------------------------------------------------------
# Rosenthal drift-and-minorization


class RosenthalConstants(NamedTuple):
    alpha_bar: float
    R: float


def rosenthal_constants(alpha: float, beta: float, d: float) -> RosenthalConstants:
    """Product-chain contraction rate and return constant for the sublevel set {V <= d}."""
    if not 0 < alpha < 1:
        raise BoundError(f"alpha must lie in (0, 1), got {alpha}")
    if beta < 0:
        raise BoundError("beta must be nonnegative")
    threshold = 2 * beta / (1 - alpha)
    if not d > threshold:
        raise BoundError(f"d = {d} is inadmissible: need d > 2 beta / (1 - alpha) = {threshold}")
    alpha_bar = (1 + alpha * d + 2 * beta) / (1 + d)
    R = 1 + 2 * (alpha * d + beta / (1 - alpha))
    return RosenthalConstants(alpha_bar, R)


def sublevel_set(V, d: float) -> tuple[int, ...]:
    V = np.asarray(V, dtype=float).reshape(-1)
    return tuple(int(i) for i in np.flatnonzero(V <= d))


def _check_rosenthal_inputs(cert, lyap, d):
    if not cert:
        raise BoundError("minorization certificate has epsilon = 0")
    expected = sublevel_set(lyap.V, d)
    got = tuple(range(len(lyap.V))) if cert.whole_space else cert.set_A
    if tuple(got) != expected:
        raise BoundError(f"certificate set does not equal the sublevel set {{V <= {d}}}")


def rosenthal_bound(
    cert: DoeblinCertificate,
    lyap: LyapunovCertificate,
    d: float,
    nu_V_integral: float,
    j: int,
    n: int,
) -> float:
    """2(1-eps)^floor(j/n0) + 2 abar^(n - j n0 + 1) R^(j-1) (1 + nu(V) + beta/(1-alpha))."""
    _check_rosenthal_inputs(cert, lyap, d)
    if j < 1:
        raise BoundError("j must be at least 1")
    if j * cert.n0 > n + 1:
        raise BoundError(f"j * n0 = {j * cert.n0} exceeds n + 1 = {n + 1}")
    abar, R = rosenthal_constants(lyap.alpha, lyap.beta, d)
    h_int = 1 + nu_V_integral + lyap.beta / (1 - lyap.alpha)
    first = 2 * (1 - cert.epsilon) ** (j // cert.n0)
    # log form keeps R^(j-1) from overflowing
    log_second = math.log(2 * h_int) + (n - j * cert.n0 + 1) * math.log(abar) + (j - 1) * math.log(R)
    return first + (math.exp(log_second) if log_second < 700 else math.inf)


def best_rosenthal_bound(cert, lyap, d, nu_V_integral, n) -> tuple[float, int]:
    """Minimum over admissible j of :func:`rosenthal_bound`; returns (bound, j)."""
    j_max = (n + 1) // cert.n0
    if j_max < 1:
        return 2.0, 0  # no admissible j yet; TV never exceeds 2
    best = (math.inf, 1)
    for j in range(1, j_max + 1):
        b = rosenthal_bound(cert, lyap, d, nu_V_integral, j, n)
        if b < best[0]:
            best = (b, j)
    return best


def rosenthal_curve(chain, cert, lyap, d, n_max, starts=None) -> BoundCurve:
    """Best-j Rosenthal bound against the exact TV to stationarity.

    For each n the row keeps the smallest slack over the starts, i.e. it
    records the start whose empirical TV comes closest to its own bound.
    """
    pi = kernel.stationary(chain)
    space = chain.space
    idx = np.arange(space.size) if starts is None else np.array([space.index(s) for s in starts])
    V = np.asarray(lyap.V)
    arr = np.zeros((len(idx), space.size))
    arr[np.arange(len(idx)), idx] = 1.0
    arr = arr.reshape((len(idx),) + space.shape)
    rows, js = [], []
    for n in range(n_max + 1):
        if n:
            arr = chain.push(arr)
        tvs = kernel.tv_rows(arr, pi)
        pairs = []
        for i, x in enumerate(idx):
            b, j = best_rosenthal_bound(cert, lyap, d, float(V[x]), n)
            pairs.append((b, j, tvs[i]))
        b, j, tv = min(pairs, key=lambda p: p[0] - p[2])
        rows.append((n, float(b), float(tv)))
        js.append(j)
    abar, R = rosenthal_constants(lyap.alpha, lyap.beta, d)
    prov = {
        "theorem": "rate",
        "n0": cert.n0,
        "epsilon": cert.epsilon,
        "alpha": lyap.alpha,
        "beta": lyap.beta,
        "d": d,
        "alpha_bar": abar,
        "R": R,
        "best_j": js,
    }
    return BoundCurve(tuple(rows), prov)


# ---------------------------------------------------------------------------
# Chebyshev / Carne


def chebyshev_weights(n: int) -> dict:
    """Weights with x^n = sum_k alpha_{k,n} T_k(x).

    Exact Fractions for n <= 64, floats beyond.  Entries with n - k odd are 0.
    """
    if n < 0:
        raise BoundError("n must be nonnegative")
    exact = n <= EXACT_WEIGHTS_MAX_N
    out = {}
    for k in range(n + 1):
        if (n - k) % 2:
            out[k] = Fraction(0) if exact else 0.0
            continue
        c = math.comb(n, (n + k) // 2)
        w = Fraction(c, 2**n) if k == 0 else Fraction(c, 2 ** (n - 1))
        out[k] = w if exact else float(w)
    return out


def chebyshev_operators(P: np.ndarray, n: int) -> list[np.ndarray]:
    """Q_0(P), ..., Q_n(P) via Q_{k+1} = 2 P Q_k - Q_{k-1}."""
    P = np.asarray(P, dtype=float)
    Q = [np.eye(P.shape[0]), P.copy()]
    for _ in range(1, n):
        Q.append(2 * P @ Q[-1] - Q[-2])
    return Q[: n + 1]


def chebyshev_reconstruct(P, n: int) -> np.ndarray:
    w = chebyshev_weights(n)
    Q = chebyshev_operators(P, n)
    return sum(float(w[k]) * Q[k] for k in range(n + 1))


def escape_tail(n: int, ell: int) -> tuple[float, float]:
    """Mass of the weights with k >= ell, and the Gaussian majorant 2 exp(-ell^2 / 2n)."""
    if not 1 <= ell <= n:
        raise BoundError(f"need 1 <= ell <= n, got ell={ell}, n={n}")
    w = chebyshev_weights(n)
    tail = sum((w[k] for k in range(ell, n + 1)), type(w[n])(0))
    majorant = 2 * math.exp(-(ell**2) / (2 * n))
    tail = float(tail)
    if tail > majorant:
        raise BoundError(f"escape estimate violated at n={n}, ell={ell}")
    return tail, majorant


def carne_ell(n: int, ball_next: int, mass_A: int) -> int:
    """Least integer ell with ell >= sqrt(n log(16 |V^{n+1}| / |A|))."""
    x = n * math.log(16 * ball_next / mass_A)
    ell = math.isqrt(max(int(math.floor(x)), 0))
    while ell * ell < x:
        ell += 1
    while ell > 0 and (ell - 1) ** 2 >= x:
        ell -= 1
    return max(ell, 1)


@dataclass(frozen=True)
class CarneReport:
    n: int
    ell: int
    lhs: float
    rhs: float
    ball_next: int
    ball_ell: int
    escaped: float = 0.0

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ell": self.ell,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ball_next": self.ball_next,
            "ball_ell": self.ball_ell,
            "escaped": self.escaped,
            "holds": self.holds,
        }

    @classmethod
    def from_dict(cls, d) -> CarneReport:
        return cls(d["n"], d["ell"], d["lhs"], d["rhs"], d["ball_next"], d["ball_ell"], d["escaped"])


def _carne_setup(model: CoverModel, A):
    if not model.is_symmetric():
        raise ModelError("Carne bound needs a symmetric step law")
    V = {tuple(p) for p in model.symmetric_neighborhood()}
    pts = [tuple(int(x) for x in np.atleast_1d(a)) for a in A]
    outside = [p for p in pts if p not in V]
    if outside:
        raise ModelError(f"points {outside} of A are not in V.0")
    return sorted(set(pts))


def carne_series(model: CoverModel, A, n_max: int) -> list[CarneReport]:
    """Carne reports for n = 1..n_max from a single exact window evolution."""
    pts = _carne_setup(model, A)
    reach = max(model.reach, 1)
    r_A = max(max(abs(x) for x in p) for p in pts)
    radius = 2 * n_max * reach + r_A + 1
    chain = kernel.window_chain(model, radius)
    ind = kernel.from_points(chain.space, [(p, 1.0) for p in pts]).values
    # balls up to the largest ell we could need: ell <= n whenever the bound is informative
    sizes = ball_sizes(model, n_max + 1)
    reports = []
    arr = ind.copy()
    for step in range(1, 2 * n_max + 1):
        arr = chain.push(arr)
        if step % 2:
            continue
        n = step // 2
        lhs = float((arr * ind).sum())
        escaped = len(pts) - float(arr.sum())
        if escaped <= kernel.MASS_TOL * len(pts):
            escaped = 0.0  # summation residue, the window always contains the 2n-ball
        ball_next = sizes[n]  # |V^{n+1}|
        ell = carne_ell(n, ball_next, len(pts))
        if ell > len(sizes):
            sizes = ball_sizes(model, ell)
        ball_ell = sizes[ell - 1]
        rhs = len(pts) ** 2 / (4 * ball_ell)
        reports.append(CarneReport(n, ell, lhs, rhs, ball_next, ball_ell, max(escaped, 0.0)))
    return reports


def carne_check(model: CoverModel, A, n: int) -> CarneReport:
    """<P^{2n} 1_A, 1_A> against |A|^2 / (4 |V^ell|) with the least admissible ell."""
    if n < 1:
        raise BoundError("n must be at least 1")
    rep = carne_series(model, A, n)[-1]
    if rep.escaped > 0:
        raise BoundError("window was too small: mass escaped")
    if not rep.holds:
        raise BoundError(f"Carne inequality violated at n={n}: {rep.lhs} < {rep.rhs}")
    return rep
