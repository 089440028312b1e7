"""Exponents of joint (ML permutation) decoding over symmetric channels.

Everything is expressed through the Bhattacharyya matrix
``B(x,x') = sum_y sqrt(W(y|x) W(y|x'))`` and the two moment functions

    Xi(sigma)    = sum P(x)P(x') B(x,x')**(2/sigma)
    Omega(sigma) = sum P(x)P(x') B(x,x')**(1/sigma)

Rates and exponents are in nats unless a function says otherwise; the
Gilbert-Varshamov helpers work in bits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .info import is_symmetric

LN2 = math.log(2.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class HypothesisError(ValueError):
    """The channel or input violates the assumptions behind an optimal-decoding bound."""


@dataclass(frozen=True, eq=False)
class BhattacharyyaMatrix:
    b: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("Bhattacharyya matrix must be square")
        if np.any(b < -1e-12) or np.any(b > 1 + 1e-12):
            raise ValueError("entries must lie in [0, 1]")
        if not np.allclose(b, b.T, atol=1e-12, rtol=0):
            raise ValueError("Bhattacharyya matrix must be symmetric")
        b = np.clip(b, 0.0, 1.0)
        np.fill_diagonal(b, 1.0)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    def __array__(self, dtype=None, copy=None):
        return self.b if dtype is None else self.b.astype(dtype)


def bhattacharyya_matrix(W) -> BhattacharyyaMatrix:
    s = np.sqrt(np.asarray(W, dtype=float))
    return BhattacharyyaMatrix(s @ s.T)


def _pp(p_x):
    p = np.asarray(p_x, dtype=float)
    return np.outer(p, p)


def _moment(sigma, p_x, B, power):
    b = np.asarray(B, dtype=float)
    with np.errstate(divide="ignore"):
        terms = np.where(b > 0, b ** (power / sigma), 0.0)
    return float(np.sum(_pp(p_x) * terms))


def xi(sigma: float, p_x, B) -> float:
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    return _moment(sigma, p_x, B, 2.0)


def omega(sigma: float, p_x, B) -> float:
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    return _moment(sigma, p_x, B, 1.0)


def upsilon(sigma: float, p_x, B) -> float:
    """``min{-log(Xi)/2, -2 log(Omega)/3}`` at ``sigma``."""
    return min(-0.5 * math.log(xi(sigma, p_x, B)), -2.0 / 3.0 * math.log(omega(sigma, p_x, B)))


# ---------------------------------------------------------------------------
# queries


@dataclass(frozen=True)
class OptExponentQuery:
    rate: float
    p_x: tuple
    channel: tuple
    sigma_max: float = 1e4
    sigma_grid_points: int = 200
    enforce_hypotheses: bool = True
    _B: BhattacharyyaMatrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if self.sigma_max < 1 or self.sigma_grid_points < 2:
            raise ValueError("need sigma_max >= 1 and at least two sigma grid points")
        W = np.asarray(self.channel, dtype=float)
        p = np.asarray(self.p_x, dtype=float)
        object.__setattr__(self, "channel", tuple(map(tuple, W.tolist())))
        object.__setattr__(self, "p_x", tuple(p.tolist()))
        if not is_symmetric(W, tol=1e-9):
            msg = "channel is not symmetric (rows or columns are not permutations of one another)"
            if self.enforce_hypotheses:
                raise HypothesisError(msg)
            warnings.warn("theorem hypotheses not met: " + msg, RuntimeWarning, stacklevel=3)
        if not np.allclose(p, 1.0 / p.size, atol=1e-12):
            warnings.warn("theorem hypotheses not met: input distribution is not uniform",
                          RuntimeWarning, stacklevel=3)
        object.__setattr__(self, "_B", bhattacharyya_matrix(W))

    @classmethod
    def bsc(cls, p: float, rate: float = 0.0, **kw) -> "OptExponentQuery":
        return cls(rate=rate, p_x=(0.5, 0.5), channel=((1 - p, p), (p, 1 - p)), **kw)

    @property
    def B(self) -> BhattacharyyaMatrix:
        return self._B

    def with_rate(self, rate: float) -> "OptExponentQuery":
        return replace(self, rate=rate)


# ---------------------------------------------------------------------------
# random coding


def _sigma_objective(sigma, R, p_x, B):
    return sigma * min(-math.log(xi(sigma, p_x, B)) - 2 * R,
                       -2 * math.log(omega(sigma, p_x, B)) - 3 * R)


def exponent_opt_rc(query: OptExponentQuery) -> float:
    """``[min{-log Xi(1) - 2R, -2 log Omega(1) - 3R}]_+`` in nats."""
    return max(_sigma_objective(1.0, query.rate, query.p_x, query.B), 0.0)


def _bsc_moments(p):
    return 0.5 + 2 * p * (1 - p), 0.5 + math.sqrt(p * (1 - p))


def bsc_rate_break(p: float, units: str = "nats") -> float:
    """Rate where the two terms of the random-coding minimum cross: ``log(Xi(1)/Omega(1)^2)``."""
    x, o = _bsc_moments(p)
    r = math.log(x / o**2)
    return r / LN2 if units == "bits" else r


def bsc_critical_p(tolerance: float = 1e-10) -> float:
    """Crossover ``p`` solving ``3 log Xi(1) = 4 log Omega(1)`` by bisection on ``(0, 1/2)``."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")

    def f(p):
        x, o = _bsc_moments(p)
        return 3 * math.log(x) - 4 * math.log(o)

    lo, hi = 1e-9, 0.49
    f_lo = f(lo)
    if f_lo * f(hi) > 0:
        raise RuntimeError("crossover is not bracketed")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (f_lo > 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# expurgated


@dataclass(frozen=True)
class SigmaSupremum:
    value: float          # clipped supremum, nats
    sigma: float          # maximizer (inf for the analytic rate-zero limit)
    bracket_width: float  # width of the final golden-section interval (0 when attained at an end)
    finite_sigma_value: float  # best value over finite sigma, before the limit candidate


def _golden_max(f, a, b, tol=1e-10, max_iter=200):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(c)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc, b - a
    return d, fd, b - a


def zero_rate_limit(p_x, B) -> float:
    """``-2 sum P(x)P(x') log B(x,x')``, the large-sigma limit at rate zero (``inf`` if some B vanishes)."""
    b = np.asarray(B, dtype=float)
    w = _pp(p_x)
    if np.any((b <= 0) & (w > 0)):
        return math.inf
    return float(-2.0 * np.sum(w * np.log(np.where(b > 0, b, 1.0))))


def exponent_opt_ex_detail(query: OptExponentQuery) -> SigmaSupremum:
    """Supremum over sigma with the maximizer and the width of the refinement bracket."""
    R = query.rate
    f = lambda s: _sigma_objective(s, R, query.p_x, query.B)  # noqa: E731
    grid = np.geomspace(1.0, query.sigma_max, query.sigma_grid_points)
    vals = np.array([f(s) for s in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    s_best, v_best, width = _golden_max(f, lo, hi)
    if vals[i] > v_best:
        s_best, v_best, width = grid[i], vals[i], 0.0
    finite = v_best
    if R == 0:
        lim = zero_rate_limit(query.p_x, query.B)
        if lim >= v_best:
            s_best, v_best, width = math.inf, lim, 0.0
    return SigmaSupremum(max(v_best, 0.0), s_best, width, finite)


def exponent_opt_ex(query: OptExponentQuery) -> float:
    """``sup_{sigma >= 1} sigma * min{-log Xi(sigma) - 2R, -2 log Omega(sigma) - 3R}``, clipped at 0 (nats)."""
    return exponent_opt_ex_detail(query).value


# ---------------------------------------------------------------------------
# Gilbert-Varshamov comparison (bits)


def h2(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def gv_distance(two_r: float, tol: float = 1e-12) -> float:
    """``delta`` in ``[0, 1/2]`` with ``h2(delta) = 1 - two_r`` (bits)."""
    if not 0.0 <= two_r <= 1.0:
        raise ValueError(f"argument must lie in [0, 1], got {two_r}")
    if two_r == 0.0:
        return 0.5
    if two_r == 1.0:
        return 0.0
    # h2 is flat near 1/2, so small two_r is resolved only to about sqrt(machine eps)
    target = 1.0 - two_r
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h2(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def r_trc(p: float) -> float:
    """Upper end (bits) of the rate window where the Gilbert-Varshamov based exponent applies."""
    z = math.sqrt(4 * p * (1 - p))
    return 0.5 * (1.0 - h2(z / (1.0 + z)))


def exponent_tan(R: float, p: float) -> tuple[float, bool]:
    """Typical-code exponent ``-delta_GV(2R) log2(4p(1-p))`` for the BSC, in bits.

    ``R`` is in bits.  The flag says whether ``R < r_trc(p)``, where the
    bound is valid; outside that window the value is still returned.
    """
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    two_r = min(max(2.0 * R, 0.0), 1.0)
    value = -gv_distance(two_r) * math.log2(4 * p * (1 - p))
    return value, R < r_trc(p)


# ---------------------------------------------------------------------------
# chain identity


def lemma1_check(W, k: int, sigma: float, p_x=None) -> tuple[float, float]:
    """Exact ``E[(prod_i B(X_i, X_{i+1}))^(1/sigma)]`` over i.i.d. inputs, and ``Omega(sigma)^(k-1)``.

    The expectation is computed by full enumeration of ``X^k``.
    """
    B = np.asarray(bhattacharyya_matrix(W), dtype=float)
    nx = B.shape[0]
    p = np.full(nx, 1.0 / nx) if p_x is None else np.asarray(p_x, dtype=float)
    if k < 2:
        raise ValueError("k must be at least 2")
    if nx**k > 10**7:
        raise ValueError(f"|X|^k = {nx}^{k} exceeds the enumeration limit 1e7")
    Bs = B ** (1.0 / sigma)
    seqs = np.indices((nx,) * k).reshape(k, -1)
    prob = np.prod(p[seqs], axis=0)
    chain = np.prod(Bs[seqs[:-1], seqs[1:]], axis=0)
    lhs = float(np.sum(prob * chain))
    rhs = omega(sigma, p, B) ** (k - 1)
    return lhs, rhs
