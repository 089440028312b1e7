"""Error exponents of naive (per-bee GLD) decoding over a general DMC.

Every exponent is a nested min/max over conditional distributions and is
evaluated by exhaustive grid search followed by local refinement around the
incumbent.  The search spaces are

* outer: ``Q_{X'|X}`` with ``Q_{X'} = Q_X`` (step ``outer_resolution``),
* inner: ``Q_{Y|XX'}`` for the functionals Gamma and Lambda
  (step ``inner_resolution``),
* the families ``{Q_{X~|Y}: Q_{X~} = Q_X}`` behind alpha and beta, which are
  tabulated once per rate on a ``Q_Y`` grid of step ``qy_cache_resolution``
  and interpolated inside the inner loops.

Grid minima approximate true minima from above (and grid maxima from
below).  All values are in nats.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .info import batch_mutual_information, xlogy_ratio
from .simplex import SimplexInterpolator, constrained_family, simplex_grid
from .table import CurveTable

log = logging.getLogger(__name__)

FEAS_TOL = 1e-12
EXPONENTS = ("rc_upper", "rc_lower", "trc", "ex")


# ---------------------------------------------------------------------------
# query types


@dataclass(frozen=True)
class SolverSettings:
    """Grid steps and refinement depth of the nested searches.

    ``max_grid_points`` caps the exhaustive inner product grid; when the
    requested ``inner_resolution`` would exceed it the exhaustive phase runs
    on the finest coarser grid that fits, and refinement starts from there.
    """

    outer_resolution: float = 1 / 100
    inner_resolution: float = 1 / 50
    refinement_rounds: int = 3
    qy_cache_resolution: float = 1 / 200
    max_grid_points: int = 250_000

    def __post_init__(self):
        for name in ("outer_resolution", "inner_resolution", "qy_cache_resolution"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be >= 0")

    @classmethod
    def for_alphabets(cls, x_size: int, y_size: int) -> "SolverSettings":
        if x_size * y_size <= 4:
            return cls()
        warnings.warn(
            f"|X|*|Y| = {x_size * y_size}: using coarse default grids",
            RuntimeWarning,
            stacklevel=2,
        )
        return cls(
            outer_resolution=1 / 5,
            inner_resolution=1 / 2,
            refinement_rounds=2,
            qy_cache_resolution=1 / 10,
            max_grid_points=20_000,
        )

    def tolerance(self, L: int = 1) -> float:
        """Combined discretization allowance for an exponent carrying a factor ``L``.

        Sum of the final (refined) outer and inner steps and the alpha/beta
        cache step, scaled by ``L``.
        """
        shrink = 2.0 ** self.refinement_rounds
        per_unit = (self.outer_resolution + self.inner_resolution) / shrink + self.qy_cache_resolution
        return L * per_unit


class DecodingMetric:
    """Decoding metric ``g`` of a joint empirical distribution.

    Calling the metric on an array of shape ``(..., |X|, |Y|)`` evaluates it
    on every trailing joint.  The ML metric is ``E_Q log W(Y|X)`` and is
    ``-inf`` exactly when the joint charges a zero of ``W``; the MMI metric
    is the empirical mutual information.

    ``scale`` multiplies the metric.  Large scales approach the deterministic
    decoder that maximizes it; ``scale=1`` is the plain stochastic rule.
    """

    def __init__(self, kind: str, channel=None, func: Callable | None = None, batched: bool = False,
                 scale: float = 1.0):
        if kind not in ("ml", "mmi", "custom"):
            raise ValueError(f"unknown metric kind {kind!r}")
        if not scale > 0:
            raise ValueError("metric scale must be positive")
        self.kind = kind
        self.scale = float(scale)
        self.channel = None if channel is None else np.asarray(channel, dtype=float)
        self._func = func
        self._batched = batched
        if kind == "ml":
            if self.channel is None:
                raise ValueError("the ML metric needs a channel")
            with np.errstate(divide="ignore"):
                self._log_w = self.scale * np.log(self.channel)

    @classmethod
    def ml(cls, channel, scale: float = 1.0) -> "DecodingMetric":
        return cls("ml", channel=channel, scale=scale)

    @classmethod
    def mmi(cls, scale: float = 1.0) -> "DecodingMetric":
        return cls("mmi", scale=scale)

    @classmethod
    def custom(cls, func: Callable, batched: bool = False) -> "DecodingMetric":
        """Wrap ``func(joint) -> float``; with ``batched=True`` it must accept stacks."""
        return cls("custom", func=func, batched=batched)

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind == "ml":
            terms = np.where(q > 0, q * np.where(q > 0, self._log_w, 0.0), 0.0)
            bad = np.any((q > 0) & np.isneginf(self._log_w), axis=(-2, -1))
            return np.where(bad, -np.inf, terms.sum(axis=(-2, -1)))
        if self.kind == "mmi":
            return self.scale * batch_mutual_information(q)
        if self._batched:
            return self.scale * np.asarray(self._func(q), dtype=float)
        flat = q.reshape(-1, *q.shape[-2:])
        out = np.array([float(self._func(j)) for j in flat])
        return self.scale * out.reshape(q.shape[:-2])

    def key(self):
        if self.kind == "ml":
            return ("ml", self.channel.tobytes(), self.channel.shape, self.scale)
        if self.kind == "mmi":
            return ("mmi", self.scale)
        return ("custom", id(self._func), self.scale)

    def __repr__(self):
        extra = "" if self.scale == 1.0 else f", scale={self.scale!r}"
        return f"DecodingMetric({self.kind!r}{extra})"


@dataclass(frozen=True)
class NaiveExponentQuery:
    rate: float
    L: int
    q_x: Sequence[float]
    metric: DecodingMetric
    channel: Sequence[Sequence[float]]
    solver: SolverSettings | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("L must be a positive integer")

    def with_rate(self, rate: float) -> "NaiveExponentQuery":
        return replace(self, rate=rate)

    def with_L(self, L: int) -> "NaiveExponentQuery":
        return replace(self, L=L)


# ---------------------------------------------------------------------------
# local refinement


def _moves(k: int) -> np.ndarray:
    """Zero-sum integer move vectors with entries in [-2, 2], excluding 0."""
    vs = [v for v in itertools.product(range(-2, 3), repeat=k) if sum(v) == 0 and any(v)]
    return np.array(vs, dtype=float).reshape(-1, k)


def _refine(state, movable, objective, step0, rounds, rebuild=None, pairs=True):
    """Minimize ``objective`` by single- and pair-row moves around ``state``.

    ``state`` is a stack of probability rows; only rows in ``movable`` are
    moved.  ``rebuild(cands) -> (cands, valid)`` restores any rows tied to the
    moved ones by constraints.  The step halves each round.
    """
    state = np.array(state, dtype=float)
    best = float(objective(state[None])[0])
    if rounds == 0 or not movable:
        return state, best
    k = state.shape[1]
    base_moves = _moves(k)
    for r in range(1, rounds + 1):
        moves = base_moves * (step0 / 2**r)
        for _ in range(60):
            cands = []
            for i in movable:
                c = np.repeat(state[None], len(moves), axis=0)
                c[:, i, :] += moves
                cands.append(c)
            if pairs:
                for i, j in itertools.combinations(movable, 2):
                    c = np.repeat(state[None], len(moves) ** 2, axis=0)
                    c[:, i, :] += np.repeat(moves, len(moves), axis=0)
                    c[:, j, :] += np.tile(moves, (len(moves), 1))
                    cands.append(c)
            cands = np.concatenate(cands)
            valid = np.all(cands >= -1e-12, axis=(1, 2))
            cands = np.clip(cands, 0.0, None)
            if rebuild is not None:
                cands, ok = rebuild(cands)
                valid &= ok
            if not valid.any():
                break
            cands = cands[valid]
            vals = objective(cands)
            i_best = int(np.argmin(vals))
            if vals[i_best] < best - 1e-15:
                best = float(vals[i_best])
                state = cands[i_best]
            else:
                break
    return state, best


def _support_points(points: np.ndarray, row: np.ndarray) -> np.ndarray:
    keep = np.all((points == 0) | (row > 0), axis=1)
    return points[keep]


def _grid_steps(resolution: float) -> int:
    return round(1.0 / resolution)


# ---------------------------------------------------------------------------
# the solver


@dataclass
class _RateState:
    alpha: SimplexInterpolator
    beta: SimplexInterpolator
    points: dict = field(default_factory=dict)   # outer key -> (V, I, gamma, lambda)
    lfree: dict = field(default_factory=dict)    # name -> set of keys from L-free refinements


class NaiveSolver:
    """Evaluates the naive-decoding exponents for one ``(W, Q_X, g, settings)``.

    Results are memoized by rate; instances are meant to be reused across
    rates and thresholds ``L``.
    """

    def __init__(self, channel, q_x, metric: DecodingMetric, settings: SolverSettings | None = None):
        self.W = np.asarray(channel, dtype=float)
        self.q_x = np.asarray(q_x, dtype=float)
        self.nx, self.ny = self.W.shape
        if self.q_x.size != self.nx:
            raise ValueError("composition and channel input alphabet differ")
        self.metric = metric
        self.settings = settings or SolverSettings.for_alphabets(self.nx, self.ny)
        s = self.settings
        self._outer = constrained_family(self.q_x, self.q_x, simplex_grid(self.nx, s.outer_resolution))
        self._family_pts = simplex_grid(self.nx, s.inner_resolution)
        self._rates: dict[float, _RateState] = {}
        self._inner_pts: dict[int, np.ndarray] = {}

    # -- alpha / beta --------------------------------------------------------

    def _ab_values(self, R, q_y, fam):
        joint = np.swapaxes(q_y[None, :, None] * fam, 1, 2)
        g = self.metric(joint)
        mi = batch_mutual_information(joint)
        a = np.where(mi <= R + FEAS_TOL, g + R - mi, -np.inf)
        b = g + np.maximum(R - mi, 0.0)
        return a, b

    def alpha_beta(self, R: float, q_y) -> tuple[float, float]:
        """Grid maxima defining ``alpha(R, Q_Y)`` and ``beta(R, Q_Y)``."""
        q_y = np.asarray(q_y, dtype=float)
        fam = constrained_family(q_y, self.q_x, self._family_pts)
        a, b = self._ab_values(R, q_y, fam)
        solved = int(np.argmax(q_y))
        movable = [y for y in range(self.ny) if y != solved and q_y[y] > 0]

        def rebuild(c):
            acc = np.einsum("y,nyx->nx", np.where(np.arange(self.ny) == solved, 0.0, q_y), c)
            last = (self.q_x[None] - acc) / q_y[solved]
            ok = np.all(last >= -1e-12, axis=1)
            c[:, solved, :] = np.clip(last, 0.0, None)
            return c, ok

        step0 = self.settings.inner_resolution
        rounds = self.settings.refinement_rounds
        results = []
        for vals, col in ((a, 0), (b, 1)):
            i = int(np.argmax(vals))
            if not np.isfinite(vals[i]):
                results.append(float(vals[i]))
                continue
            _, best = _refine(
                fam[i], movable,
                lambda c, col=col: -self._ab_values(R, q_y, c)[col],
                step0, rounds, rebuild=rebuild,
            )
            results.append(-best)
        alpha, beta = results
        # the alpha maximizer is feasible for beta with at least the same value
        return alpha, max(beta, alpha)

    def _rate_state(self, R: float) -> _RateState:
        st = self._rates.get(R)
        if st is None:
            res = self.settings.qy_cache_resolution
            grid = simplex_grid(self.ny, res)
            ab = np.array([self.alpha_beta(R, q) for q in grid])
            st = _RateState(
                alpha=SimplexInterpolator(self.ny, res, ab[:, 0]),
                beta=SimplexInterpolator(self.ny, res, ab[:, 1]),
            )
            self._rates[R] = st
        return st

    # -- Gamma / Lambda -------------------------------------------------------

    def _inner_values(self, R, w, T, st):
        """Gamma and Lambda integrands at a stack ``T`` of ``Q_{Y|XX'}``, shape (N, X, X', Y)."""
        J = w[None, :, :, None] * T
        qxy = J.sum(axis=2)
        qxpy = J.sum(axis=1)
        qy = J.sum(axis=(1, 2))
        # D(Q_{Y|X}||W|Q_X) + I(X';Y|X) splits into per-cell divergences from W(.|x)
        cell_div = xlogy_ratio(T, self.W[None, :, None, :]).sum(axis=3)
        div = np.where(w[None] > 0, w[None] * cell_div, 0.0).sum(axis=(1, 2))
        g_xy = self.metric(qxy)
        g_xpy = self.metric(qxpy)
        i_xy = batch_mutual_information(qxy)
        i_xpy = batch_mutual_information(qxpy)
        # Q_XY and Q_X'Y are themselves members of the alpha/beta families
        alpha = np.maximum.reduce([
            st.alpha(qy),
            np.where(i_xy <= R + FEAS_TOL, g_xy + R - i_xy, -np.inf),
            np.where(i_xpy <= R + FEAS_TOL, g_xpy + R - i_xpy, -np.inf),
        ])
        beta = np.maximum.reduce([
            st.beta(qy),
            g_xy + np.maximum(R - i_xy, 0.0),
            g_xpy + np.maximum(R - i_xpy, 0.0),
            alpha,
        ])
        dead = np.isneginf(g_xpy) | np.isinf(div)
        with np.errstate(invalid="ignore"):
            # beta dominates both max(g_xy, alpha) and g_xpy, so with this grouping
            # lam >= gamma holds pointwise after rounding too
            gamma = div + np.maximum(np.maximum(g_xy, alpha) - g_xpy, 0.0)
            lam = div + (beta - g_xpy)
        gamma = np.where(dead, np.inf, gamma)
        lam = np.where(dead, np.inf, lam)
        return gamma, lam

    def _cell_points(self, w, steps):
        pts = self._inner_pts.get(steps)
        if pts is None:
            pts = self._inner_pts[steps] = simplex_grid(self.ny, 1.0 / steps)
        out = []
        for x in range(self.nx):
            for xp in range(self.nx):
                if w[x, xp] > 0:
                    out.append(_support_points(pts, self.W[x]))
                else:
                    out.append(self.W[x][None])
        return out

    def gamma_lambda(self, q_xx, R: float) -> tuple[float, float]:
        """``(Gamma(Q_XX', R), Lambda(Q_XX', R))`` by grid search plus refinement."""
        w = np.asarray(q_xx, dtype=float)
        st = self._rate_state(R)
        s = self.settings
        steps = _grid_steps(s.inner_resolution)
        cells = self._cell_points(w, steps)
        while steps > 1 and math.prod(len(c) for c in cells) > s.max_grid_points:
            steps -= 1
            cells = self._cell_points(w, steps)
        if steps != _grid_steps(s.inner_resolution):
            log.debug("inner grid coarsened to 1/%d", steps)
        sizes = [len(c) for c in cells]
        total = math.prod(sizes)

        start = np.broadcast_to(self.W[:, None, :], (self.nx, self.nx, self.ny))[None]
        best_g, best_l = self._inner_values(R, w, start, st)
        best_g, best_l = float(best_g[0]), float(best_l[0])
        arg_g = arg_l = start[0]
        chunk = 65536
        for lo in range(0, total, chunk):
            idx = np.unravel_index(np.arange(lo, min(total, lo + chunk)), sizes)
            T = np.stack([cells[c][idx[c]] for c in range(len(cells))], axis=1)
            T = T.reshape(-1, self.nx, self.nx, self.ny)
            g, l = self._inner_values(R, w, T, st)
            i = int(np.argmin(g))
            if g[i] < best_g:
                best_g, arg_g = float(g[i]), T[i]
            i = int(np.argmin(l))
            if l[i] < best_l:
                best_l, arg_l = float(l[i]), T[i]

        movable = [c for c in range(self.nx * self.nx) if w.flat[c] > 0]
        step0 = 1.0 / steps

        def objective(col):
            def f(c):
                return self._inner_values(R, w, c.reshape(-1, self.nx, self.nx, self.ny), st)[col]
            return f

        # pair moves grow quadratically in the number of cells; keep them for small problems
        pairs = len(movable) <= 4
        if np.isfinite(best_g):
            arg_g, best_g = _refine(arg_g.reshape(-1, self.ny), movable, objective(0), step0,
                                    s.refinement_rounds, pairs=pairs)
        if np.isfinite(best_l):
            arg_l, best_l = _refine(arg_l.reshape(-1, self.ny), movable, objective(1), step0,
                                    s.refinement_rounds, pairs=pairs)
        # Gamma's integrand never exceeds Lambda's at the same point; evaluate both
        # in one call so batch-dependent summation cannot split them by an ulp
        g_at_l, l_at_l = self._inner_values(R, w, np.asarray(arg_l).reshape(1, self.nx, self.nx, self.ny), st)
        return min(best_g, float(g_at_l[0])), float(l_at_l[0])

    # -- outer problem -------------------------------------------------------

    @staticmethod
    def _key(V):
        return tuple(np.round(np.asarray(V), 12).ravel().tolist())

    def _point(self, st, R, V):
        key = self._key(V)
        p = st.points.get(key)
        if p is None:
            joint = self.q_x[:, None] * V
            mi = float(batch_mutual_information(joint))
            gam, lam = self.gamma_lambda(joint, R)
            p = st.points[key] = (np.array(V), mi, gam, lam)
        return key, p

    @staticmethod
    def _objectives(R, L, mi, gam, lam):
        """Outer objectives at one coupling; the L-free ones are scaled by L later.

        All of them are built from the same ``core = Gamma - (2R - I)`` so
        that the orderings between exponents survive floating-point rounding.
        """
        gap = 2 * R - mi
        core = gam - gap
        ub = max(L * core, 0.0) if gap >= 0 else max(L * gam - gap, 0.0)
        lb = max(max(mi - R, 0.0), lam - gap)
        trc = max(core, 0.0) if mi <= 2 * R + FEAS_TOL else math.inf
        ex = max(core, 0.0) if mi <= R + FEAS_TOL else math.inf
        tilde = max(mi - 2 * R, 0.0) if max(gap, 0.0) >= gam else math.inf
        return {"rc_upper": ub, "rc_lower": lb, "trc": trc, "ex": ex, "tilde": tilde}

    def _outer_refine(self, st, R, L, name, start_key):
        V0 = st.points[start_key][0]
        solved = int(np.argmax(self.q_x))
        movable = [x for x in range(self.nx) if x != solved and self.q_x[x] > 0]
        visited = set()

        def rebuild(c):
            acc = np.einsum("x,nxy->ny", np.where(np.arange(self.nx) == solved, 0.0, self.q_x), c)
            last = (self.q_x[None] - acc) / self.q_x[solved]
            ok = np.all(last >= -1e-12, axis=1)
            c[:, solved, :] = np.clip(last, 0.0, None)
            return c, ok

        def objective(cands):
            out = np.empty(len(cands))
            for i, V in enumerate(cands):
                key, (_, mi, gam, lam) = self._point(st, R, V)
                visited.add(key)
                out[i] = self._objectives(R, L, mi, gam, lam)[name]
            return out

        _refine(V0, movable, objective, self.settings.outer_resolution,
                self.settings.refinement_rounds, rebuild=rebuild, pairs=False)
        return visited

    def evaluate(self, R: float, L: int = 1) -> dict[str, float]:
        """All naive exponents at ``(R, L)``.

        Keys: ``rc_upper``, ``rc_lower``, ``trc``, ``ex`` and ``tilde`` (the
        large-``L`` limit of ``rc_upper``; ``inf`` for an empty feasible set).
        The L-free objectives are minimized over one shared set of couplings,
        so the orderings between exponents hold exactly.
        """
        R = float(R)
        st = self._rate_state(R)
        grid_keys = [self._point(st, R, V)[0] for V in self._outer]

        def best_key(name, keys, L_):
            vals = [self._objectives(R, L_, *st.points[k][1:])[name] for k in keys]
            i = int(np.argmin(vals))
            return keys[i], vals[i]

        if not st.lfree:
            for name in ("rc_lower", "trc", "ex", "tilde"):
                k0, v0 = best_key(name, grid_keys, 1)
                st.lfree[name] = self._outer_refine(st, R, 1, name, k0) if np.isfinite(v0) else set()
        lfree_keys = list(dict.fromkeys(grid_keys + [k for s in st.lfree.values() for k in sorted(s)]))

        k0, v0 = best_key("rc_upper", lfree_keys, L)
        ub_keys = lfree_keys + sorted(self._outer_refine(st, R, L, "rc_upper", k0) - set(lfree_keys)) \
            if np.isfinite(v0) else lfree_keys

        def minimum(name, keys, L_):
            return min(self._objectives(R, L_, *st.points[k][1:])[name] for k in keys)

        return {
            "rc_upper": minimum("rc_upper", ub_keys, L),
            "rc_lower": L * minimum("rc_lower", lfree_keys, 1),
            "trc": L * minimum("trc", lfree_keys, 1),
            "ex": L * minimum("ex", lfree_keys, 1),
            "tilde": minimum("tilde", lfree_keys, 1),
        }

    # -- single-channel problems ---------------------------------------------

    def _channel_min(self, objective):
        s = self.settings
        pts = simplex_grid(self.ny, s.inner_resolution)
        rows = [_support_points(pts, self.W[x]) if self.q_x[x] > 0 else self.W[x][None]
                for x in range(self.nx)]
        sizes = [len(r) for r in rows]
        idx = np.unravel_index(np.arange(math.prod(sizes)), sizes)
        V = np.stack([rows[x][idx[x]] for x in range(self.nx)], axis=1)
        V = np.concatenate([self.W[None], V])
        vals = objective(V)
        i = int(np.argmin(vals))
        movable = [x for x in range(self.nx) if self.q_x[x] > 0]
        _, best = _refine(V[i], movable, objective, s.inner_resolution, s.refinement_rounds)
        return best

    def _div_mi(self, V):
        div = (self.q_x[None] * xlogy_ratio(V, self.W[None]).sum(axis=2)).sum(axis=1)
        mi = batch_mutual_information(self.q_x[None, :, None] * V)
        return div, mi

    def rc_ordinary(self, R: float) -> float:
        def f(V):
            div, mi = self._div_mi(V)
            return div + np.maximum(mi - R, 0.0)
        return self._channel_min(f)

    def rmax_lower_bound(self) -> float:
        def f(V):
            div, mi = self._div_mi(V)
            with np.errstate(invalid="ignore"):
                return np.where(np.isinf(div), np.inf, div + 0.5 * np.maximum(mi - div, 0.0))
        return self._channel_min(f)


# ---------------------------------------------------------------------------
# functional API

_SOLVERS: dict = {}


def solver_for(channel, q_x, metric: DecodingMetric, settings: SolverSettings | None = None) -> NaiveSolver:
    """Shared solver instance for one problem, so repeated queries reuse caches."""
    W = np.asarray(channel, dtype=float)
    qx = np.asarray(q_x, dtype=float)
    key = (W.tobytes(), W.shape, qx.tobytes(), metric.key(), settings)
    s = _SOLVERS.get(key)
    if s is None:
        if len(_SOLVERS) > 32:
            _SOLVERS.clear()
        s = _SOLVERS[key] = NaiveSolver(W, qx, metric, settings)
    return s


def _solver(query: NaiveExponentQuery) -> NaiveSolver:
    return solver_for(query.channel, query.q_x, query.metric, query.solver)


def alpha(R, q_y, q_x, g: DecodingMetric, channel=None, settings: SolverSettings | None = None) -> float:
    """Max of ``g(Q_{X~Y}) + R - I(X~;Y)`` over ``Q_{X~|Y}`` with ``Q_{X~} = Q_X`` and ``I <= R``."""
    W = _placeholder_channel(channel, g, q_x, q_y)
    return solver_for(W, q_x, g, settings).alpha_beta(R, q_y)[0]


def beta(R, q_y, q_x, g: DecodingMetric, channel=None, settings: SolverSettings | None = None) -> float:
    """Max of ``g(Q_{X~Y}) + [R - I(X~;Y)]_+`` over ``Q_{X~|Y}`` with ``Q_{X~} = Q_X``."""
    W = _placeholder_channel(channel, g, q_x, q_y)
    return solver_for(W, q_x, g, settings).alpha_beta(R, q_y)[1]


def _placeholder_channel(channel, g, q_x, q_y):
    # alpha and beta never touch W; any channel of the right shape will do
    if channel is not None:
        return channel
    if g.channel is not None:
        return g.channel
    return np.full((len(q_x), len(q_y)), 1.0 / len(q_y))


def big_gamma(q_xx, R, query: NaiveExponentQuery) -> float:
    return _solver(query).gamma_lambda(q_xx, R)[0]


def big_lambda(q_xx, R, query: NaiveExponentQuery) -> float:
    return _solver(query).gamma_lambda(q_xx, R)[1]


def exponent_rc_upper(query: NaiveExponentQuery) -> float:
    """``E_r^ub(R, L)``: the ensemble exponent is at least this value."""
    return _solver(query).evaluate(query.rate, query.L)["rc_upper"]


def exponent_rc_lower(query: NaiveExponentQuery) -> float:
    """``E_r^lb(R, L)``; despite the name this upper-bounds the ensemble exponent."""
    return _solver(query).evaluate(query.rate, query.L)["rc_lower"]


def exponent_trc(query: NaiveExponentQuery) -> float:
    return _solver(query).evaluate(query.rate, query.L)["trc"]


def exponent_ex(query: NaiveExponentQuery) -> float:
    return _solver(query).evaluate(query.rate, query.L)["ex"]


def exponent_rc_limit_L(query: NaiveExponentQuery) -> float:
    """Limit of ``E_r^ub(R, L)`` as ``L -> inf``; ``inf`` when the feasible set is empty."""
    return _solver(query).evaluate(query.rate, 1)["tilde"]


def exponent_rc_ordinary(R, q_x, W, settings: SolverSettings | None = None) -> float:
    """Ordinary random-coding exponent ``min D(Q||W|Q_X) + [I - R]_+``."""
    return solver_for(W, q_x, DecodingMetric.ml(W), settings).rc_ordinary(R)


def rmax_lower_bound(q_x, W, settings: SolverSettings | None = None) -> float:
    """``min_Q {D + [I - D]_+ / 2}``, a rate below which ``E_r^ub`` stays positive."""
    return solver_for(W, q_x, DecodingMetric.ml(W), settings).rmax_lower_bound()


def curve(query: NaiveExponentQuery, rate_grid: Iterable[float],
          exponents: Sequence[str] = EXPONENTS) -> CurveTable:
    """Tabulate the selected exponents (in nats) over ``rate_grid``."""
    rates = [float(r) for r in rate_grid]
    solver = _solver(query)
    cols: dict[str, list[float]] = {name: [] for name in exponents}
    for R in rates:
        vals = solver.evaluate(R, query.L)
        for name in exponents:
            cols[name].append(vals[name])
    return CurveTable(rates=rates, columns=cols, units="nats",
                      provenance={"L": query.L, "metric": query.metric.kind})
