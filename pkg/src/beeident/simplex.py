"""Grids over probability simplices, composition quantization, and
piecewise-linear interpolation of functions tabulated on a simplex grid.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterator

import numpy as np

from .info import Composition, ConditionalDistribution

_NEG_TOL = 1e-12


def _steps(resolution: float) -> int:
    k = round(1.0 / resolution)
    if k < 1 or abs(k * resolution - 1.0) > 1e-9:
        raise ValueError(f"resolution must be 1/K for a positive integer K, got {resolution}")
    return k


@lru_cache(maxsize=64)
def _simplex_counts(k: int, steps: int) -> np.ndarray:
    # lexicographic order on the count vector
    out = [c for c in itertools.product(range(steps + 1), repeat=k - 1) if sum(c) <= steps]
    arr = np.array([c + (steps - sum(c),) for c in out], dtype=np.int64).reshape(-1, k)
    arr.setflags(write=False)
    return arr


def simplex_grid(k: int, resolution: float) -> np.ndarray:
    """All probability vectors of length ``k`` whose entries are multiples of ``resolution``."""
    steps = _steps(resolution)
    return _simplex_counts(k, steps) / steps


def constrained_family(weights, target, points: np.ndarray) -> np.ndarray:
    """Row-stochastic matrices ``V`` with ``weights @ V == target``.

    Every row except the one of largest weight is drawn from ``points``; that
    row is solved from the constraint and kept only when it is a valid
    distribution.  The product coupling (every row equal to ``target``) is
    always included, so the result is never empty.  Shape ``(N, len(weights), len(target))``.
    """
    weights = np.asarray(weights, dtype=float)
    target = np.asarray(target, dtype=float)
    n_rows = weights.size
    solved = int(np.argmax(weights))
    free = [i for i in range(n_rows) if i != solved]
    product = np.broadcast_to(target, (n_rows, target.size))[None].copy()

    if not free:
        return product
    n_pts = points.shape[0]
    idx = np.array(list(itertools.product(range(n_pts), repeat=len(free))), dtype=np.int64)
    fam = np.empty((idx.shape[0], n_rows, target.size))
    acc = np.zeros((idx.shape[0], target.size))
    for j, r in enumerate(free):
        fam[:, r, :] = points[idx[:, j]]
        acc += weights[r] * fam[:, r, :]
    last = (target[None, :] - acc) / weights[solved]
    ok = np.all(last >= -_NEG_TOL, axis=1)
    fam[:, solved, :] = np.clip(last, 0.0, None)
    fam = fam[ok]
    fam[:, solved, :] /= fam[:, solved, :].sum(axis=1, keepdims=True)
    # zero-weight rows are irrelevant to the joint; pin them to the target
    for r in free:
        if weights[r] == 0:
            fam[:, r, :] = target
    fam = np.concatenate([fam, product])
    _, first = np.unique(np.round(fam.reshape(fam.shape[0], -1), 12), axis=0, return_index=True)
    return fam[np.sort(first)]


def conditional_grid(
    x_size: int,
    y_size: int,
    resolution: float,
    marginal_constraint=None,
) -> Iterator[ConditionalDistribution]:
    """Stream conditional distributions ``Q_{Y|X}`` whose entries lie on a grid.

    Without a constraint, every row ranges over the simplex grid of step
    ``resolution`` and the stream has ``|grid|**x_size`` members in fixed
    lexicographic order.  ``marginal_constraint=(q_x, q_target)`` restricts
    to members with ``sum_x q_x(x) Q(y|x) = q_target(y)``; the constraint is
    met exactly (one row is solved from it) and the product coupling is
    always present.
    """
    points = simplex_grid(y_size, resolution)
    if marginal_constraint is None:
        for combo in itertools.product(range(points.shape[0]), repeat=x_size):
            yield ConditionalDistribution(points[list(combo)])
        return
    q_x, target = marginal_constraint
    fam = constrained_family(q_x, target, points)
    if fam.shape[1] != x_size or fam.shape[2] != y_size:
        raise ValueError("constraint alphabets do not match the grid")
    for v in fam:
        yield ConditionalDistribution(v)


def quantize_composition(q_x, n: int) -> Composition:
    """Largest-remainder rounding of ``n * q_x``; ties go to the lowest symbol index."""
    if n < 1:
        raise ValueError("block length must be positive")
    q = np.asarray(q_x, dtype=float)
    raw = n * q
    base = np.floor(raw + 1e-12).astype(int)
    base = np.minimum(base, np.ceil(raw).astype(int))
    rem = raw - base
    short = n - int(base.sum())
    # stable sort on -remainder keeps index order among ties
    order = np.argsort(-np.round(rem, 12), kind="stable")
    counts = base.copy()
    counts[order[:short]] += 1
    return Composition(tuple(int(c) for c in counts))


class SimplexInterpolator:
    """Piecewise-linear interpolant of values tabulated on ``simplex_grid(k, 1/K)``.

    Uses the Freudenthal (Kuhn) triangulation in cumulative coordinates, so
    every query is a convex combination of at most ``k`` grid values.  A
    ``-inf`` vertex with positive weight yields ``-inf``.
    """

    def __init__(self, k: int, resolution: float, values):
        self.k = k
        self.K = _steps(resolution)
        counts = _simplex_counts(k, self.K)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (counts.shape[0],):
            raise ValueError("one value per grid point is required")
        if k == 1:
            self._lookup = np.zeros(1, dtype=np.int64)
            return
        cum = np.cumsum(counts[:, :-1], axis=1)
        self._lookup = np.full((self.K + 1,) * (k - 1), -1, dtype=np.int64)
        self._lookup[tuple(cum.T)] = np.arange(counts.shape[0])

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        shape = p.shape[:-1]
        p = p.reshape(-1, self.k)
        if self.k == 1:
            return np.full(shape, self.values[0])
        c = np.clip(np.cumsum(p[:, :-1], axis=1) * self.K, 0.0, self.K)
        # keep monotone after clipping round-off
        c = np.maximum.accumulate(c, axis=1)
        base = np.minimum(np.floor(c), self.K - 1).astype(np.int64)
        frac = c - base
        order = np.argsort(-frac, axis=1, kind="stable")
        sorted_frac = np.take_along_axis(frac, order, axis=1)
        d = self.k - 1
        lam = np.empty((p.shape[0], d + 1))
        lam[:, 0] = 1.0 - sorted_frac[:, 0]
        lam[:, 1:d] = sorted_frac[:, :-1] - sorted_frac[:, 1:]
        lam[:, d] = sorted_frac[:, -1]
        vert = base.copy()
        rows = np.arange(p.shape[0])
        total = np.zeros(p.shape[0])
        for j in range(d + 1):
            if j > 0:
                vert[rows, order[:, j - 1]] += 1
            v = np.minimum(vert, self.K)
            idx = self._lookup[tuple(v.T)]
            # vertices outside the order simplex only ever carry zero weight
            vals = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
            with np.errstate(invalid="ignore"):
                total = total + np.where(lam[:, j] > 0, lam[:, j] * vals, 0.0)
        return total.reshape(shape)
