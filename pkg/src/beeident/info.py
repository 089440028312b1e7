"""Finite-alphabet probability objects and information measures.

All measures are in nats.  The conventions ``0 log 0 = 0`` and
``a log(a/0) = +inf`` (for ``a > 0``) hold everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ATOL = 1e-12


class ChannelFileError(ValueError):
    """Raised when a channel specification file is malformed."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over ``{0, ..., alphabet_size - 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("a distribution must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > ATOL:
            raise ValueError(f"not a probability vector: {p.tolist()}")
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    @classmethod
    def uniform(cls, k: int) -> "Distribution":
        return cls(np.full(k, 1.0 / k))


@dataclass(frozen=True, eq=False)
class ConditionalDistribution:
    """Row-stochastic matrix; row ``x`` is the distribution of the output given ``x``."""

    rows: np.ndarray

    def __post_init__(self):
        r = _frozen(self.rows)
        if r.ndim != 2 or r.size == 0:
            raise ValueError("a conditional distribution must be a non-empty matrix")
        if np.any(r < 0) or np.any(np.abs(r.sum(axis=1) - 1.0) > ATOL):
            raise ValueError("every row must be a probability vector")
        object.__setattr__(self, "rows", r)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def row(self, x: int) -> Distribution:
        return Distribution(self.rows[x])


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint probability table over two or three finite alphabets."""

    table: np.ndarray

    def __post_init__(self):
        t = _frozen(self.table)
        if t.ndim not in (2, 3):
            raise ValueError("joint tables must be 2- or 3-dimensional")
        if np.any(t < 0) or abs(t.sum() - 1.0) > ATOL:
            raise ValueError("joint table entries must be nonnegative and sum to 1")
        object.__setattr__(self, "table", t)

    def __array__(self, dtype=None, copy=None):
        return self.table if dtype is None else self.table.astype(dtype)

    def marginal(self, axis: int) -> Distribution:
        other = tuple(i for i in range(self.table.ndim) if i != axis)
        return Distribution(self.table.sum(axis=other))

    @classmethod
    def from_conditional(cls, q_x, q_cond) -> "JointDistribution":
        q_x = np.asarray(q_x, dtype=float)
        return cls(q_x[:, None] * np.asarray(q_cond, dtype=float))


@dataclass(frozen=True)
class Composition:
    """Integer symbol counts of a type class ``T(Q_X)`` at block length ``n``."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts) or sum(counts) < 1:
            raise ValueError("counts must be nonnegative with a positive total")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def as_distribution(self) -> Distribution:
        return Distribution(np.asarray(self.counts, dtype=float) / self.n)


# ---------------------------------------------------------------------------
# elementwise helpers (work on any array shape)


def xlogx(p):
    """``p log p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def xlogy_ratio(p, q):
    """``p log(p/q)`` with ``0 log(0/q) = 0`` and ``p log(p/0) = +inf``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0)
    return out


def entropy(p, axis=None):
    return -np.sum(xlogx(p), axis=axis)


def batch_mutual_information(q):
    """Mutual information of a stack of joints, shape ``(..., |A|, |B|)``."""
    q = np.asarray(q, dtype=float)
    h_a = entropy(q.sum(axis=-1), axis=-1)
    h_b = entropy(q.sum(axis=-2), axis=-1)
    h_ab = entropy(q, axis=(-2, -1))
    return np.maximum(h_a + h_b - h_ab, 0.0)


# ---------------------------------------------------------------------------
# information measures


def mutual_information(q) -> float:
    """``I(X;Y)`` of a two-dimensional joint table, in nats."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2:
        raise ValueError("mutual_information expects a 2-D joint")
    qx = q.sum(axis=1)
    qy = q.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0) / np.outer(qx, qy)), 0.0)
    return max(float(terms.sum()), 0.0)


_NAMES = {"X": 0, "X'": 1, "Y": 2}


def _parse_pattern(pattern) -> tuple[int, int, int]:
    if isinstance(pattern, str):
        left, given = pattern.split("|")
        a, b = left.split(";")
        try:
            return _NAMES[a.strip()], _NAMES[b.strip()], _NAMES[given.strip()]
        except KeyError as exc:
            raise ValueError(f"unknown variable in pattern {pattern!r}") from exc
    a, b, c = (int(v) for v in pattern)
    return a, b, c


def conditional_mutual_information(q, pattern="X';Y|X") -> float:
    """Conditional mutual information of a 3-way joint over ``(X, X', Y)``.

    ``pattern`` is either a string such as ``"X';Y|X"`` or a triple of axis
    indices ``(a, b, given)`` meaning ``I(A;B|C)``.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 3:
        raise ValueError("conditional_mutual_information expects a 3-D joint")
    a, b, c = _parse_pattern(pattern)
    if len({a, b, c}) != 3:
        raise ValueError("pattern must name three distinct variables")
    t = np.transpose(q, (a, b, c))
    h_ac = entropy(t.sum(axis=1))
    h_bc = entropy(t.sum(axis=0))
    h_abc = entropy(t)
    h_c = entropy(t.sum(axis=(0, 1)))
    return max(float(h_ac + h_bc - h_abc - h_c), 0.0)


def weighted_divergence(q_cond, w, q_x) -> float:
    """``D(Q_{Y|X} || W | Q_X)``; ``+inf`` on an absolute-continuity failure."""
    q_cond = np.asarray(q_cond, dtype=float)
    w = np.asarray(w, dtype=float)
    q_x = np.asarray(q_x, dtype=float)
    if q_cond.shape != w.shape or q_cond.shape[0] != q_x.size:
        raise ValueError("alphabet sizes do not match")
    per_row = xlogy_ratio(q_cond, w).sum(axis=1)
    active = q_x > 0
    if np.any(np.isinf(per_row[active])):
        return float("inf")
    return float(np.dot(q_x[active], per_row[active]))


def empirical_joint(x_seq, y_seq, x_size: int | None = None, y_size: int | None = None):
    """Joint empirical distribution of two equal-length sequences."""
    x = np.asarray(x_seq, dtype=int)
    y = np.asarray(y_seq, dtype=int)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("sequences must be one-dimensional and of equal length")
    if x.size == 0:
        raise ValueError("sequences must be non-empty")
    x_size = int(x.max()) + 1 if x_size is None else x_size
    y_size = int(y.max()) + 1 if y_size is None else y_size
    counts = np.zeros((x_size, y_size))
    np.add.at(counts, (x, y), 1.0)
    return JointDistribution(counts / x.size)


def is_symmetric(w, tol: float = 1e-12) -> bool:
    """True iff all rows are permutations of one another, and likewise all columns."""
    m = np.asarray(w, dtype=float)
    rows = np.sort(m, axis=1)
    cols = np.sort(m, axis=0)
    return bool(np.all(np.abs(rows - rows[0]) <= tol) and np.all(np.abs(cols - cols[:, :1]) <= tol))


# ---------------------------------------------------------------------------
# channel files


def bsc(p: float) -> ConditionalDistribution:
    return ConditionalDistribution([[1 - p, p], [p, 1 - p]])


def z_channel(w00: float) -> ConditionalDistribution:
    """Z-channel with ``W(0|0) = w00`` and a noiseless ``1``."""
    return ConditionalDistribution([[w00, 1 - w00], [0.0, 1.0]])


def cyclic_symmetric(first_row: Sequence[float]) -> ConditionalDistribution:
    """Square channel whose rows are cyclic shifts of ``first_row``."""
    r = np.asarray(first_row, dtype=float)
    return ConditionalDistribution(np.stack([np.roll(r, k) for k in range(r.size)]))


def channel_from_dict(obj: dict) -> ConditionalDistribution:
    try:
        k_in = int(obj["alphabet_in"])
        k_out = int(obj["alphabet_out"])
        rows = np.asarray(obj["rows"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelFileError(f"malformed channel specification: {exc}") from exc
    if rows.shape != (k_in, k_out):
        raise ChannelFileError(f"rows have shape {rows.shape}, expected {(k_in, k_out)}")
    try:
        return ConditionalDistribution(rows)
    except ValueError as exc:
        raise ChannelFileError(str(exc)) from exc


def channel_to_dict(w) -> dict:
    m = np.asarray(w, dtype=float)
    return {"alphabet_in": m.shape[0], "alphabet_out": m.shape[1], "rows": m.tolist()}


def load_channel(path) -> ConditionalDistribution:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ChannelFileError(f"cannot read channel file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ChannelFileError("channel file must contain a JSON object")
    return channel_from_dict(obj)


def save_channel(w, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(w), indent=2) + "\n")
