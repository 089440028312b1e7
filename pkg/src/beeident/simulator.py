"""Operational bee-identification system and exact small-instance oracles.

M bees carry codewords of length n.  The reader observes the M channel
outputs in an unknown order: output ``m`` is the channel response to
codeword ``pi(m)``.  Naive decoding labels every output on its own with the
generalized likelihood decoder; joint decoding picks the most likely
permutation.  Message and permutation indices are 1-based throughout.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import binomtest

from .info import Composition
from .naive import DecodingMetric
from .simplex import quantize_composition

# stream tags of the per-trial generator
TAG_CODEBOOK, TAG_PERMUTATION, TAG_CHANNEL, TAG_DECODER = range(4)

EXACT_OUTPUT_LIMIT = 10**7
EXACT_MAX_MESSAGES = 20


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed of one trial, a pure function of ``(master_seed, trial)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(tag),)))


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True, eq=False)
class Codebook:
    """``M`` codewords of length ``n``, stored as an ``(M, n)`` integer array."""

    words: np.ndarray
    generation: str
    seed: int
    composition: Composition | None = None
    p_x: tuple | None = None
    alphabet_size: int | None = None

    def __post_init__(self):
        w = np.array(self.words, dtype=np.int64)
        if w.ndim != 2 or w.size == 0:
            raise ValueError("codebook words must form a non-empty (M, n) array")
        if self.generation not in ("constant_composition", "iid", "explicit"):
            raise ValueError(f"unknown generation {self.generation!r}")
        k = self.alphabet_size or int(w.max()) + 1
        if self.composition is not None:
            want = np.asarray(self.composition.counts)
            got = np.stack([np.bincount(row, minlength=want.size) for row in w])
            if np.any(got != want[None]):
                raise ValueError("a word does not match the stored composition")
            k = max(k, want.size)
        w.setflags(write=False)
        object.__setattr__(self, "words", w)
        object.__setattr__(self, "alphabet_size", k)

    @property
    def M(self) -> int:
        return self.words.shape[0]

    @property
    def n(self) -> int:
        return self.words.shape[1]

    @classmethod
    def explicit(cls, words, alphabet_size: int | None = None) -> "Codebook":
        return cls(words=words, generation="explicit", seed=0, alphabet_size=alphabet_size)


@dataclass(frozen=True)
class Permutation:
    """Bijection ``m -> pi(m)`` on ``{1..M}``; ``mapping[m-1] = pi(m)``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(v) for v in self.mapping)
        if sorted(mapping) != list(range(1, len(mapping) + 1)):
            raise ValueError("mapping is not a permutation of 1..M")
        object.__setattr__(self, "mapping", mapping)

    def __call__(self, m: int) -> int:
        return self.mapping[m - 1]

    def __len__(self):
        return len(self.mapping)

    @classmethod
    def identity(cls, M: int) -> "Permutation":
        return cls(tuple(range(1, M + 1)))

    @classmethod
    def random(cls, M: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(int(v) + 1 for v in rng.permutation(M)))

    def as_array(self) -> np.ndarray:
        """0-based codeword index behind each output."""
        return np.asarray(self.mapping, dtype=np.int64) - 1


class Decision(NamedTuple):
    index: int
    degenerate: bool  # every metric value was -inf


class MatchResult(NamedTuple):
    permutation: Permutation
    weight: float
    infeasible: bool


@dataclass(frozen=True)
class TrialOutcome:
    n_errors: int | None = None
    failed: bool = False
    permutation_correct: bool | None = None
    decoded: tuple = ()
    degenerate: int = 0


@dataclass(frozen=True)
class EstimateReport:
    trials: int
    failures: int
    successes: int
    p_hat: float
    wilson_ci_95: tuple[float, float]
    seed: int
    mode: str
    error_histogram: tuple[int, ...] = ()
    degenerate_decisions: int = 0
    config: dict = field(default_factory=dict)

    def p_hat_at(self, L: int) -> float:
        """Naive-mode failure frequency ``#{N_e >= L} / trials`` from the same trials."""
        if not self.error_histogram:
            raise ValueError("no error histogram (joint-mode report)")
        return sum(self.error_histogram[L:]) / self.trials

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wilson_ci_95"] = list(self.wilson_ci_95)
        d["error_histogram"] = list(self.error_histogram)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def wilson_interval(failures: int, trials: int) -> tuple[float, float]:
    ci = binomtest(failures, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


# ---------------------------------------------------------------------------
# codebooks and channel


def sample_codebook(n: int, M: int, q_x, seed: int, kind: str = "constant_composition") -> Codebook:
    """Random codebook: shuffles of one fixed type, or i.i.d. symbols from ``q_x``."""
    if n < 1 or M < 1:
        raise ValueError("need n >= 1 and M >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    q = np.asarray(q_x, dtype=float)
    if kind == "constant_composition":
        comp = quantize_composition(q, n)
        base = np.repeat(np.arange(q.size), comp.counts)
        words = rng.permuted(np.broadcast_to(base, (M, n)), axis=1)
        return Codebook(words, kind, int(seed), composition=comp, alphabet_size=q.size)
    if kind == "iid":
        words = rng.choice(q.size, size=(M, n), p=q)
        return Codebook(words, kind, int(seed), p_x=tuple(q.tolist()), alphabet_size=q.size)
    raise ValueError(f"unknown codebook kind {kind!r}")


def transmit(codebook: Codebook, W, pi: Permutation, seed=None, rng=None) -> np.ndarray:
    """Outputs ``(M, n)``: row ``m-1`` is a memoryless channel sample given codeword ``pi(m)``."""
    W = np.asarray(W, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(np.random.SeedSequence(int(seed)))
    x = codebook.words[pi.as_array()]
    cdf = np.cumsum(W, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(x.shape)
    return (u[..., None] >= cdf[x]).sum(axis=-1)


# ---------------------------------------------------------------------------
# decoders


def _scores(outputs, words, metric: DecodingMetric, y_size: int) -> np.ndarray:
    """``n * g(empirical joint of (x_m, y_j))`` for every output ``j`` and word ``m``."""
    outputs = np.atleast_2d(outputs)
    n = words.shape[1]
    if metric.kind == "ml":
        log_w = metric._log_w
        # (J, M, n) gather, summed over time
        return log_w[words[None, :, :], outputs[:, None, :]].sum(axis=-1)
    x_size = max(int(words.max()) + 1, metric.channel.shape[0] if metric.channel is not None else 0)
    X = np.eye(x_size)[words]          # (M, n, A)
    Y = np.eye(y_size)[outputs]        # (J, n, B)
    joint = np.einsum("mia,jib->jmab", X, Y) / n
    return n * metric(joint)


def _decide(scores, mode: str, rng):
    """Per-row GLD decisions (0-based) and a flag for rows with every score ``-inf``."""
    scores = np.atleast_2d(scores)
    top = scores.max(axis=1)
    degenerate = np.isneginf(top)
    if mode == "map":
        idx = np.argmax(scores, axis=1)
        idx[degenerate] = 0
    elif mode == "stochastic":
        with np.errstate(invalid="ignore"):
            logits = scores - np.where(degenerate, 0.0, top)[:, None]
        p = np.exp(logits)
        p[degenerate] = 1.0
        p /= p.sum(axis=1, keepdims=True)
        u = rng.random(scores.shape[0])
        idx = (u[:, None] >= np.cumsum(p, axis=1)).sum(axis=1)
        idx = np.minimum(idx, scores.shape[1] - 1)
    else:
        raise ValueError(f"unknown decoding mode {mode!r}")
    return idx, degenerate


def gld_decode(y, codebook: Codebook, g: DecodingMetric, mode: str = "stochastic",
               seed=None, rng=None, y_size: int | None = None) -> Decision:
    """Generalized likelihood decision for one output sequence.

    Stochastic mode draws ``m`` with probability proportional to
    ``exp{n g(P_{x_m y})}``; map mode takes the first maximizer.  If every
    score is ``-inf`` the stochastic draw is uniform and map mode returns 1.
    """
    if rng is None:
        rng = np.random.default_rng(None if seed is None else np.random.SeedSequence(int(seed)))
    y = np.asarray(y, dtype=np.int64)
    ys = y_size or (g.channel.shape[1] if g.channel is not None else int(y.max()) + 1)
    idx, deg = _decide(_scores(y[None], codebook.words, g, ys), mode, rng)
    return Decision(int(idx[0]) + 1, bool(deg[0]))


def naive_trial(codebook: Codebook, W, g: DecodingMetric, L: int, mode: str = "stochastic",
                seed: int = 0) -> TrialOutcome:
    """One use of the system under naive decoding; failure iff at least ``L`` bees are mislabeled."""
    W = np.asarray(W, dtype=float)
    pi = Permutation.random(codebook.M, stream(seed, TAG_PERMUTATION))
    y = transmit(codebook, W, pi, rng=stream(seed, TAG_CHANNEL))
    idx, deg = _decide(_scores(y, codebook.words, g, W.shape[1]), mode, stream(seed, TAG_DECODER))
    n_err = int(np.sum(idx != pi.as_array()))
    return TrialOutcome(n_errors=n_err, failed=n_err >= L,
                        decoded=tuple(int(i) + 1 for i in idx), degenerate=int(deg.sum()))


def permutation_weights(outputs, codebook: Codebook, W) -> np.ndarray:
    """``w[m, j] = sum_i log W(y_{m,i} | x_{j,i})`` (may be ``-inf``)."""
    with np.errstate(divide="ignore"):
        log_w = np.log(np.asarray(W, dtype=float))
    return log_w[codebook.words[None, :, :], np.asarray(outputs)[:, None, :]].sum(axis=-1)


def ml_permutation_decode(outputs, codebook: Codebook, W) -> MatchResult:
    """Maximum-likelihood permutation as a maximum-weight perfect matching."""
    w = permutation_weights(outputs, codebook, W)
    M = w.shape[0]
    cost = np.where(np.isneginf(w), np.inf, -w)
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return MatchResult(Permutation.identity(M), -math.inf, True)
    mapping = np.empty(M, dtype=np.int64)
    mapping[rows] = cols + 1
    return MatchResult(Permutation(tuple(mapping)), float(w[rows, cols].sum()), False)


def joint_trial(codebook: Codebook, W, seed: int = 0) -> TrialOutcome:
    pi = Permutation.random(codebook.M, stream(seed, TAG_PERMUTATION))
    y = transmit(codebook, W, pi, rng=stream(seed, TAG_CHANNEL))
    res = ml_permutation_decode(y, codebook, W)
    ok = res.permutation == pi
    return TrialOutcome(failed=not ok, permutation_correct=ok, decoded=res.permutation.mapping)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a Monte Carlo run needs except the trial count and seed.

    ``fresh_codebook`` draws a new codebook every trial (ensemble average);
    otherwise ``codebook`` is used, or one is drawn once from the master seed.
    """

    decoder: str                      # "naive" or "joint"
    n: int
    M: int
    channel: tuple
    q_x: tuple
    L: int = 1
    metric: str = "ml"
    metric_scale: float = 1.0
    gld_mode: str = "stochastic"
    codebook_kind: str = "constant_composition"
    fresh_codebook: bool = False
    codebook_words: tuple | None = None

    def __post_init__(self):
        if self.decoder not in ("naive", "joint"):
            raise ValueError("decoder must be 'naive' or 'joint'")
        object.__setattr__(self, "channel", tuple(map(tuple, np.asarray(self.channel, float).tolist())))
        object.__setattr__(self, "q_x", tuple(float(v) for v in self.q_x))
        if self.codebook_words is not None:
            object.__setattr__(self, "codebook_words",
                               tuple(map(tuple, np.asarray(self.codebook_words, int).tolist())))

    def to_dict(self) -> dict:
        return asdict(self)

    def decoding_metric(self) -> DecodingMetric:
        if self.metric == "ml":
            return DecodingMetric.ml(self.channel, scale=self.metric_scale)
        return DecodingMetric.mmi(scale=self.metric_scale)


def _fixed_codebook(cfg: SimulationConfig, master_seed: int) -> Codebook | None:
    if cfg.fresh_codebook:
        return None
    if cfg.codebook_words is not None:
        return Codebook.explicit(cfg.codebook_words, alphabet_size=len(cfg.q_x))
    seed = int(np.random.SeedSequence(int(master_seed), spawn_key=(2**32 - 1,)).generate_state(1)[0])
    return sample_codebook(cfg.n, cfg.M, cfg.q_x, seed, cfg.codebook_kind)


def _run_chunk(args):
    cfg, master_seed, lo, hi, keep_log = args
    W = np.asarray(cfg.channel)
    metric = cfg.decoding_metric()
    book = _fixed_codebook(cfg, master_seed)
    hist = np.zeros(cfg.M + 1, dtype=np.int64)
    failures = degenerate = 0
    records = []
    for t in range(lo, hi):
        s = trial_seed(master_seed, t)
        cb = book
        if cb is None:
            cb_seed = int(stream(s, TAG_CODEBOOK).integers(2**63))
            cb = sample_codebook(cfg.n, cfg.M, cfg.q_x, cb_seed, cfg.codebook_kind)
        if cfg.decoder == "naive":
            out = naive_trial(cb, W, metric, cfg.L, cfg.gld_mode, s)
            hist[out.n_errors] += 1
            degenerate += out.degenerate
            rec = {"trial": t, "seed": s, "n_errors": out.n_errors}
        else:
            out = joint_trial(cb, W, s)
            rec = {"trial": t, "seed": s, "permutation_correct": out.permutation_correct}
        failures += int(out.failed)
        if keep_log:
            records.append(rec)
    return failures, hist, degenerate, records


def estimate_error(config: SimulationConfig, trials: int, master_seed: int, workers: int = 1,
                   log_path=None, chunk: int = 2000) -> EstimateReport:
    """Monte Carlo estimate of the failure probability.

    Trial ``t`` depends only on ``(master_seed, t)``, so the report does not
    depend on ``workers`` or chunking.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    keep = log_path is not None
    jobs = [(config, master_seed, lo, min(trials, lo + chunk), keep) for lo in range(0, trials, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    failures = sum(p[0] for p in parts)
    hist = np.sum([p[1] for p in parts], axis=0)
    degenerate = sum(p[2] for p in parts)
    if keep:
        with open(log_path, "w") as fh:
            for p in parts:
                for rec in p[3]:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    cfg = config.to_dict()
    return EstimateReport(
        trials=trials,
        failures=failures,
        successes=trials - failures,
        p_hat=failures / trials,
        wilson_ci_95=wilson_interval(failures, trials),
        seed=int(master_seed),
        mode=config.decoder if config.decoder == "joint" else f"naive/{config.gld_mode}",
        error_histogram=tuple(int(v) for v in hist) if config.decoder == "naive" else (),
        degenerate_decisions=int(degenerate),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# exact oracles


class InstanceTooLarge(ValueError):
    pass


def _all_outputs(y_size: int, n: int, lo: int, hi: int) -> np.ndarray:
    idx = np.arange(lo, hi)
    out = np.empty((hi - lo, n), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        out[:, i] = idx % y_size
        idx //= y_size
    return out


def exact_error_probabilities(codebook: Codebook, W, g: DecodingMetric) -> np.ndarray:
    """Per-message error probabilities ``p_m`` of the stochastic GLD, by summing over ``Y^n``."""
    W = np.asarray(W, dtype=float)
    ny = W.shape[1]
    n, M = codebook.n, codebook.M
    total = ny**n
    if total > EXACT_OUTPUT_LIMIT:
        raise InstanceTooLarge(f"|Y|^n = {ny}^{n} = {total} exceeds {EXACT_OUTPUT_LIMIT}")
    with np.errstate(divide="ignore"):
        log_w = np.log(W)
    pm = np.zeros(M)
    step = max(1, 2_000_000 // max(M * n, 1))
    for lo in range(0, total, step):
        y = _all_outputs(ny, n, lo, min(total, lo + step))
        s = _scores(y, codebook.words, g, ny)                  # (J, M)
        top = s.max(axis=1, keepdims=True)
        dead = np.isneginf(top[:, 0])
        with np.errstate(invalid="ignore"):
            post = np.exp(s - np.where(dead[:, None], 0.0, top))
        post[dead] = 1.0
        post /= post.sum(axis=1, keepdims=True)
        like = np.exp(log_w[codebook.words[None, :, :], y[:, None, :]].sum(axis=-1))  # W(y|x_m)
        pm += np.sum(like * (1.0 - post), axis=0)
    return np.clip(pm, 0.0, 1.0)


def exact_pm(codebook: Codebook, m: int, W, g: DecodingMetric) -> float:
    """Exact error probability of message ``m`` (1-based) under the stochastic GLD."""
    return float(exact_error_probabilities(codebook, W, g)[m - 1])


def poisson_binomial_tail(p: Sequence[float], L: int) -> float:
    """``P{sum of independent Bernoulli(p_m) >= L}`` by dynamic programming."""
    dist = np.zeros(len(p) + 1)
    dist[0] = 1.0
    for q in p:
        dist[1:] = dist[1:] * (1 - q) + dist[:-1] * q
        dist[0] *= 1 - q
    return float(dist[max(L, 0):].sum()) if L <= len(p) else 0.0


def exact_error_naive(codebook: Codebook, W, g: DecodingMetric, L: int) -> float:
    """Exact ``P{N_e >= L}`` for a fixed codebook under naive stochastic GLD decoding."""
    if codebook.M > EXACT_MAX_MESSAGES:
        raise InstanceTooLarge(f"M = {codebook.M} exceeds {EXACT_MAX_MESSAGES}")
    return poisson_binomial_tail(exact_error_probabilities(codebook, W, g), L)


def mu(codebook: Codebook, W, g: DecodingMetric) -> float:
    """Expected number of mislabeled bees, ``sum_m p_m``."""
    return float(exact_error_probabilities(codebook, W, g).sum())


def type_enumerator(codebook: Codebook, q_xx) -> int:
    """Number of ordered pairs ``(m, m')``, ``m != m'``, whose joint type is exactly ``q_xx``."""
    q = np.asarray(q_xx, dtype=float)
    n, M = codebook.n, codebook.M
    target = q * n
    if np.any(np.abs(target - np.round(target)) > 1e-9):
        return 0
    target = np.round(target).astype(np.int64)
    A, B = q.shape
    if codebook.words.max() >= max(A, B):
        return 0
    X = np.eye(A, dtype=np.int64)[codebook.words]       # (M, n, A)
    Xp = np.eye(B, dtype=np.int64)[codebook.words]       # (M, n, B)
    counts = np.einsum("mia,kib->mkab", X, Xp)
    hit = np.all(counts == target[None, None], axis=(2, 3))
    np.fill_diagonal(hit, False)
    return int(hit.sum())
