import json
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from beeident import simulator as sim
from beeident.info import bsc, Composition
from beeident.naive import DecodingMetric
from beeident.simulator import Codebook, Permutation, SimulationConfig

from oracles import binomial_tail, brute_force_assignment, exact_pm_loops, ml_metric


def constant_rows(k=2):
    return np.full((k, k), 1.0 / k)


class TestCodebook:
    def test_single_arrangement(self):
        cb = sim.sample_codebook(3, 1, (1.0, 0.0), seed=5)
        assert cb.words.tolist() == [[0, 0, 0]]

    def test_constant_composition(self):
        cb = sim.sample_codebook(12, 20, (0.25, 0.75), seed=1)
        counts = np.stack([np.bincount(w, minlength=2) for w in cb.words])
        assert np.all(counts == [3, 9])
        assert cb.composition.counts == (3, 9)

    def test_deterministic(self):
        a = sim.sample_codebook(10, 5, (0.5, 0.5), seed=9, kind="iid")
        b = sim.sample_codebook(10, 5, (0.5, 0.5), seed=9, kind="iid")
        assert np.array_equal(a.words, b.words)

    @pytest.mark.parametrize("seed", range(5))
    def test_iid_frequency(self, seed):
        cb = sim.sample_codebook(10**4, 1, (0.3, 0.7), seed=seed, kind="iid")
        assert abs(np.mean(cb.words == 0) - 0.3) < 0.02

    def test_composition_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Codebook(words=[[0, 1], [0, 0]], generation="constant_composition", seed=0,
                     composition=Composition((1, 1)))

    def test_bad_size(self):
        with pytest.raises(ValueError):
            sim.sample_codebook(0, 1, (0.5, 0.5), seed=0)


class TestPermutation:
    def test_bijectivity(self):
        with pytest.raises(ValueError):
            Permutation((1, 1, 3))

    def test_random_is_bijection(self):
        p = Permutation.random(7, np.random.default_rng(0))
        assert sorted(p.mapping) == list(range(1, 8))
        assert p(1) == p.mapping[0]


class TestTransmit:
    def test_identity_channel(self):
        cb = sim.sample_codebook(8, 4, (0.5, 0.5), seed=2)
        pi = Permutation((3, 1, 4, 2))
        y = sim.transmit(cb, np.eye(2), pi, seed=0)
        assert np.array_equal(y, cb.words[pi.as_array()])

    def test_constant_rows_ignore_input(self):
        a = sim.Codebook.explicit([[0] * 50, [1] * 50])
        b = sim.Codebook.explicit([[1] * 50, [0] * 50])
        W = constant_rows()
        pi = Permutation.identity(2)
        assert np.array_equal(sim.transmit(a, W, pi, seed=3), sim.transmit(b, W, pi, seed=3))

    def test_bsc_flip_fraction(self):
        cb = sim.sample_codebook(10**4, 1, (0.5, 0.5), seed=4)
        y = sim.transmit(cb, bsc(0.1), Permutation.identity(1), seed=11)
        assert abs(np.mean(y != cb.words) - 0.1) < 0.01


class TestGLD:
    def test_single_message(self):
        cb = sim.Codebook.explicit([[0, 1, 1]])
        for s in range(5):
            d = sim.gld_decode([1, 1, 0], cb, DecodingMetric.ml(bsc(0.3)), seed=s)
            assert d.index == 1

    def test_identity_channel_map(self):
        cb = sim.Codebook.explicit([[0, 0, 1], [0, 1, 0], [1, 1, 1]])
        g = DecodingMetric.ml(np.eye(2))
        for m in range(3):
            assert sim.gld_decode(cb.words[m], cb, g, mode="map").index == m + 1

    def test_map_ties_lowest_index(self):
        cb = sim.Codebook.explicit([[0, 1], [1, 0]])
        assert sim.gld_decode([1, 1], cb, DecodingMetric.ml(bsc(0.2)), mode="map").index == 1

    def test_degenerate_fallback(self):
        cb = sim.Codebook.explicit([[0, 0], [0, 0]], alphabet_size=2)
        g = DecodingMetric.ml(np.eye(2))
        d = sim.gld_decode([1, 1], cb, g, mode="map")
        assert d == sim.Decision(1, True)
        picks = [sim.gld_decode([1, 1], cb, g, seed=s).index for s in range(400)]
        assert 150 < picks.count(1) < 250

    def test_softmax_frequencies(self):
        # n = 1: scores log W(y|x), posterior (0.8, 0.2) for y = 0
        cb = sim.Codebook.explicit([[0], [1]])
        g = DecodingMetric.ml(bsc(0.2))
        rng = np.random.default_rng(0)
        idx, _ = sim._decide(np.repeat(sim._scores(np.array([[0]]), cb.words, g, 2), 10**5, axis=0),
                             "stochastic", rng)
        counts = np.bincount(idx, minlength=2)
        se = math.sqrt(10**5 * 0.8 * 0.2)
        assert abs(counts[0] - 0.8 * 10**5) < 3 * se
        assert chisquare(counts, [0.8 * 10**5, 0.2 * 10**5]).pvalue > 0.01

    def test_softmax_n2_three_words(self):
        W = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]])
        cb = sim.Codebook.explicit([[0, 0], [0, 1], [1, 1]])
        y = np.array([[1, 2]])
        g = DecodingMetric.ml(W)
        like = np.array([W[0, 1] * W[0, 2], W[0, 1] * W[1, 2], W[1, 1] * W[1, 2]])
        post = like / like.sum()
        scores = np.repeat(sim._scores(y, cb.words, g, 3), 10**5, axis=0)
        idx, _ = sim._decide(scores, "stochastic", np.random.default_rng(1))
        assert chisquare(np.bincount(idx, minlength=3), post * 10**5).pvalue > 0.01

    def test_mmi_metric_path(self):
        cb = sim.Codebook.explicit([[0, 0, 1, 1], [0, 1, 0, 1]])
        d = sim.gld_decode([0, 0, 1, 1], cb, DecodingMetric.mmi(), mode="map", y_size=2)
        assert d.index == 1


class TestNaiveTrial:
    def test_identity_channel(self):
        cb = sim.sample_codebook(10, 6, (0.5, 0.5), seed=3)
        assert len(set(map(tuple, cb.words))) == 6
        out = sim.naive_trial(cb, np.eye(2), DecodingMetric.ml(np.eye(2)), L=1, mode="map", seed=7)
        assert out.n_errors == 0 and not out.failed

    def test_constant_rows_uniform_guess(self):
        M = 40
        cb = sim.sample_codebook(6, M, (0.5, 0.5), seed=0)
        g = DecodingMetric.ml(constant_rows())
        errs = [sim.naive_trial(cb, constant_rows(), g, L=1, seed=s).n_errors for s in range(200)]
        assert abs(np.mean(errs) - (M - 1)) < 0.5

    def test_L_beyond_M(self):
        cb = sim.sample_codebook(4, 3, (0.5, 0.5), seed=0)
        g = DecodingMetric.ml(constant_rows())
        assert not any(sim.naive_trial(cb, constant_rows(), g, L=4, seed=s).failed for s in range(50))

    def test_error_count_range(self):
        cb = sim.sample_codebook(5, 4, (0.5, 0.5), seed=1)
        g = DecodingMetric.ml(bsc(0.3))
        for s in range(20):
            assert 0 <= sim.naive_trial(cb, bsc(0.3), g, 1, seed=s).n_errors <= 4


class TestJointDecoder:
    @pytest.mark.parametrize("inst", range(100))
    def test_brute_force(self, inst):
        rng = np.random.default_rng(1000 + inst)
        M = int(rng.integers(1, 7))
        n = int(rng.integers(1, 8))
        p = float(rng.uniform(0.02, 0.45))
        cb = sim.sample_codebook(n, M, (0.5, 0.5), seed=inst, kind="iid")
        y = sim.transmit(cb, bsc(p), Permutation.random(M, rng), rng=rng)
        res = sim.ml_permutation_decode(y, cb, bsc(p))
        # on a BSC with p < 1/2 the log-likelihood is decreasing-affine in the
        # Hamming distance, so the exact comparison is on integer distances
        dist = (y[:, None, :] != cb.words[None, :, :]).sum(axis=-1)
        best, _ = brute_force_assignment(-dist)
        got = -sum(int(dist[m, res.permutation.mapping[m] - 1]) for m in range(M))
        assert got == best
        w = sim.permutation_weights(y, cb, bsc(p))
        assert res.weight == pytest.approx(brute_force_assignment(w)[0], abs=1e-12)

    def test_identity_channel_recovers(self):
        cb = sim.sample_codebook(12, 6, (0.5, 0.5), seed=0)
        pi = Permutation((2, 5, 1, 6, 3, 4))
        y = sim.transmit(cb, np.eye(2), pi, seed=1)
        res = sim.ml_permutation_decode(y, cb, np.eye(2))
        assert res.permutation == pi and not res.infeasible

    def test_single_bee(self):
        cb = sim.Codebook.explicit([[0, 1, 0]])
        res = sim.ml_permutation_decode([[1, 1, 0]], cb, bsc(0.1))
        assert res.permutation == Permutation.identity(1)

    def test_infeasible(self):
        cb = sim.Codebook.explicit([[0, 0], [0, 0]])
        res = sim.ml_permutation_decode([[1, 1], [0, 0]], cb, np.eye(2))
        assert res.infeasible and res.permutation == Permutation.identity(2)

    def test_tie_counts_as_error(self):
        # identical words make every permutation optimal; the solver's fixed
        # answer is scored against the true permutation, ties are not forgiven
        cb = sim.Codebook.explicit([[0, 1], [0, 1]])
        outs = [sim.joint_trial(cb, bsc(0.1), seed=s) for s in range(40)]
        truth = [Permutation.random(2, sim.stream(s, sim.TAG_PERMUTATION)).mapping for s in range(40)]
        assert len({o.decoded for o in outs}) == 1
        assert [o.failed for o in outs] == [o.decoded != t for o, t in zip(outs, truth)]
        assert any(o.failed for o in outs)


class TestEstimate:
    def cfg(self, **kw):
        base = dict(decoder="naive", n=6, M=4, channel=bsc(0.2), q_x=(0.5, 0.5))
        base.update(kw)
        return SimulationConfig(**base)

    def test_identity_channel_zero(self):
        r = sim.estimate_error(self.cfg(channel=np.eye(2), gld_mode="map", n=10), 300, 1)
        assert r.p_hat == 0.0

    def test_single_trial(self):
        r = sim.estimate_error(self.cfg(), 1, 5)
        assert r.p_hat in (0.0, 1.0)
        assert r.wilson_ci_95[0] <= r.p_hat <= r.wilson_ci_95[1]

    def test_report_invariants(self):
        r = sim.estimate_error(self.cfg(), 500, 5)
        assert r.p_hat == r.failures / r.trials and r.successes + r.failures == r.trials
        assert r.wilson_ci_95[0] <= r.p_hat <= r.wilson_ci_95[1]
        assert sum(r.error_histogram) == r.trials
        assert json.loads(r.to_json())["seed"] == 5

    def test_independent_of_chunking_and_workers(self):
        c = self.cfg()
        a = sim.estimate_error(c, 600, 42, chunk=600)
        b = sim.estimate_error(c, 600, 42, chunk=37)
        d = sim.estimate_error(c, 600, 42, workers=2, chunk=100)
        assert a == b == d

    def test_joint_determinism(self):
        c = self.cfg(decoder="joint", fresh_codebook=True, codebook_kind="iid")
        assert sim.estimate_error(c, 300, 3, chunk=50) == sim.estimate_error(c, 300, 3, workers=2, chunk=71)

    def test_monotone_in_L(self):
        r = sim.estimate_error(self.cfg(M=6), 2000, 8)
        rates = [r.p_hat_at(L) for L in range(0, 8)]
        assert all(b <= a for a, b in zip(rates, rates[1:]))
        assert rates[1] == r.p_hat
        for L in (2, 3):
            assert sim.estimate_error(self.cfg(M=6, L=L), 2000, 8).p_hat == r.p_hat_at(L)

    def test_trial_log(self, tmp_path):
        path = tmp_path / "log.jsonl"
        sim.estimate_error(self.cfg(), 25, 2, log_path=path, chunk=10)
        recs = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["trial"] for r in recs] == list(range(25))
        assert set(recs[0]) == {"trial", "seed", "n_errors"}

    def test_exact_matches_mc(self):
        c = self.cfg()
        book = sim._fixed_codebook(c, 77)
        W = bsc(0.2)
        exact = sim.exact_error_naive(book, W, DecodingMetric.ml(W), 1)
        r = sim.estimate_error(c, 20000, 77)
        lo, hi = sim.wilson_interval(r.failures, r.trials)
        # 99.9% band, since a single 95% miss is expected occasionally
        se = math.sqrt(exact * (1 - exact) / r.trials)
        assert abs(r.p_hat - exact) < 3.3 * se, (exact, lo, hi)


class TestExactOracles:
    def setup_method(self):
        self.W = np.asarray(bsc(0.2))
        self.g = DecodingMetric.ml(self.W)
        self.cb = sim.sample_codebook(4, 3, (0.5, 0.5), seed=12)

    def test_matches_loop_oracle(self):
        gj = ml_metric(self.W)
        for m in (1, 2, 3):
            assert sim.exact_pm(self.cb, m, self.W, self.g) == pytest.approx(
                exact_pm_loops(self.cb.words, m - 1, self.W, gj), abs=1e-12)

    def test_matches_loop_oracle_ternary(self):
        W = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]])
        cb = sim.Codebook.explicit([[0, 0, 1], [1, 0, 1], [1, 1, 0], [0, 1, 1]])
        pm = sim.exact_error_probabilities(cb, W, DecodingMetric.ml(W))
        want = [exact_pm_loops(cb.words, m, W, ml_metric(W)) for m in range(4)]
        assert np.allclose(pm, want, atol=1e-12, rtol=0)

    def test_scaled_metric_matches_loop_oracle(self):
        g1 = ml_metric(self.W)
        g = DecodingMetric.ml(self.W, scale=2.0)
        pm = sim.exact_error_probabilities(self.cb, self.W, g)
        want = [exact_pm_loops(self.cb.words, m, self.W, lambda j: 2.0 * g1(j)) for m in range(3)]
        assert np.allclose(pm, want, atol=1e-12, rtol=0)

    def test_single_message(self):
        cb = sim.Codebook.explicit([[0, 1, 1]])
        assert sim.exact_pm(cb, 1, self.W, self.g) == 0.0

    def test_identity_channel(self):
        cb = sim.Codebook.explicit([[0, 0, 1], [0, 1, 0], [1, 1, 1]])
        g = DecodingMetric.ml(np.eye(2))
        assert np.all(sim.exact_error_probabilities(cb, np.eye(2), g) == 0.0)
        assert sim.mu(cb, np.eye(2), g) == 0.0

    def test_per_message_mc(self):
        # p_m against direct decoding of message m, 2e5 draws
        rng = np.random.default_rng(5)
        trials = 200_000
        x = np.broadcast_to(self.cb.words[0], (trials, 4))
        y = np.where(rng.random(x.shape) < 0.2, 1 - x, x)
        idx, _ = sim._decide(sim._scores(y, self.cb.words, self.g, 2), "stochastic", rng)
        freq = np.mean(idx != 0)
        pm = sim.exact_pm(self.cb, 1, self.W, self.g)
        assert abs(freq - pm) < 3 * math.sqrt(pm * (1 - pm) / trials)

    def test_mu_matches_mc_mean(self):
        c = SimulationConfig(decoder="naive", n=4, M=3, channel=self.W, q_x=(0.5, 0.5),
                             codebook_words=self.cb.words)
        r = sim.estimate_error(c, 20000, 4)
        h = np.asarray(r.error_histogram)
        k = np.arange(h.size)
        mean = (h * k).sum() / r.trials
        sd = math.sqrt((h * (k - mean) ** 2).sum() / r.trials)
        assert abs(mean - sim.mu(self.cb, self.W, self.g)) < 3 * sd / math.sqrt(r.trials)

    def test_mu_symmetry(self):
        cb = sim.Codebook.explicit([[0, 0, 1], [1, 1, 0]])
        pm = sim.exact_error_probabilities(cb, self.W, self.g)
        assert sim.mu(cb, self.W, self.g) == pytest.approx(2 * pm[0], abs=1e-14)

    def test_L1_complement(self):
        pm = sim.exact_error_probabilities(self.cb, self.W, self.g)
        assert sim.exact_error_naive(self.cb, self.W, self.g, 1) == pytest.approx(
            1 - np.prod(1 - pm), abs=1e-12)
        assert sim.exact_error_naive(self.cb, self.W, self.g, 4) == 0.0

    def test_poisson_binomial(self):
        for L in range(0, 7):
            assert sim.poisson_binomial_tail([0.3] * 6, L) == pytest.approx(binomial_tail(6, 0.3, L), abs=1e-14)
        assert sim.poisson_binomial_tail([0.1, 0.5], 2) == pytest.approx(0.05, abs=1e-15)

    def test_too_large(self):
        big = sim.Codebook.explicit(np.zeros((2, 30), dtype=int), alphabet_size=2)
        with pytest.raises(sim.InstanceTooLarge):
            sim.exact_pm(big, 1, self.W, self.g)
        many = sim.Codebook.explicit(np.zeros((21, 2), dtype=int), alphabet_size=2)
        with pytest.raises(sim.InstanceTooLarge):
            sim.exact_error_naive(many, self.W, self.g, 1)


class TestTypeEnumerator:
    def test_single_word(self):
        cb = sim.Codebook.explicit([[0, 1, 1]])
        assert sim.type_enumerator(cb, [[1 / 3, 0], [0, 2 / 3]]) == 0

    def test_identical_words(self):
        cb = sim.Codebook.explicit([[0, 1, 1, 0]] * 5)
        assert sim.type_enumerator(cb, [[0.5, 0], [0, 0.5]]) == 20
        assert sim.type_enumerator(cb, [[0.25, 0.25], [0.25, 0.25]]) == 0

    def test_non_lattice_type(self):
        cb = sim.Codebook.explicit([[0, 1, 1, 0]] * 2)
        assert sim.type_enumerator(cb, [[0.3, 0.2], [0.2, 0.3]]) == 0

    def test_ensemble_mean(self):
        # for independent uniform shuffles of counts (6, 6), a pair has joint type
        # with n_{01} = n_{10} = k with probability C(6,k) C(6,6-k) / C(12,6)
        n, M, k = 12, 8, 3
        prob = math.comb(6, k) * math.comb(6, 6 - k) / math.comb(12, 6)
        q = np.array([[6 - k, k], [k, 6 - k]]) / n
        counts = np.array([sim.type_enumerator(sim.sample_codebook(n, M, (0.5, 0.5), seed=s), q)
                           for s in range(10**4)])
        expect = M * (M - 1) * prob
        assert abs(counts.mean() - expect) < 3 * counts.std() / math.sqrt(counts.size)
