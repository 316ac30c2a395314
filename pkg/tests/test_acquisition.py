"""Acquisition strategy contracts.

Engineered instances use a linear scalar model (no hidden layers,
standard parameterization), whose traced kernel is exactly X X^T. That
makes bordered spectra analytic: unit vectors give known eigenvalues,
duplicated rows force an exact zero mode, and scores can be checked
against numpy's solver on hand-picked submatrices.
"""

import numpy as np
import pytest

from crcal import (
    NetworkSpec,
    ParamVector,
    Pool,
    confidence_acquire,
    crc_acquire,
    crc_acquire_balanced,
    egl_acquire,
    entropy_acquire,
    init_network,
    jacobian_batch,
    random_acquire,
    softmax,
    forward_batch,
)
from crcal.pool import _raw_labels


def scalar_linear(dim):
    spec = NetworkSpec(dim, (), 1, ntk_parameterization=False)
    params = ParamVector(np.ones(dim), spec.layer_offsets)
    return spec, params


def make_pool(features, labeled, num_classes=2):
    features = np.asarray(features, dtype=np.float64)
    labels = np.zeros(len(features), dtype=np.int64)
    return Pool(features, labels, labeled_idx=labeled, num_classes=num_classes)


class TestCrcStructure:
    def test_partition_shape_and_disjointness(self):
        rng = np.random.default_rng(0)
        pool = make_pool(rng.standard_normal((23, 4)), labeled=[0, 1, 2])
        spec, params = scalar_linear(4)
        res = crc_acquire(pool, params, spec, num_queries=6, group_size=3, seed=11)
        # 20 unlabeled -> 6 groups of 3, remainder 2 dropped
        assert len(res.group_scores) == 6
        seen = [i for gs in res.group_scores for i in gs.members]
        assert len(seen) == 18 and len(set(seen)) == 18
        assert set(seen) <= set(pool.unlabeled_idx.tolist())
        assert len(res.selected) == 6
        assert sum(gs.selected for gs in res.group_scores) == 2
        assert res.strategy == "crc"

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(1)
        pool = make_pool(rng.standard_normal((15, 3)), labeled=[0])
        spec, params = scalar_linear(3)
        a = crc_acquire(pool, params, spec, 4, 2, seed=5)
        b = crc_acquire(pool, params, spec, 4, 2, seed=5)
        c = crc_acquire(pool, params, spec, 4, 2, seed=6)
        assert a.selected == b.selected
        assert [g.as_dict() for g in a.group_scores] == [g.as_dict() for g in b.group_scores]
        groups_a = {g.members for g in a.group_scores}
        groups_c = {g.members for g in c.group_scores}
        assert groups_a != groups_c  # different permutation

    def test_scores_match_numpy_on_bordered_kernel(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((12, 5))
        pool = make_pool(X, labeled=[0, 1])
        spec, params = scalar_linear(5)
        res = crc_acquire(pool, params, spec, num_queries=2, group_size=2, seed=3)
        K = X @ X.T
        for gs in res.group_scores:
            rows = [0, 1] + list(gs.members)
            evals = np.linalg.eigvalsh(K[np.ix_(rows, rows)])
            positive = evals[evals > 1e-8 * evals[-1]]
            assert not gs.degenerate
            assert gs.score == pytest.approx(positive[0], rel=1e-8)

    def test_selects_highest_scoring_group(self):
        # labeled e0; candidates: e1 (orthogonal, score 1) and a vector
        # nearly parallel to e0 (tiny smallest eigenvalue)
        X = np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.999, 0.01, 0.0],
        ])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(3)
        res = crc_acquire(pool, params, spec, num_queries=1, group_size=1, seed=0)
        assert res.selected == (1,)


class TestCrcDegeneracy:
    def test_duplicate_of_labeled_is_demoted(self):
        # the duplicate's bordered kernel is [[1,1],[1,1]]: eigenvalues
        # {2, 0}. Its surviving eigenvalue 2 beats the clean candidate's
        # 0.4, so only the degeneracy demotion keeps it from winning.
        X = np.array([
            [1.0, 0.0],
            [1.0, 0.0],   # exact copy of the labeled point
            [0.6, 0.8],
        ])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(2)
        res = crc_acquire(pool, params, spec, num_queries=1, group_size=1, seed=0)
        assert res.selected == (2,)
        flags = {gs.members[0]: gs.degenerate for gs in res.group_scores}
        assert flags[1] is True and flags[2] is False

    def test_union_veto_blocks_second_copy(self):
        # two copies of the orthogonal candidate: each is clean on its
        # own, but both together put a zero mode into the union kernel.
        # Three dimensions so the clean union stays full rank.
        X = np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.6, 0.0, 0.8],
        ])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(3)
        res = crc_acquire(pool, params, spec, num_queries=2, group_size=1, seed=1)
        assert len(res.selected) == 2
        # exactly one of the two copies is taken, plus the clean point
        assert len({1, 2} & set(res.selected)) == 1
        assert 3 in res.selected

    def test_forced_fill_after_veto_preserves_rank_order(self):
        # in 2-D any third point is linearly dependent, so after one
        # clean pick every union is degenerate; the fill must take the
        # higher-scoring skipped group, not the lower one
        X = np.array([
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.6, 0.8],
        ])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(2)
        res = crc_acquire(pool, params, spec, num_queries=2, group_size=1, seed=1)
        assert len({1, 2} & set(res.selected)) == 2  # the exact twins win on score

    def test_exact_ties_prefer_lower_group_index(self):
        # identical candidate features give bitwise-identical bordered
        # kernels, so their scores tie exactly
        X = np.array([
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
            [0.995, 0.05],
        ])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(2)
        res = crc_acquire(pool, params, spec, num_queries=1, group_size=1, seed=7)
        twins = [gs for gs in res.group_scores if gs.members[0] in (1, 2)]
        assert twins[0].score == twins[1].score  # exact tie
        winner = [gs for gs in res.group_scores if gs.selected]
        assert len(winner) == 1
        assert winner[0].group_index == min(t.group_index for t in twins)

    def test_forced_fill_when_everything_degenerate(self):
        # all candidates duplicate the labeled point; selection must
        # still return num_queries indices, by rank order
        X = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(2)
        res = crc_acquire(pool, params, spec, num_queries=2, group_size=1, seed=0)
        assert len(res.selected) == 2
        assert set(res.selected) == {1, 2}

    def test_single_candidate_group_always_returned(self):
        # G == Q and exactly one group: returned regardless of score
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        pool = make_pool(X, labeled=[0])
        spec, params = scalar_linear(2)
        res = crc_acquire(pool, params, spec, num_queries=1, group_size=1, seed=0)
        assert res.selected == (1,)


class TestCrcErrors:
    def test_divisibility(self):
        pool = make_pool(np.eye(4), labeled=[0])
        spec, params = scalar_linear(4)
        with pytest.raises(ValueError, match="divide"):
            crc_acquire(pool, params, spec, num_queries=3, group_size=2, seed=0)

    def test_not_enough_unlabeled(self):
        pool = make_pool(np.eye(3), labeled=[0])
        spec, params = scalar_linear(3)
        with pytest.raises(ValueError, match="unlabeled"):
            crc_acquire(pool, params, spec, num_queries=4, group_size=2, seed=0)

    def test_positive_arguments(self):
        pool = make_pool(np.eye(3), labeled=[0])
        spec, params = scalar_linear(3)
        with pytest.raises(ValueError):
            crc_acquire(pool, params, spec, num_queries=0, group_size=1, seed=0)
        with pytest.raises(ValueError):
            crc_acquire(pool, params, spec, num_queries=1, group_size=0, seed=0)


class TestBalanced:
    def blob_pool(self, n=40, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, 2)) + np.array([[4.0, 0.0]]) * (np.arange(n) % 2)[:, None]
        labels = (np.arange(n) % 2).astype(np.int64)
        return Pool(X, labels, labeled_idx=[0, 1], num_classes=2)

    def test_one_per_class_and_counted_reads(self):
        pool = self.blob_pool()
        spec, params = scalar_linear(2)
        assert pool.oracle_reads == 0
        res = crc_acquire_balanced(pool, params, spec, per_class=1, seed=0)
        assert pool.oracle_reads == pool.unlabeled_idx.size
        assert len(res.selected) == 2
        picked_labels = sorted(_raw_labels(pool)[list(res.selected)].tolist())
        assert picked_labels == [0, 1]
        assert res.strategy == "crc_balanced"
        assert sum(gs.selected for gs in res.group_scores) == 1

    def test_per_class_zero_is_empty(self):
        pool = self.blob_pool()
        spec, params = scalar_linear(2)
        res = crc_acquire_balanced(pool, params, spec, per_class=0, seed=0)
        assert res.selected == ()
        assert pool.oracle_reads == 0

    def test_exhausted_class_raises(self):
        X = np.vstack([np.eye(2), np.eye(2), [[0.5, 0.5]]])
        labels = np.array([0, 1, 0, 1, 0], dtype=np.int64)
        pool = Pool(X, labels, labeled_idx=[0, 1, 4], num_classes=2)
        spec, params = scalar_linear(2)
        with pytest.raises(ValueError, match="class 0 has 1 unlabeled"):
            crc_acquire_balanced(pool, params, spec, per_class=2, seed=0)

    def test_group_size_is_per_class_times_classes(self):
        pool = self.blob_pool(n=60)
        spec, params = scalar_linear(2)
        res = crc_acquire_balanced(pool, params, spec, per_class=3, seed=1)
        assert len(res.selected) == 6
        picked = _raw_labels(pool)[list(res.selected)]
        assert (picked == 0).sum() == 3 and (picked == 1).sum() == 3


class TestRandom:
    def test_subset_without_replacement(self):
        pool = make_pool(np.random.default_rng(0).standard_normal((20, 2)), labeled=[0, 5])
        res = random_acquire(pool, 6, seed=3)
        assert len(res.selected) == 6
        assert len(set(res.selected)) == 6
        assert set(res.selected) <= set(pool.unlabeled_idx.tolist())

    def test_deterministic(self):
        pool = make_pool(np.random.default_rng(0).standard_normal((20, 2)), labeled=[0])
        assert random_acquire(pool, 5, seed=9).selected == random_acquire(pool, 5, seed=9).selected

    def test_too_many_requested(self):
        pool = make_pool(np.eye(3), labeled=[0])
        with pytest.raises(ValueError):
            random_acquire(pool, 3, seed=0)


class TestModelScored:
    def softmax_setup(self):
        # scalar logit pairs (a, -a): |a| orders both entropy (small |a|
        # first) and max-probability confidence (small |a| first)
        spec = NetworkSpec(1, (), 2, ntk_parameterization=False)
        params = ParamVector(np.array([1.0, -1.0]), spec.layer_offsets)
        X = np.array([[0.1], [2.0], [0.5], [1.0]])
        pool = make_pool(X, labeled=[])
        return pool, params, spec

    def test_entropy_picks_most_uncertain(self):
        pool, params, spec = self.softmax_setup()
        res = entropy_acquire(pool, params, spec, 2)
        assert res.selected == (0, 2)
        assert res.strategy == "entropy"

    def test_confidence_picks_least_confident(self):
        pool, params, spec = self.softmax_setup()
        res = confidence_acquire(pool, params, spec, 2)
        assert res.selected == (0, 2)

    def test_uniform_predictions_tie_to_lower_index(self):
        spec = NetworkSpec(2, (), 3, ntk_parameterization=False)
        params = ParamVector(np.zeros(6), spec.layer_offsets)
        pool = make_pool(np.random.default_rng(4).standard_normal((6, 2)), labeled=[2])
        res = entropy_acquire(pool, params, spec, 3)
        assert res.selected == (0, 1, 3)

    def test_egl_matches_brute_force(self):
        spec = NetworkSpec(3, (6,), 2, use_bias=True)
        params = init_network(spec, 2)
        rng = np.random.default_rng(5)
        pool = make_pool(rng.standard_normal((9, 3)), labeled=[0])
        res = egl_acquire(pool, params, spec, 4)
        X = pool.features[pool.unlabeled_idx]
        probs = softmax(forward_batch(params, spec, X))
        J = jacobian_batch(params, spec, X)
        scores = []
        for i in range(len(X)):
            K = J[i] @ J[i].T
            s = 0.0
            for y in range(2):
                d = probs[i] - np.eye(2)[y]
                s += probs[i, y] * (d @ K @ d)
            scores.append(s)
        order = np.argsort(-np.asarray(scores), kind="stable")
        expected = tuple(int(pool.unlabeled_idx[i]) for i in order[:4])
        assert res.selected == expected

    def test_egl_zero_weights_scale_with_input_norm(self):
        # W = 0: probs are uniform, Kxx = ||x||^2 I, so the score is
        # proportional to ||x||^2 and selection is by descending norm
        spec = NetworkSpec(2, (), 2, ntk_parameterization=False)
        params = ParamVector(np.zeros(4), spec.layer_offsets)
        X = np.array([[3.0, 0.0], [1.0, 0.0], [0.0, 2.0], [0.1, 0.1]])
        pool = make_pool(X, labeled=[])
        res = egl_acquire(pool, params, spec, 3)
        assert res.selected == (0, 2, 1)


class TestDistributionalChecks:
    def test_random_frequencies_within_three_sigma(self):
        # each of the 10 unlabeled indices is picked with marginal
        # probability Q/U = 0.3 per draw; over 10^4 independent draws
        # the count is Binomial(10^4, 0.3), checked at 3 sigma
        pool = make_pool(np.zeros((10, 2)), labeled=[])
        draws = 10_000
        counts = np.zeros(10)
        for seed in range(draws):
            for i in random_acquire(pool, 3, seed=seed).selected:
                counts[i] += 1
        p = 3 / 10
        sigma = np.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) <= 3 * sigma)

    def test_entropy_matches_logsumexp_oracle(self):
        # H(softmax(z)) = logsumexp(z) - sum softmax(z) * z, a route
        # that never forms p log p
        rng = np.random.default_rng(3)
        spec = NetworkSpec(4, (8,), 5)
        params = init_network(spec, rng)
        pool = make_pool(rng.standard_normal((12, 4)), labeled=[2], num_classes=5)
        X = pool.features[pool.unlabeled_idx]
        Z = forward_batch(params, spec, X)
        probs = softmax(Z)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(probs > 0.0, probs * np.log(probs), 0.0)
        entropy = -plogp.sum(axis=1)
        shift = Z - Z.max(axis=1, keepdims=True)
        lse = Z.max(axis=1) + np.log(np.exp(shift).sum(axis=1))
        oracle = lse - (probs * Z).sum(axis=1)
        assert np.max(np.abs(entropy - oracle)) <= 1e-12
        res = entropy_acquire(pool, params, spec, 11)
        order = np.argsort(-oracle, kind="stable")
        assert res.selected == tuple(int(pool.unlabeled_idx[i]) for i in order)

    def test_confidence_equals_entropy_ranking_binary(self):
        # for C=2 both orders are monotone in |p - 1/2|, so the full
        # rankings coincide; enumerated on random nets and inputs
        for seed in range(10):
            rng = np.random.default_rng(seed)
            spec = NetworkSpec(3, (6,), 2)
            params = init_network(spec, rng)
            pool = make_pool(rng.standard_normal((15, 3)), labeled=[])
            by_entropy = entropy_acquire(pool, params, spec, 15).selected
            by_confidence = confidence_acquire(pool, params, spec, 15).selected
            assert by_entropy == by_confidence

    def test_egl_logistic_closed_form(self):
        # single linear layer, C=2: the per-sample output kernel is
        # ||x||^2 I, and sum_y p_y ||p - e_y||^2 = 2 p (1-p), so the
        # score is exactly 2 p (1-p) ||x||^2
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            spec = NetworkSpec(3, (), 2, ntk_parameterization=False)
            params = ParamVector(rng.standard_normal(6), spec.layer_offsets)
            pool = make_pool(rng.standard_normal((10, 3)), labeled=[])
            X = pool.features
            W = params.values.reshape(2, 3)
            Z = X @ W.T
            p = 1.0 / (1.0 + np.exp(-(Z[:, 0] - Z[:, 1])))
            closed = 2.0 * p * (1.0 - p) * np.einsum("nd,nd->n", X, X)
            order = np.argsort(-closed, kind="stable")
            res = egl_acquire(pool, params, spec, 10)
            assert res.selected == tuple(int(pool.unlabeled_idx[i]) for i in order)


class TestOracleHygiene:
    def test_only_balanced_reads_hidden_labels(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((30, 3))
        labels = (np.arange(30) % 3).astype(np.int64)
        spec = NetworkSpec(3, (5,), 3)
        params = init_network(spec, 0)

        pool = Pool(X, labels, labeled_idx=[0, 1, 2], num_classes=3)
        crc_acquire(pool, params, spec, 4, 2, seed=0)
        random_acquire(pool, 4, seed=0)
        entropy_acquire(pool, params, spec, 4)
        confidence_acquire(pool, params, spec, 4)
        egl_acquire(pool, params, spec, 4)
        assert pool.oracle_reads == 0

        crc_acquire_balanced(pool, params, spec, per_class=1, seed=0)
        assert pool.oracle_reads == 27


class TestResultSerialization:
    def test_as_dict_round_structure(self):
        pool = make_pool(np.eye(4), labeled=[0])
        spec, params = scalar_linear(4)
        res = crc_acquire(pool, params, spec, 2, 1, seed=0)
        d = res.as_dict()
        assert d["strategy"] == "crc"
        assert d["seed"] == 0
        assert isinstance(d["selected"], list)
        assert all(isinstance(i, int) for i in d["selected"])
        for g in d["group_scores"]:
            assert set(g) == {"group_index", "members", "score", "degenerate", "selected"}

    def test_seed_echo_forms(self):
        pool = make_pool(np.eye(4), labeled=[0])
        spec, params = scalar_linear(4)
        stream = np.random.SeedSequence(7)
        assert crc_acquire(pool, params, spec, 2, 1, seed=stream).seed is None
        assert random_acquire(pool, 2, seed=9).seed == 9
        assert entropy_acquire(pool, params, spec, 2).seed is None
