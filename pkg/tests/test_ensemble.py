"""Inverse-uncertainty ensemble fusion."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
from uqnet.ensemble import (
    EnsembleDecision,
    MemberPrediction,
    build_bank,
    ensemble_label,
    ensemble_scores,
    ensemble_uncertainty,
    fuse,
)
from uqnet.nn import NetworkConfig


def members_from(u_matrix):
    """MemberPredictions with the given (K, L) uncertainty matrix."""
    u = np.asarray(u_matrix, dtype=np.float64)
    return [
        MemberPrediction(
            member_id=f"m{k}",
            kernel_size=3 + 2 * k,
            mean_probs=np.full(u.shape[1], 1.0 / u.shape[1]),
            uncertainties=u[k],
        )
        for k in range(u.shape[0])
    ]


class TestScores:
    def test_single_member_two_class_hand_case(self):
        # E_l = mean of reciprocals: 1/0.5 = 2, 1/0.25 = 4.
        scores = ensemble_scores(members_from([[0.5, 0.25]]))
        assert_allclose(scores, [2.0, 4.0], rtol=1e-15)

    def test_two_member_average(self):
        # Class 0: (1/0.5 + 1/0.25)/2 = 3.
        scores = ensemble_scores(members_from([[0.5, 1.0], [0.25, 1.0]]))
        assert_allclose(scores, [3.0, 1.0], rtol=1e-15)

    def test_matches_transcription_oracle_on_random_sets(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            n_members = int(rng.integers(1, 8))
            n_classes = int(rng.integers(2, 6))
            u = rng.uniform(0.01, 10.0, size=(n_members, n_classes))
            got = ensemble_scores(members_from(u))
            want = oracles.ensemble_scores(u)
            assert_allclose(got, want, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="at least one"):
            ensemble_scores([])
        with pytest.raises(ValueError, match="classes"):
            ensemble_scores(members_from([[0.5, 0.5]]) + members_from([[1.0, 1.0, 1.0]]))
        with pytest.raises(ValueError, match="positive"):
            ensemble_scores(members_from([[0.5, 0.0]]))


class TestLabel:
    def test_dominance(self):
        # One very certain member on class 1 outvotes two vague ones.
        u = [[1.0, 1e-3], [1.0, 1.0], [1.0, 1.0]]
        scores = ensemble_scores(members_from(u))
        assert ensemble_label(scores) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert ensemble_label(np.array([2.0, 2.0, 1.0])) == 0
        assert ensemble_label(np.array([1.0, 3.0, 3.0])) == 1

    def test_argmax_invariant_under_global_scaling(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            u = rng.uniform(0.05, 5.0, size=(3, 4))
            base = ensemble_label(ensemble_scores(members_from(u)))
            for scale in (0.1, 3.0, 17.5):
                scaled = ensemble_label(ensemble_scores(members_from(u * scale)))
                assert scaled == base

    def test_empty_scores_rejected(self):
        with pytest.raises(ValueError):
            ensemble_label(np.array([]))


class TestUncertaintyAndFuse:
    def test_ensemble_uncertainty_is_reciprocal_score(self):
        u = [[0.5, 0.25], [0.125, 1.0]]
        scores = ensemble_scores(members_from(u))
        assert_allclose(ensemble_uncertainty(members_from(u)), 1.0 / scores, rtol=1e-15)

    def test_fuse_bundles_everything(self):
        members = members_from([[0.5, 0.25], [0.5, 0.25]])
        decision = fuse(members)
        assert isinstance(decision, EnsembleDecision)
        assert decision.label == 1
        assert_allclose(decision.scores, [2.0, 4.0], rtol=1e-15)
        assert_allclose(decision.ensemble_uncertainty, [0.5, 0.25], rtol=1e-15)
        assert decision.members == tuple(members)

    def test_member_permutation_invariance(self):
        rng = np.random.default_rng(3)
        u = rng.uniform(0.1, 2.0, size=(5, 3))
        base = ensemble_scores(members_from(u))
        perm = ensemble_scores(members_from(u[::-1]))
        assert_allclose(base, perm, rtol=1e-12)


class TestBuildBank:
    def test_configs_differ_only_in_kernel_size(self):
        base = NetworkConfig(input_side=8, kernel_size=3, channels_per_stage=(4, 6))
        bank = build_bank(base, (3, 5, 7))
        assert [cfg.kernel_size for cfg in bank] == [3, 5, 7]
        for cfg in bank:
            assert cfg.input_side == base.input_side
            assert cfg.channels_per_stage == base.channels_per_stage

    def test_even_or_tiny_kernels_rejected(self):
        base = NetworkConfig(input_side=8, kernel_size=3, channels_per_stage=(4, 6))
        with pytest.raises(ValueError):
            build_bank(base, (3, 4))
        with pytest.raises(ValueError):
            build_bank(base, (1,))
        with pytest.raises(ValueError):
            build_bank(base, ())
