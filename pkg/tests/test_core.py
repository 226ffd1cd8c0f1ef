"""Core primitives: validation, top-k selection, thresholding."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predsets.core import (
    ScoreSet,
    TieBreakPolicy,
    threshold_set,
    top_indices,
    validate_probability_vector,
)
from predsets.errors import (
    KOutOfRange,
    NegativeEntry,
    SumOutOfTolerance,
    TooFewClasses,
)


def prob_vectors(min_L=2, max_L=8):
    """Random probability vectors as lists (hypothesis strategy)."""
    return (
        st.lists(
            st.floats(
                min_value=1e-6, max_value=1.0, allow_nan=False
            ),
            min_size=min_L,
            max_size=max_L,
        )
        .map(lambda xs: (np.array(xs) / np.sum(xs)))
    )


class TestValidateProbabilityVector:
    def test_exact_sum_ok(self):
        p = validate_probability_vector([0.5, 0.3, 0.2], tol=1e-6)
        assert np.array_equal(p, [0.5, 0.3, 0.2])

    def test_sum_out_of_tolerance(self):
        with pytest.raises(SumOutOfTolerance) as exc:
            validate_probability_vector([0.5, 0.6], tol=1e-6)
        assert exc.value.actual_sum == pytest.approx(1.1)

    def test_too_few_classes(self):
        with pytest.raises(TooFewClasses):
            validate_probability_vector([1.0], tol=1e-6)

    def test_negative_entry(self):
        with pytest.raises(NegativeEntry):
            validate_probability_vector([1.2, -0.2])

    def test_no_silent_renormalization(self):
        # within tolerance the entries are returned untouched
        raw = [0.5000004, 0.4999999]
        p = validate_probability_vector(raw, tol=1e-5)
        assert p[0] == raw[0] and p[1] == raw[1]

    def test_result_read_only(self):
        p = validate_probability_vector([0.5, 0.5])
        with pytest.raises(ValueError):
            p[0] = 0.3


class TestTopIndices:
    def test_distinct_order(self):
        assert top_indices(np.array([0.5, 0.3, 0.2]), 2).tolist() == [1, 2]

    def test_full_tie_ascending_policy(self):
        p = np.array([0.25, 0.25, 0.25, 0.25])
        assert top_indices(p, 2).tolist() == [1, 2]

    def test_tie_at_top_smaller_index(self):
        assert top_indices(np.array([0.1, 0.4, 0.4, 0.1]), 1).tolist() == [2]

    def test_k_zero_and_k_L(self):
        p = np.array([0.5, 0.3, 0.2])
        assert top_indices(p, 0).tolist() == []
        assert top_indices(p, 3).tolist() == [1, 2, 3]

    def test_k_out_of_range(self):
        p = np.array([0.5, 0.5])
        with pytest.raises(KOutOfRange):
            top_indices(p, 3)
        with pytest.raises(KOutOfRange):
            top_indices(p, -1)

    @given(prob_vectors(), st.data())
    @settings(max_examples=200, deadline=None)
    def test_nested_in_k(self, p, data):
        L = p.size
        k1 = data.draw(st.integers(0, L))
        k2 = data.draw(st.integers(k1, L))
        small = set(top_indices(p, k1).tolist())
        large = set(top_indices(p, k2).tolist())
        assert small <= large

    @given(prob_vectors(), st.integers(0, 8))
    @settings(max_examples=200, deadline=None)
    def test_included_probs_dominate_excluded(self, p, k):
        k = min(k, p.size)
        inside = top_indices(p, k)
        outside = np.setdiff1d(np.arange(1, p.size + 1), inside)
        if inside.size and outside.size:
            assert p[inside - 1].min() >= p[outside - 1].max()


class TestThresholdSet:
    def test_direct_comparison(self):
        p = np.array([0.5, 0.3, 0.2])
        assert threshold_set(p, 0.25).tolist() == [1, 2]

    def test_theta_zero_includes_all(self):
        assert threshold_set(np.array([0.5, 0.3, 0.2]), 0.0).tolist() == [1, 2, 3]

    def test_theta_above_one_excludes_all(self):
        assert threshold_set(np.array([0.5, 0.3, 0.2]), 1.01).tolist() == []

    def test_non_strict_at_one(self):
        assert threshold_set(np.array([1.0, 0.0]), 1.0).tolist() == [1]

    @given(prob_vectors(), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=200, deadline=None)
    def test_antitone_in_theta(self, p, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        assert set(threshold_set(p, hi).tolist()) <= set(
            threshold_set(p, lo).tolist()
        )

    @given(prob_vectors())
    @settings(max_examples=200, deadline=None)
    def test_threshold_at_kth_largest_equals_topk(self, p):
        # distinct entries required for the identity
        if np.unique(p).size != p.size:
            return
        for k in range(1, p.size + 1):
            theta = np.sort(p)[::-1][k - 1]
            assert np.array_equal(threshold_set(p, theta), top_indices(p, k))

    def test_determinism(self):
        p = np.array([0.4, 0.1, 0.4, 0.1])
        runs = [threshold_set(p, 0.4).tolist() for _ in range(5)]
        runs += [top_indices(p, 2).tolist() for _ in range(5)]
        assert runs[:5] == [runs[0]] * 5
        assert runs[5:] == [[1, 3]] * 5


class TestTieBreakPolicy:
    def test_single_mode(self):
        assert TieBreakPolicy().mode == "ascending-label-index"
        with pytest.raises(ValueError):
            TieBreakPolicy(mode="random")


class TestScoreSet:
    def test_shared_L_and_labels(self):
        s = ScoreSet(
            ids=["a", "b"],
            probs=[[0.6, 0.4], [0.1, 0.9]],
            labels=[1, 0],
        )
        assert s.n == 2 and s.L == 2
        assert s.labeled_mask.tolist() == [True, False]
        assert not s.fully_labeled

    def test_logit_consistency_enforced(self):
        z = np.log(np.array([[0.6, 0.4]]))
        ScoreSet(ids=["a"], probs=[[0.6, 0.4]], logits=z)  # consistent
        with pytest.raises(ValueError):
            ScoreSet(ids=["a"], probs=[[0.6, 0.4]], logits=[[5.0, 0.0]])

    def test_row_sum_checked(self):
        with pytest.raises(SumOutOfTolerance):
            ScoreSet(ids=["a"], probs=[[0.7, 0.7]])
