import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvembed.errors import InvalidInput
from mvembed.eval import (RankingTask, pr_curve, random_ranking, rank_by_centroid,
                          score_rankings, zscore)


def _task(n_cand, relevant_ids, exemplars=(0,), offset=1):
    candidates = np.arange(offset, offset + n_cand)
    return RankingTask("t", np.asarray(exemplars), candidates, np.isin(candidates, relevant_ids))


def test_zscore_examples():
    rng = np.random.default_rng(0)
    E = rng.standard_normal((50, 4)) * [1, 10, 0.1, 3] + 5
    E[:, 2] = 7.25
    Z, means, stds = zscore(E)
    assert np.all(Z[:, 2] == 0.0) and stds[2] == 1.0
    keep = [0, 1, 3]
    assert np.max(np.abs(Z[:, keep].mean(axis=0))) <= 1e-10
    np.testing.assert_allclose(Z[:, keep].std(axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(zscore(Z)[0], Z, atol=1e-10)
    np.testing.assert_allclose(means, E.mean(axis=0))
    with pytest.raises(InvalidInput):
        zscore(E[:1])


def test_centroid_ranking_examples():
    E = np.array([[1.0, 0.0],    # exemplar
                  [0.5, 0.5],
                  [-1.0, 0.0],   # opposite the centroid
                  [0.0, 0.0],    # zero norm, ranked last
                  [3.0, 0.0],    # on the centroid direction
                  [0.0, 1.0]])
    task = RankingTask("t", [0], [1, 2, 3, 4, 5], [True, False, False, False, False])
    np.testing.assert_array_equal(rank_by_centroid(E, task), [4, 1, 5, 2, 3])


def test_ties_break_by_candidate_id():
    E = np.ones((5, 2))
    task = RankingTask("t", [4], [3, 0, 2, 1], [True, False, False, False])
    np.testing.assert_array_equal(rank_by_centroid(E, task), [0, 1, 2, 3])


def test_zero_centroid_keeps_id_order():
    E = np.array([[1.0, 0], [-1.0, 0], [2.0, 1], [0.5, 3]])
    task = RankingTask("t", [0, 1], [3, 2], [True, False])
    np.testing.assert_array_equal(rank_by_centroid(E, task), [2, 3])


def test_score_all_relevant_first():
    task = _task(20, [1, 2, 3])
    report = score_rankings([task], [task.candidates], ks=(1, 3, 10))
    np.testing.assert_allclose(report.precision[0], [1.0, 1.0, 0.3])
    np.testing.assert_allclose(report.recall[0], [1 / 3, 1.0, 1.0])
    assert report.reciprocal_rank[0] == 1.0


def test_single_relevant_at_rank_four():
    task = _task(10, [4])
    report = score_rankings([task], [task.candidates])
    assert report.reciprocal_rank[0] == 0.25
    assert report.macro["MRR"] == 0.25


def test_k_beyond_candidates_divides_by_k():
    task = _task(5, [1, 2])
    report = score_rankings([task], [task.candidates], ks=(10,))
    assert report.precision[0, 0] == pytest.approx(0.2)
    assert report.recall[0, 0] == 1.0


def test_report_schema():
    task = _task(5, [1])
    report = score_rankings([task], [task.candidates])
    assert report.columns() == ["P@1", "P@100", "P@1000", "R@1", "R@100", "R@1000", "MRR"]
    assert len(report.macro_row()) == 7


def test_random_ranking_recall_matches_hypergeometric():
    rng = np.random.default_rng(0)
    task = _task(1000, np.arange(1, 11))
    trials = [score_rankings([task], [random_ranking(task, rng)], ks=(100,)).recall[0, 0]
              for _ in range(200)]
    N, K, n = 1000, 10, 100
    mean = n / N
    var_hits = n * (K / N) * (1 - K / N) * (N - n) / (N - 1)
    sd_of_mean = np.sqrt(var_hits / K ** 2 / len(trials))
    assert abs(np.mean(trials) - mean) <= 3 * sd_of_mean


def test_scale_invariance_and_permutation_equivariance():
    rng = np.random.default_rng(1)
    E = rng.standard_normal((40, 5))
    task = RankingTask("t", [0, 1, 2], np.arange(3, 40), np.arange(3, 40) < 10)
    base = rank_by_centroid(E, task)
    np.testing.assert_array_equal(rank_by_centroid(7.5 * E, task), base)
    # row a of the permuted matrix holds original row perm[a]
    perm = rng.permutation(40)
    inverse = np.argsort(perm)
    moved = RankingTask("t", inverse[task.exemplars], inverse[task.candidates], task.relevant)
    np.testing.assert_array_equal(perm[rank_by_centroid(E[perm], moved)], base)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**31 - 1))
def test_metric_bounds_and_recall_monotone(n_cand, seed):
    rng = np.random.default_rng(seed)
    relevant = rng.random(n_cand) < 0.3
    relevant[rng.integers(n_cand)] = True
    candidates = np.arange(1, n_cand + 1)
    task = RankingTask("t", [0], candidates, relevant)
    ks = (1, 2, 5, 10, 100)
    report = score_rankings([task], [rng.permutation(candidates)], ks)
    values = np.concatenate([report.precision.ravel(), report.recall.ravel(), report.reciprocal_rank])
    assert np.all((values >= 0) & (values <= 1))
    assert report.reciprocal_rank[0] > 0
    assert np.all(np.diff(report.recall[0]) >= 0)


def test_pr_curve_rows():
    task = _task(10, [1, 5])
    curve = pr_curve([task], [task.candidates], (1, 5, 10))
    np.testing.assert_allclose(curve, [[1, 1.0, 0.5], [5, 0.4, 1.0], [10, 0.2, 1.0]])


def test_validation():
    with pytest.raises(InvalidInput):
        RankingTask("t", [], [1, 2], [True, False])
    with pytest.raises(InvalidInput):
        RankingTask("t", [1], [1, 2], [True, False])
    with pytest.raises(InvalidInput):
        RankingTask("t", [0], [1, 2], [False, False])
    with pytest.raises(InvalidInput):
        RankingTask("t", [0], [1, 2], [True])
    task = _task(3, [1])
    with pytest.raises(InvalidInput):
        score_rankings([task], [np.array([1, 2])])
    with pytest.raises(InvalidInput):
        score_rankings([task], [task.candidates], ks=(0,))
    with pytest.raises(InvalidInput):
        score_rankings([task], [])
