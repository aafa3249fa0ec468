import numpy as np
import pytest

from mvembed.cca2 import fit_cca_svd
from mvembed.errors import InvalidInput
from mvembed.eval import rank_by_centroid, score_rankings
from mvembed.synth import (MissingViewSpec, ProbCcaSpec, RetrievalSpec,
                           gen_missing_views, gen_prob_cca, gen_retrieval)


def test_noiseless_prob_cca_is_perfectly_correlated():
    X, Y, truth = gen_prob_cca(ProbCcaSpec(n=500, k=3, p=3, q=3, sigma=0.0, seed=1))
    np.testing.assert_allclose(X, truth.z @ truth.W_x.T)
    rho = fit_cca_svd(X, Y, ridge=0.0).correlations
    np.testing.assert_allclose(rho, 1.0, atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_noise_dominated_prob_cca_is_uncorrelated(seed):
    X, Y, _ = gen_prob_cca(ProbCcaSpec(n=50_000, sigma=100.0, seed=seed))
    assert fit_cca_svd(X, Y).correlations[0] <= 0.1


def test_prob_cca_latent_covariance_and_means():
    n = 50_000
    X, _, truth = gen_prob_cca(ProbCcaSpec(n=n, k=2, mu_x=tuple(range(10)), seed=2))
    cov = np.cov(truth.z, rowvar=False)
    assert np.max(np.abs(cov - np.eye(2))) <= 5 / np.sqrt(n)
    np.testing.assert_allclose(X.mean(axis=0), np.arange(10), atol=0.1)


def test_prob_cca_eigengap():
    X, Y, _ = gen_prob_cca(ProbCcaSpec(n=50_000, k=2, p=10, q=10, sigma=1.0, seed=5))
    rho = fit_cca_svd(X, Y).correlations
    assert rho[1] - rho[2] >= 0.2


def test_missing_views_no_missingness():
    views, masks, truth = gen_missing_views(MissingViewSpec(n=400, rho=0.0, seed=0))
    assert all(m.all() for m in masks)
    assert np.all(truth.singleton_view == -1)
    nnz_per_row = np.diff(truth.latent.indptr)
    assert np.all(nnz_per_row == 5)
    density = np.mean([A.nnz / A.shape[0] ** 2 for A in truth.maps])
    assert abs(density - 0.10) < 0.01
    for X, A in zip(views, truth.maps):
        np.testing.assert_allclose(X.toarray(), (truth.latent @ A).toarray())


def test_missing_views_full_missingness():
    n = 3000
    views, masks, truth = gen_missing_views(MissingViewSpec(n=n, n_latent=30, rho=1.0, seed=1))
    counts = np.sum(masks, axis=0)
    assert np.all(counts == 1)
    sd = np.sqrt(n * (1 / 3) * (2 / 3))
    for m in masks:
        assert abs(m.sum() - n / 3) <= 3 * sd
    for X, m in zip(views, masks):
        assert X[~m].nnz == 0


def test_missing_views_paper_extreme():
    n = 1000
    _, masks, _ = gen_missing_views(MissingViewSpec(n=n, n_latent=30, rho=1 - 10 / n, seed=2))
    assert np.sum(np.all(masks, axis=0)) == 10


@pytest.mark.parametrize("rho", [0.25, 0.5, 0.9])
def test_missing_views_all_present_fraction(rho):
    n = 2000
    _, masks, _ = gen_missing_views(MissingViewSpec(n=n, n_latent=30, rho=rho, seed=3))
    frac = np.mean(np.all(masks, axis=0))
    assert abs(frac - (1 - rho)) <= 3 * np.sqrt(rho * (1 - rho) / n)


def test_generators_are_deterministic():
    a = gen_missing_views(MissingViewSpec(n=200, n_latent=20, rho=0.4, seed=9))
    b = gen_missing_views(MissingViewSpec(n=200, n_latent=20, rho=0.4, seed=9))
    for X, Y in zip(a[0], b[0]):
        assert (X != Y).nnz == 0
    for m1, m2 in zip(a[1], b[1]):
        np.testing.assert_array_equal(m1, m2)
    x1 = gen_prob_cca(ProbCcaSpec(seed=4))
    x2 = gen_prob_cca(ProbCcaSpec(seed=4))
    np.testing.assert_array_equal(x1[0], x2[0])
    np.testing.assert_array_equal(x1[1], x2[1])
    p1, l1, _ = gen_retrieval(RetrievalSpec(seed=4))
    p2, l2, _ = gen_retrieval(RetrievalSpec(seed=4))
    np.testing.assert_array_equal(p1, p2)
    np.testing.assert_array_equal(l1, l2)


def _centroid_report(points, tasks, ks):
    return score_rankings(tasks, [rank_by_centroid(points, t) for t in tasks], ks)


def test_retrieval_noiseless_clusters():
    points, _, tasks = gen_retrieval(RetrievalSpec(n=200, clusters=4, sigma=0.0, seed=0))
    assert _centroid_report(points, tasks, (1,)).macro["MRR"] == 1.0


def test_retrieval_single_cluster_all_relevant():
    points, _, tasks = gen_retrieval(RetrievalSpec(n=100, clusters=1, seed=0))
    assert len(tasks) == 1 and tasks[0].relevant.all()
    report = _centroid_report(points, tasks, (1, 50, 90))
    np.testing.assert_array_equal(report.precision, 1.0)


def test_retrieval_separated_clusters_recall():
    spec = RetrievalSpec(n=1000, clusters=5, sigma=0.05, seed=1)
    points, labels, tasks = gen_retrieval(spec)
    for task in tasks:
        assert len(task.exemplars) == 10
        members = np.flatnonzero(labels == labels[task.exemplars[0]])
        np.testing.assert_array_equal(task.exemplars, members[:10])
    size = int(tasks[0].relevant.sum())
    assert _centroid_report(points, tasks, (size,)).recall.mean() >= 0.99


def test_spec_validation():
    with pytest.raises(InvalidInput):
        gen_prob_cca(ProbCcaSpec(k=11))
    with pytest.raises(InvalidInput):
        gen_prob_cca(ProbCcaSpec(sigma=-1))
    with pytest.raises(InvalidInput):
        gen_missing_views(MissingViewSpec(rho=1.5))
    with pytest.raises(InvalidInput):
        gen_missing_views(MissingViewSpec(density=0.0))
    with pytest.raises(InvalidInput):
        gen_retrieval(RetrievalSpec(n=50, clusters=5, exemplars=10))
