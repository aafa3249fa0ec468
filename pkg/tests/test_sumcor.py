import numpy as np
import pytest
import scipy.sparse as sp

from mvembed.cca2 import fit_cca_svd
from mvembed.errors import InvalidInput
from mvembed.sumcor import (LasccaConfig, consensus_embedding, fit_lascca,
                            h_compute, mask_accounting, proportion_correlation,
                            sumcor_objective)
from mvembed.synth import MissingViewSpec, gen_missing_views

EXACT = LasccaConfig(k=3, cg_max_iters=500, cg_rel_tol=1e-14)


def _views(seed, n=50, dims=(6, 5, 4)):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 3))
    return [z @ rng.standard_normal((3, d)) + 0.3 * rng.standard_normal((n, d)) for d in dims]


def _random_G(seed, n, k, V):
    rng = np.random.default_rng(seed)
    return [np.linalg.qr(rng.standard_normal((n, k)))[0] for _ in range(V)]


def test_mask_accounting_definitions():
    rng = np.random.default_rng(0)
    masks = [rng.random(40) < 0.5 for _ in range(4)]
    acct = mask_accounting(masks, robust=True)
    for i in range(4):
        others = sum(masks[j].astype(int) for j in range(4) if j != i)
        np.testing.assert_array_equal(acct.Kscript[i], others)
        np.testing.assert_array_equal(acct.Kbb[i], (others > 0) & masks[i])
    vanilla = mask_accounting(masks, robust=False)
    for i in range(4):
        assert np.all(vanilla.Kscript[i] == 3)
        np.testing.assert_array_equal(vanilla.Kbb[i], masks[i])


def _pinv_lstsq(X, rows, T):
    return np.linalg.pinv(X[rows]) @ T[rows]


def _dense_h(i, views, G, acct):
    V = len(views)
    n, k = views[i].shape[0], G[i].shape[1]
    P = np.zeros((n, k))
    for j in range(V):
        if j == i:
            continue
        rows = acct.Kbb[j]
        C = np.zeros((n, k))
        C[rows] = views[j][rows] @ _pinv_lstsq(views[j], rows, G[j])
        P += C
    for e in range(n):
        P[e] = P[e] * V / acct.Kscript[i][e] if acct.Kscript[i][e] > 0 else 0.0
    rows = acct.Kbb[i]
    H = np.zeros((n, k))
    H[rows] = views[i][rows] @ _pinv_lstsq(views[i], rows, P)
    return H


@pytest.mark.parametrize("robust", [True, False])
def test_h_compute_matches_pseudo_inverse_oracle(robust):
    views = _views(1)
    rng = np.random.default_rng(2)
    masks = [rng.random(50) < 0.7 for _ in views]
    acct = mask_accounting(masks, robust)
    G = _random_G(3, 50, 3, 3)
    for i in range(3):
        H = h_compute(i, views, G, acct, EXACT)
        np.testing.assert_allclose(H, _dense_h(i, views, G, acct), atol=1e-6)


def test_h_compute_two_views_doubles_other_fit():
    views = _views(4, dims=(5, 5))
    acct = mask_accounting([np.ones(50, bool)] * 2)
    G = _random_G(5, 50, 3, 2)
    C1 = views[1] @ _pinv_lstsq(views[1], slice(None), G[1])
    expected = views[0] @ _pinv_lstsq(views[0], slice(None), 2.0 * C1)
    np.testing.assert_allclose(h_compute(0, views, G, acct, EXACT), expected, atol=1e-6)


def test_h_compute_zero_rows_without_counterpart():
    views = _views(6)
    masks = [np.ones(50, bool) for _ in views]
    masks[1][:5] = False
    masks[2][:5] = False
    acct = mask_accounting(masks)
    H = h_compute(0, views, _random_G(7, 50, 3, 3), acct, EXACT)
    assert np.all(H[:5] == 0.0)
    assert np.all(np.abs(H[5:]).sum(axis=1) > 0)


def test_objective_examples():
    X = np.random.default_rng(8).standard_normal((40, 4))
    R = np.linalg.qr(X)[1]
    U = np.linalg.inv(R)[:, :2]  # X U has orthonormal columns
    views = [X, X.copy(), X.copy()]
    assert sumcor_objective([U] * 3, views) == pytest.approx(2 * 3 * 2, abs=1e-10)
    assert proportion_correlation([U] * 3, views) == pytest.approx(1.0, abs=1e-12)
    zeros = [np.zeros((4, 2))] * 3
    assert sumcor_objective(zeros, views) == 0.0
    assert proportion_correlation(zeros, views) == 0.0


def test_objective_triple_loop_oracle():
    rng = np.random.default_rng(9)
    views = _views(9, n=12, dims=(3, 2, 4))
    masks = [rng.random(12) < 0.7 for _ in views]
    U = [rng.standard_normal((X.shape[1], 2)) for X in views]
    oracle = 0.0
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            for e in range(12):
                if masks[i][e] and masks[j][e]:
                    for c in range(2):
                        oracle += (views[i][e] @ U[i][:, c]) * (views[j][e] @ U[j][:, c])
    assert sumcor_objective(U, views, masks) == pytest.approx(oracle, abs=1e-10)


def test_identical_views_reach_cca_optimum():
    X = np.random.default_rng(10).standard_normal((200, 5))
    views = [X, X.copy()]
    model = fit_lascca(views, None, LasccaConfig(k=2, epochs=5, seed=0))
    rho = fit_cca_svd(X, X.copy(), k=2, ridge=0.0).correlations
    assert model.objective_trace[-1] == pytest.approx(2 * rho.sum(), abs=1e-3)
    assert proportion_correlation(model, views) == pytest.approx(1.0, abs=1e-3)


def test_robust_and_vanilla_agree_without_missingness():
    views, masks, _ = gen_missing_views(MissingViewSpec(n=500, n_latent=30, rho=0.0, seed=1))
    cfg = dict(k=4, epochs=3, seed=2)
    a = fit_lascca(views, masks, LasccaConfig(robust=True, **cfg))
    b = fit_lascca(views, masks, LasccaConfig(robust=False, **cfg))
    np.testing.assert_allclose(a.objective_trace, b.objective_trace, atol=1e-6)


def test_fit_invariants_and_determinism():
    views, masks, _ = gen_missing_views(MissingViewSpec(n=600, n_latent=30, rho=0.5, seed=3))
    cfg = LasccaConfig(k=4, epochs=4, seed=5)
    model = fit_lascca(views, masks, cfg)
    assert len(model.objective_trace) == 4
    for G in model.G:
        assert np.max(np.abs(G.T @ G - np.eye(4))) <= 1e-6
    assert model.objective_trace[-1] >= model.initial_objective
    again = fit_lascca(views, masks, cfg)
    np.testing.assert_allclose(again.objective_trace, model.objective_trace, atol=1e-8)
    for a, b in zip(model.U, again.U):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("seed", range(3))
def test_final_objective_at_least_initial(seed):
    views = _views(seed, n=80)
    rng = np.random.default_rng(seed)
    masks = [rng.random(80) < 0.8 for _ in views]
    masks[0] |= ~np.any(masks, axis=0)
    for robust in (True, False):
        model = fit_lascca(views, masks, LasccaConfig(k=2, epochs=3, robust=robust, seed=seed))
        assert model.objective_trace[-1] >= model.initial_objective


def test_mask_mutation_invariance():
    views = _views(11, n=80)
    rng = np.random.default_rng(12)
    masks = [rng.random(80) < 0.6 for _ in views]
    masks[0] |= ~np.any(masks, axis=0)
    cfg = LasccaConfig(k=2, epochs=3, seed=1)
    base = fit_lascca(views, masks, cfg)
    acct = base.accounting
    mutated = []
    for X, keep in zip(views, acct.Kbb):
        Y = X.copy()
        Y[~keep] = rng.standard_normal(Y[~keep].shape) * 100
        mutated.append(Y)
    again = fit_lascca(mutated, masks, cfg)
    np.testing.assert_allclose(again.objective_trace, base.objective_trace, atol=1e-12)
    for a, b in zip(base.U, again.U):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_sparse_views_match_dense():
    views, masks, _ = gen_missing_views(MissingViewSpec(n=300, n_latent=20, rho=0.3, seed=4))
    # converged CG so that early-stopping decisions cannot differ
    cfg = LasccaConfig(k=3, epochs=2, seed=0, cg_max_iters=200, cg_rel_tol=1e-12)
    a = fit_lascca(views, masks, cfg)
    b = fit_lascca([X.toarray() for X in views], masks, cfg)
    np.testing.assert_allclose(a.objective_trace, b.objective_trace, rtol=1e-8)
    assert sp.issparse(views[0])


def test_consensus_embedding_averages_present_views():
    views = _views(13, n=10)
    masks = [np.ones(10, bool), np.ones(10, bool), np.zeros(10, bool)]
    masks[1][0] = False
    U = [np.ones((X.shape[1], 2)) for X in views]
    E = consensus_embedding(U, views, masks)
    np.testing.assert_allclose(E[0], views[0][0] @ U[0])
    np.testing.assert_allclose(E[1], 0.5 * (views[0][1] @ U[0] + views[1][1] @ U[1]))


def test_errors():
    views = _views(14, n=20)
    with pytest.raises(InvalidInput):
        fit_lascca(views[:1], None, LasccaConfig(k=2))
    masks = [np.ones(20, bool) for _ in views]
    for m in masks:
        m[3] = False
    with pytest.raises(InvalidInput):
        fit_lascca(views, masks, LasccaConfig(k=2))
    with pytest.raises(InvalidInput):
        LasccaConfig(epochs=0)
    with pytest.raises(InvalidInput):
        LasccaConfig(k=0)
    with pytest.raises(InvalidInput):
        sumcor_objective([np.zeros((2, 1))] * 3, views)
