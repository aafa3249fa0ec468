"""
MAXVAR generalized CCA with per-view weights and missing-view masks.

The shared embedding ``G`` (n x k, orthonormal columns) spans the top
eigenvectors of the weighted sum of per-view ridge projections

    M = sum_i w_i K_i X_i (X_i^T K_i X_i + r I)^{-1} X_i^T K_i

and each view's map is the masked ridge regression
``U_i = (X_i^T K_i X_i + r I)^{-1} X_i^T K_i G``.  ``fit_gcca_mvlsa``
approximates the same column space from per-view truncated SVDs.

With ``scale_by_sv`` the columns of ``G`` are rotated to the principal axes
of ``S = sum_i w_i K_i X_i X_i^T K_i`` restricted to span(G) and scaled by
the square roots of the corresponding eigenvalues.  With a single view this
gives the uncentered PCA scores of that view.
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .cca2 import ColumnStats, NormalizationSpec, column_stats
from .errors import InvalidInput, TooLargeForExact
from .numerics import (as_dense, fix_signs, solve_psd, svd_topk, sym_eig_topk,
                       whiten)

EXACT_MAX_N = 20_000
SWEEP_WEIGHTS = (0.0, 0.25, 1.0)


@dataclass(frozen=True)
class GccaConfig:
    k: int
    view_weights: Optional[Sequence[float]] = None
    ridge: float = 1e-8
    per_view_rank: Optional[Union[int, Sequence[int]]] = None
    scale_by_sv: bool = False
    norm: NormalizationSpec = NormalizationSpec(center=False, scale=False)

    def weights(self, n_views):
        if self.view_weights is None:
            return np.ones(n_views)
        w = np.asarray(self.view_weights, dtype=np.float64)
        if len(w) != n_views:
            raise InvalidInput(f"got {len(w)} view weights for {n_views} views")
        if np.any(w < 0):
            raise InvalidInput("view weights must be >= 0")
        if not np.any(w > 0):
            raise InvalidInput("at least one view weight must be positive")
        return w


@dataclass(frozen=True)
class GccaModel:
    G: np.ndarray
    U: List[np.ndarray]
    eigenvalues: np.ndarray
    config: GccaConfig
    stats: List[ColumnStats]
    sv_scale: Optional[np.ndarray] = None

    def transform(self, i, X):
        """Project new rows of view ``i`` into the shared space."""
        X = as_dense(X)
        return self.stats[i].apply(X) @ self.U[i]


def _prepare(views, masks, cfg: GccaConfig):
    if not views:
        raise InvalidInput("need at least one view")
    views = [as_dense(X) for X in views]
    n = views[0].shape[0]
    if any(X.shape[0] != n for X in views):
        raise InvalidInput("all views must share the number of examples")
    if masks is None:
        masks = [np.ones(n, dtype=bool) for _ in views]
    masks = [np.asarray(m, dtype=bool).ravel() for m in masks]
    if len(masks) != len(views) or any(len(m) != n for m in masks):
        raise InvalidInput("need one length-n mask per view")
    if cfg.k < 1 or cfg.k > n:
        raise InvalidInput(f"k={cfg.k} must lie in [1, n={n}]")
    if cfg.ridge < 0:
        raise InvalidInput("ridge must be >= 0")
    w = cfg.weights(len(views))
    stats = [column_stats(X, cfg.norm, rows=m) for X, m in zip(views, masks)]
    # masked rows are never read: they are replaced by zeros here
    Xs = []
    for X, m, st in zip(views, masks, stats):
        Xm = np.zeros_like(X)
        Xm[m] = st.apply(X[m])
        Xs.append(Xm)
    return Xs, masks, w, stats


def _solve_maps(Xs, G, ridge):
    return [solve_psd(X.T @ X, X.T @ G, ridge) if X.any() else np.zeros((X.shape[1], G.shape[1]))
            for X in Xs]


def _scale_by_sv(G, Xs, w):
    """Rotate G to the principal axes of sum_i w_i X_i X_i^T within span(G)
    and scale each column by the square root of its eigenvalue."""
    B = np.hstack([np.sqrt(wi) * (G.T @ X) for wi, X in zip(w, Xs)])
    compressed = B @ B.T
    mu, R = np.linalg.eigh(0.5 * (compressed + compressed.T))
    mu, R = mu[::-1], R[:, ::-1]
    Gr = fix_signs(G @ R)
    return Gr * np.sqrt(np.clip(mu, 0.0, None)), mu


def fit_gcca_exact(views, masks, cfg: GccaConfig) -> GccaModel:
    Xs, masks, w, stats = _prepare(views, masks, cfg)
    n = Xs[0].shape[0]
    if n > EXACT_MAX_N:
        raise TooLargeForExact(f"n={n} exceeds {EXACT_MAX_N}; use fit_gcca_mvlsa")
    M = np.zeros((n, n))
    for wi, X in zip(w, Xs):
        if wi == 0 or not X.any():
            continue
        B = X @ whiten(X.T @ X, cfg.ridge)
        M += wi * (B @ B.T)
    eigenvalues, G = sym_eig_topk(M, cfg.k)
    return _finish(G, eigenvalues, Xs, w, cfg, stats)


def _finish(G, eigenvalues, Xs, w, cfg, stats):
    sv_scale = None
    if cfg.scale_by_sv:
        G, sv_scale = _scale_by_sv(G, Xs, w)
    U = _solve_maps(Xs, G, cfg.ridge)
    return GccaModel(G, U, eigenvalues, cfg, stats, sv_scale)


def fit_gcca_mvlsa(views, masks, cfg: GccaConfig) -> GccaModel:
    """MAXVAR from the left singular vectors of [sqrt(w_1) A_1, ..., sqrt(w_V) A_V].

    ``A_i`` are the top ``per_view_rank`` left singular vectors of the masked
    view; ``per_view_rank`` is one int or one per view.  Directions with zero
    singular value are dropped.  ``eigenvalues`` are the squared singular
    values of the concatenation.
    """
    if cfg.per_view_rank is None:
        raise InvalidInput("MV-LSA needs per_view_rank")
    Xs, masks, w, stats = _prepare(views, masks, cfg)
    n = Xs[0].shape[0]
    ranks = np.broadcast_to(np.asarray(cfg.per_view_rank, dtype=int), (len(Xs),))
    blocks = []
    for wi, X, rank in zip(w, Xs, ranks):
        if not 1 <= rank <= min(n, X.shape[1]):
            raise InvalidInput(f"per_view_rank={rank} must lie in "
                               f"[1, min(n, d)={min(n, X.shape[1])}]")
        if wi == 0 or not X.any():
            continue
        A, S, _ = svd_topk(X, int(rank))
        keep = S > 1e-12 * S[0]
        blocks.append(np.sqrt(wi) * A[:, keep])
    concat = np.hstack(blocks)
    if cfg.k > min(concat.shape):
        raise InvalidInput(f"k={cfg.k} exceeds the rank of the concatenated blocks "
                           f"({min(concat.shape)})")
    G, S, _ = svd_topk(concat, cfg.k)
    return _finish(G, S ** 2, Xs, w, cfg, stats)


def gcca_objective(model: GccaModel, views, masks=None) -> float:
    """sum_i w_i || K_i (G - X_i U_i) ||_F^2 with the model's normalization."""
    cfg = model.config
    views = [as_dense(X) for X in views]
    n = model.G.shape[0]
    if len(views) != len(model.U):
        raise InvalidInput("need one view per fitted map")
    if masks is None:
        masks = [np.ones(n, dtype=bool) for _ in views]
    w = cfg.weights(len(views))
    total = 0.0
    for wi, X, m, Ui, st in zip(w, views, masks, model.U, model.stats):
        m = np.asarray(m, dtype=bool)
        if X.shape != (n, Ui.shape[0]) or len(m) != n:
            raise InvalidInput("view shape does not match the model")
        resid = model.G[m] - st.apply(X[m]) @ Ui
        total += wi * float(np.sum(resid ** 2))
    return total


def weight_sweep_grid(n_views, levels=SWEEP_WEIGHTS):
    """All weight vectors over ``levels`` with at least one positive entry."""
    return [combo for combo in itertools.product(levels, repeat=n_views)
            if any(c > 0 for c in combo)]
