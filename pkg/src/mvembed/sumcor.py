"""
Robust LasCCA for the SUMCOR generalized CCA objective.

Each view keeps its own orthonormal auxiliary variate ``G_i``.  Views are
updated round-robin: ``h_compute`` regresses every other view onto its
variate, averages those fits (rescaled by how many other views are present
for each example), regresses view ``i`` onto that average, and the polar
factor of the result becomes the new ``G_i``.  The canonical map ``U_i`` is
the least-squares fit of ``X_i`` onto ``G_i``.

Masks: ``K[i][e]`` says example ``e`` has data in view ``i``.  The robust
variant only fits view ``i`` on examples present in view ``i`` and in at
least one other view; the vanilla variant fits on every example present in
view ``i`` and always rescales by ``V / (V - 1)``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InvalidInput
from .numerics import as_matrix, cg_least_squares, orthonormal_columns


@dataclass(frozen=True)
class LasccaConfig:
    k: int = 10
    epochs: int = 100
    cg_max_iters: int = 20
    cg_rel_tol: float = 1e-5
    robust: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInput("k must be >= 1")
        if self.epochs < 1:
            raise InvalidInput("epochs must be >= 1")
        if self.cg_max_iters < 1 or self.cg_rel_tol <= 0:
            raise InvalidInput("cg_max_iters must be >= 1 and cg_rel_tol > 0")


@dataclass
class MaskAccounting:
    K: List[np.ndarray]
    Kscript: List[np.ndarray]  # number of *other* views present, per example
    Kbb: List[np.ndarray]  # present in view i and in at least one other view

    @property
    def n_views(self):
        return len(self.K)


def mask_accounting(masks, robust: bool = True) -> MaskAccounting:
    K = [np.asarray(m, dtype=bool) for m in masks]
    V = len(K)
    total = np.sum(K, axis=0)
    if robust:
        Kscript = [total - Ki for Ki in K]
        Kbb = [(Ks > 0) & Ki for Ks, Ki in zip(Kscript, K)]
    else:
        Kscript = [np.full(len(Ki), V - 1) for Ki in K]
        Kbb = [Ki.copy() for Ki in K]
    return MaskAccounting(K, Kscript, Kbb)


@dataclass
class LasccaModel:
    G: List[np.ndarray]
    U: List[np.ndarray]
    objective_trace: List[float]
    config: LasccaConfig
    initial_objective: float = 0.0
    accounting: Optional[MaskAccounting] = field(default=None, repr=False)


def _check_views(views, masks):
    if len(views) < 2:
        raise InvalidInput("LasCCA needs at least two views")
    views = [as_matrix(X) for X in views]
    n = views[0].shape[0]
    if any(X.shape[0] != n for X in views):
        raise InvalidInput("all views must share the number of examples")
    if masks is None:
        masks = [np.ones(n, dtype=bool) for _ in views]
    masks = [np.asarray(m, dtype=bool).ravel() for m in masks]
    if len(masks) != len(views) or any(len(m) != n for m in masks):
        raise InvalidInput("need one length-n mask per view")
    return views, masks


def _masked_lstsq(X, rows, target, warm, cfg):
    """argmin_R || X[rows] R - target[rows] ||_F by CG."""
    return cg_least_squares(X[rows], target[rows], warm_start=warm,
                            max_iters=cfg.cg_max_iters, rel_tol=cfg.cg_rel_tol)


def h_compute(i, views, G, acct: MaskAccounting, cfg: LasccaConfig, warm=None):
    """Compute H_i from the other views' auxiliary variates.

    ``G`` holds one variate per view (entry ``i`` is ignored).  ``warm`` is
    an optional dict of CG warm starts keyed by ``("R", j)`` and ``("E", i)``;
    it is updated in place with the new solutions.
    """
    V = len(views)
    n = views[i].shape[0]
    k = next(g.shape[1] for j, g in enumerate(G) if j != i and g is not None)
    warm = {} if warm is None else warm
    P = np.zeros((n, k))
    for j in range(V):
        if j == i:
            continue
        rows = acct.Kbb[j]
        R = _masked_lstsq(views[j], rows, G[j], warm.get(("R", j)), cfg)
        warm[("R", j)] = R
        P[rows] += views[j][rows] @ R
    counts = acct.Kscript[i]
    scale = np.zeros(n)
    nz = counts > 0
    scale[nz] = V / counts[nz]
    P *= scale[:, None]

    rows = acct.Kbb[i]
    E = _masked_lstsq(views[i], rows, P, warm.get(("E", i)), cfg)
    warm[("E", i)] = E
    H = np.zeros((n, k))
    H[rows] = views[i][rows] @ E
    return H


def _init_variates(n, k, V, seed):
    rng = np.random.default_rng(seed)
    return [orthonormal_columns(rng.standard_normal((n, k))) for _ in range(V)]


def fit_lascca(views, masks, cfg: LasccaConfig) -> LasccaModel:
    views, masks = _check_views(views, masks)
    n = views[0].shape[0]
    if not np.any(masks, axis=0).all():
        missing = np.flatnonzero(~np.any(masks, axis=0))
        raise InvalidInput(f"{len(missing)} examples are absent from every view "
                           f"(first: {missing[0]})")
    if cfg.k > n:
        raise InvalidInput("k must be <= number of examples")
    V = len(views)
    acct = mask_accounting(masks, cfg.robust)
    G = _init_variates(n, cfg.k, V, cfg.seed)
    U = [_masked_lstsq(views[i], acct.Kbb[i], G[i], None, cfg) for i in range(V)]
    initial = sumcor_objective(U, views, masks)

    warm = {("R", i): U[i] for i in range(V)}
    trace = []
    for _ in range(cfg.epochs):
        for i in range(V):
            H = h_compute(i, views, G, acct, cfg, warm)
            if np.any(H):
                G[i] = orthonormal_columns(H)
            U[i] = _masked_lstsq(views[i], acct.Kbb[i], G[i], U[i], cfg)
            warm[("R", i)] = U[i]
        trace.append(sumcor_objective(U, views, masks))
    return LasccaModel(G, U, trace, cfg, initial, acct)


def _maps(model_or_maps):
    return model_or_maps.U if isinstance(model_or_maps, LasccaModel) else model_or_maps


def sumcor_objective(model, views, masks=None) -> float:
    """Sum over ordered view pairs of Tr[U_i^T X_i^T X_j U_j].

    Each pair only uses examples present in both views.  No rescaling is
    applied: the fitted maps satisfy the unit-variance constraint through
    ``X_i U_i ~= G_i``, so a perfectly correlated pair contributes k.
    """
    U = _maps(model)
    views, masks = _check_views(views, masks)
    if len(U) != len(views):
        raise InvalidInput("need one map per view")
    for X, Ui in zip(views, U):
        if Ui.shape[0] != X.shape[1]:
            raise InvalidInput("map rows must match view dimensionality")
    total = 0.0
    V = len(views)
    for i in range(V):
        for j in range(i + 1, V):
            rows = masks[i] & masks[j]
            if not rows.any():
                continue
            Zi = np.asarray(views[i][rows] @ U[i])
            Zj = np.asarray(views[j][rows] @ U[j])
            total += 2.0 * float(np.einsum("ij,ij->", Zi, Zj))
    return total


def proportion_correlation(model, views, masks=None) -> float:
    """SUMCOR objective over its ceiling k * V * (V - 1)."""
    U = _maps(model)
    V = len(U)
    k = U[0].shape[1]
    return sumcor_objective(U, views, masks) / (k * V * (V - 1))


def consensus_embedding(model, views, masks=None) -> np.ndarray:
    """Row-wise mean of X_i U_i over the views each example is present in."""
    U = _maps(model)
    views, masks = _check_views(views, masks)
    n, k = views[0].shape[0], U[0].shape[1]
    acc = np.zeros((n, k))
    for X, Ui, m in zip(views, U, masks):
        acc[m] += np.asarray(X[m] @ Ui)
    counts = np.sum(masks, axis=0).astype(float)
    counts[counts == 0] = 1.0
    return acc / counts[:, None]
