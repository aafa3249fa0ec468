"""
Two-view canonical correlation analysis.

Both routes work on column-normalized views with covariances scaled by
1/(n-1) and a ridge added to the auto-covariances:

* ``fit_cca_svd`` takes the SVD of the whitened cross-covariance
  ``Cxx^{-1/2} Cxy Cyy^{-1/2}``; the singular values are the correlations.
* ``fit_cca_hotelling`` solves the eigenproblem for the view-2 weights and
  recovers the view-1 weights by substitution.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from .errors import InvalidInput
from .numerics import as_dense, fix_signs, svd_topk, sym_eig_topk, whiten

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True)
class NormalizationSpec:
    center: bool = True
    scale: bool = True


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X):
        return (X - self.mean) / self.std


def column_stats(X, norm: NormalizationSpec, rows=None) -> ColumnStats:
    """Per-column mean/std over ``rows`` (all rows by default).

    Zero-variance columns get std 1 so they center to zero instead of NaN.
    """
    Xr = X if rows is None else X[rows]
    d = X.shape[1]
    mean = Xr.mean(axis=0) if norm.center and len(Xr) else np.zeros(d)
    if norm.scale and len(Xr) > 1:
        std = np.sqrt(((Xr - mean) ** 2).sum(axis=0) / (len(Xr) - 1))
        std[~(std > 0)] = 1.0
    else:
        std = np.ones(d)
    return ColumnStats(mean, std)


@dataclass(frozen=True)
class CcaModel:
    U: np.ndarray
    V: np.ndarray
    correlations: np.ndarray
    stats_x: ColumnStats
    stats_y: ColumnStats
    ridge: float
    norm: NormalizationSpec

    @property
    def k(self):
        return len(self.correlations)


def _prepare(X, Y, k, ridge, norm):
    X, Y = as_dense(X), as_dense(Y)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise InvalidInput("views must have the same number of rows")
    if n < 2:
        raise InvalidInput("need at least two examples")
    if ridge < 0:
        raise InvalidInput("ridge must be >= 0")
    p, q = X.shape[1], Y.shape[1]
    if k is None:
        k = min(p, q)
    if not 1 <= k <= min(p, q):
        raise InvalidInput(f"k={k} must lie in [1, min(p, q)={min(p, q)}]")
    sx, sy = column_stats(X, norm), column_stats(Y, norm)
    Xn, Yn = sx.apply(X), sy.apply(Y)
    Cxx = Xn.T @ Xn / (n - 1)
    Cyy = Yn.T @ Yn / (n - 1)
    Cxy = Xn.T @ Yn / (n - 1)
    return k, sx, sy, Cxx, Cyy, Cxy


def fit_cca_svd(X, Y, k: Optional[int] = None, ridge: float = DEFAULT_RIDGE,
                norm: NormalizationSpec = NormalizationSpec()) -> CcaModel:
    k, sx, sy, Cxx, Cyy, Cxy = _prepare(X, Y, k, ridge, norm)
    Wx = whiten(Cxx, ridge)
    Wy = whiten(Cyy, ridge)
    Ut, S, Vt = svd_topk(Wx @ Cxy @ Wy, k)
    return CcaModel(Wx @ Ut, Wy @ Vt, S, sx, sy, ridge, norm)


def fit_cca_hotelling(X, Y, k: Optional[int] = None, ridge: float = DEFAULT_RIDGE,
                      norm: NormalizationSpec = NormalizationSpec()) -> CcaModel:
    """Hotelling's route.

    The view-2 weights are eigenvectors of Cyy^{-1} Cyx Cxx^{-1} Cxy, found
    through the similar symmetric matrix Wy Cyx Cxx^{-1} Cxy Wy with
    Wy = Cyy^{-1/2}.  Eigenvalues are squared correlations.  View-1 weights
    come from u = Cxx^{-1} Cxy v / rho, then each pair is rescaled to unit
    variance.  Directions with zero correlation are completed with an
    orthonormal (in the whitened metric) basis of the remaining space.
    """
    k, sx, sy, Cxx, Cyy, Cxy = _prepare(X, Y, k, ridge, norm)
    p = Cxx.shape[0]
    Wx = whiten(Cxx, ridge)
    Wy = whiten(Cyy, ridge)
    Cxx_inv = Wx @ Wx
    S = Wy @ Cxy.T @ Cxx_inv @ Cxy @ Wy
    lam, Q = sym_eig_topk(S, k)
    rho = np.sqrt(np.clip(lam, 0.0, None))
    V = Wy @ Q
    U = Cxx_inv @ Cxy @ V
    Cxx_r = Cxx + ridge * np.eye(p)
    var = np.einsum("ij,ij->j", U, Cxx_r @ U)
    tiny = var <= 1e-24 * max(1.0, float(var.max(initial=0.0)))
    U[:, ~tiny] /= np.sqrt(var[~tiny])
    if tiny.any():
        U = _complete_whitened(U, tiny, Wx, Cxx_r)
    U, V = fix_signs(U, V)
    return CcaModel(U, V, rho, sx, sy, ridge, norm)


def _complete_whitened(U, missing, Wx, Cxx_r):
    """Fill columns flagged ``missing`` so that U^T Cxx_r U = I."""
    root = Cxx_r @ Wx  # Cxx_r^{1/2}
    keep = root @ U[:, ~missing]
    if keep.shape[1]:
        complement = null_space(keep.T)
    else:
        complement = np.eye(U.shape[0])
    extra = complement[:, :int(missing.sum())]
    U = U.copy()
    U[:, missing] = Wx @ extra
    return U


def project(model: CcaModel, view_index: int, Z) -> np.ndarray:
    """Canonical variates of new rows from view 1 or view 2."""
    Z = as_dense(Z)
    if view_index == 1:
        stats, W = model.stats_x, model.U
    elif view_index == 2:
        stats, W = model.stats_y, model.V
    else:
        raise InvalidInput("view_index must be 1 or 2")
    if Z.shape[1] != W.shape[0]:
        raise InvalidInput(f"view {view_index} has {W.shape[0]} columns, got {Z.shape[1]}")
    return stats.apply(Z) @ W
