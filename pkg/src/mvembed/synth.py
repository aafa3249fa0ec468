"""
Seeded synthetic fixtures.

* ``gen_prob_cca``: two views from the probabilistic CCA generative model.
* ``gen_missing_views``: sparse-latent multiview data where a proportion
  ``rho`` of examples has active features in exactly one view.
* ``gen_retrieval``: planted Gaussian clusters with centroid-ranking tasks.

Every generator draws from its own ``numpy.random.default_rng(seed)``, so
outputs are pure functions of the spec.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput
from .eval import RankingTask


@dataclass(frozen=True)
class ProbCcaSpec:
    n: int = 1000
    k: int = 2
    p: int = 10
    q: int = 10
    sigma: float = 1.0
    mu_x: Optional[tuple] = None
    mu_y: Optional[tuple] = None
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.k < 1:
            raise InvalidInput("n and k must be positive")
        if self.k > min(self.p, self.q):
            raise InvalidInput("latent dim k must be <= min(p, q)")
        if self.sigma < 0:
            raise InvalidInput("sigma must be >= 0")
        for mu, dim in ((self.mu_x, self.p), (self.mu_y, self.q)):
            if mu is not None and len(mu) != dim:
                raise InvalidInput("mean vector length must match view dim")


@dataclass
class ProbCcaTruth:
    z: np.ndarray
    W_x: np.ndarray
    W_y: np.ndarray


def gen_prob_cca(spec: ProbCcaSpec):
    """Sample z ~ N(0, I_k); x = W_x z + mu_x + sigma e_x; y likewise.

    Returns ``(X, Y, truth)`` with examples in rows.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    W_x = rng.standard_normal((spec.p, spec.k))
    W_y = rng.standard_normal((spec.q, spec.k))
    z = rng.standard_normal((spec.n, spec.k))
    X = z @ W_x.T + spec.sigma * rng.standard_normal((spec.n, spec.p))
    Y = z @ W_y.T + spec.sigma * rng.standard_normal((spec.n, spec.q))
    if spec.mu_x is not None:
        X += np.asarray(spec.mu_x, dtype=np.float64)
    if spec.mu_y is not None:
        Y += np.asarray(spec.mu_y, dtype=np.float64)
    return X, Y, ProbCcaTruth(z, W_x, W_y)


@dataclass(frozen=True)
class MissingViewSpec:
    n: int = 10_000
    n_latent: int = 100
    active: int = 5
    n_views: int = 3
    density: float = 0.10
    rho: float = 0.0
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidInput("rho must lie in [0, 1]")
        if not 0.0 < self.density <= 1.0:
            raise InvalidInput("density must lie in (0, 1]")
        if not 1 <= self.active <= self.n_latent:
            raise InvalidInput("active features must be in [1, n_latent]")
        if self.n < 1 or self.n_views < 2:
            raise InvalidInput("need n >= 1 and at least two views")


@dataclass
class MissingViewTruth:
    latent: sp.csr_matrix
    maps: List[sp.csr_matrix]
    # -1 where the example is present in every view, else the single view index
    singleton_view: np.ndarray = field(repr=False)


def gen_missing_views(spec: MissingViewSpec):
    """Sparse latent rows mapped through sparse per-view maps, with missingness.

    ``round(rho * n)`` examples (chosen uniformly) keep features in a single
    uniformly chosen view; their rows in every other view are all-zero and
    masked out.  Returns ``(views, masks, truth)``; views are CSR matrices.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, F = spec.n, spec.n_latent
    cols = np.argsort(rng.random((n, F)), axis=1)[:, :spec.active]
    vals = rng.standard_normal((n, spec.active))
    rows = np.repeat(np.arange(n), spec.active)
    latent = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(n, F))

    maps = []
    for _ in range(spec.n_views):
        keep = rng.random((F, F)) < spec.density
        values = rng.standard_normal((F, F))
        maps.append(sp.csr_matrix(np.where(keep, values, 0.0)))

    n_single = int(round(spec.rho * n))
    single_rows = rng.permutation(n)[:n_single]
    singleton_view = np.full(n, -1, dtype=int)
    singleton_view[single_rows] = rng.integers(0, spec.n_views, size=n_single)

    views, masks = [], []
    for i, A in enumerate(maps):
        present = (singleton_view == -1) | (singleton_view == i)
        X = sp.diags(present.astype(np.float64)) @ latent @ A
        X = sp.csr_matrix(X)
        X.eliminate_zeros()
        views.append(X)
        masks.append(present)
    return views, masks, MissingViewTruth(latent, maps, singleton_view)


@dataclass(frozen=True)
class RetrievalSpec:
    n: int = 1000
    clusters: int = 5
    sigma: float = 0.05
    dim: Optional[int] = None
    exemplars: int = 10
    seed: int = 0

    def validate(self):
        if self.clusters < 1:
            raise InvalidInput("need at least one cluster")
        if self.sigma < 0:
            raise InvalidInput("sigma must be >= 0")
        if self.n // self.clusters <= self.exemplars:
            raise InvalidInput("clusters too small to hold the exemplars plus a candidate")
        if self.dim is not None and self.dim < self.clusters:
            raise InvalidInput("dim must be >= number of clusters")


def gen_retrieval(spec: RetrievalSpec):
    """Planted clusters around orthogonal centroid directions.

    Cluster c is centered at ``e_c`` (a standard basis vector), so cosine
    nearest-centroid assignment is exact for small ``sigma``.  One ranking
    task per cluster: its first ``exemplars`` members (by row index) are
    held out; every other row is a candidate, relevant iff in the cluster.
    Returns ``(points, labels, tasks)``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    dim = spec.dim or spec.clusters
    labels = np.arange(spec.n) % spec.clusters
    labels = labels[rng.permutation(spec.n)]
    centroids = np.eye(dim)[:spec.clusters]
    points = centroids[labels] + spec.sigma * rng.standard_normal((spec.n, dim))

    tasks = []
    for c in range(spec.clusters):
        members = np.flatnonzero(labels == c)
        exemplars = members[:spec.exemplars]
        candidates = np.setdiff1d(np.arange(spec.n), exemplars)
        tasks.append(RankingTask(
            target=f"cluster{c}",
            exemplars=exemplars,
            candidates=candidates,
            relevant=labels[candidates] == c,
        ))
    return points, labels, tasks
