"""
Retrieval evaluation of embeddings.

For each target, the mean embedding of its held-out exemplars is computed
and every candidate is ranked by cosine distance to that centroid.  Rankings
are scored with precision@k, recall@k and mean reciprocal rank, macro
averaged over targets.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .errors import InvalidInput

DEFAULT_KS = (1, 100, 1000)


@dataclass
class RankingTask:
    target: str
    exemplars: np.ndarray
    candidates: np.ndarray
    relevant: np.ndarray  # bool, aligned with candidates

    def __post_init__(self):
        self.exemplars = np.asarray(self.exemplars, dtype=int)
        self.candidates = np.asarray(self.candidates, dtype=int)
        self.relevant = np.asarray(self.relevant, dtype=bool)
        if len(self.exemplars) == 0:
            raise InvalidInput(f"target {self.target!r} has no exemplars")
        if self.relevant.shape != self.candidates.shape:
            raise InvalidInput(f"target {self.target!r}: relevance labels misaligned")
        if np.intersect1d(self.exemplars, self.candidates).size:
            raise InvalidInput(f"target {self.target!r}: exemplars overlap candidates")
        if not self.relevant.any():
            raise InvalidInput(f"target {self.target!r} has no relevant candidate")

    @property
    def relevant_ids(self) -> np.ndarray:
        return self.candidates[self.relevant]


@dataclass
class RankingReport:
    ks: tuple
    targets: List[str]
    precision: np.ndarray  # (targets, len(ks))
    recall: np.ndarray
    reciprocal_rank: np.ndarray  # (targets,)
    macro: Dict[str, float] = field(default_factory=dict)

    def columns(self) -> List[str]:
        return ([f"P@{k}" for k in self.ks] + [f"R@{k}" for k in self.ks]
                + ["MRR"])

    def row(self, t: int) -> List[float]:
        return list(self.precision[t]) + list(self.recall[t]) + [self.reciprocal_rank[t]]

    def macro_row(self) -> List[float]:
        return [self.macro[c] for c in self.columns()]


def zscore(E):
    """Center each column and scale it to unit variance.

    Zero-variance columns become all-zero.  Returns ``(Z, means, stds)`` where
    ``stds`` has the clamped value 1 for constant columns.
    """
    E = np.asarray(E, dtype=np.float64)
    if E.shape[0] < 2:
        raise InvalidInput("zscore needs at least two rows")
    means = E.mean(axis=0)
    centered = E - means
    stds = centered.std(axis=0)
    const = np.ptp(E, axis=0) == 0
    stds[const] = 1.0
    Z = centered / stds
    # the mean of a constant column can be off by an ulp
    Z[:, const] = 0.0
    return Z, means, stds


def cosine_distances(E, centroid) -> np.ndarray:
    """1 - cos(row, centroid); rows or centroid of zero norm get +inf."""
    E = np.asarray(E, dtype=np.float64)
    c_norm = np.linalg.norm(centroid)
    norms = np.linalg.norm(E, axis=1)
    dist = np.full(E.shape[0], np.inf)
    if c_norm == 0:
        return dist
    ok = norms > 0
    dist[ok] = 1.0 - (E[ok] @ centroid) / (norms[ok] * c_norm)
    return dist


def rank_by_centroid(E, task: RankingTask) -> np.ndarray:
    """Candidate row ids ordered by ascending cosine distance to the exemplar mean.

    Ties are broken by candidate id.
    """
    E = np.asarray(E, dtype=np.float64)
    centroid = E[task.exemplars].mean(axis=0)
    dist = cosine_distances(E[task.candidates], centroid)
    order = np.lexsort((task.candidates, dist))
    return task.candidates[order]


def random_ranking(task: RankingTask, rng) -> np.ndarray:
    return rng.permutation(task.candidates)


def score_rankings(tasks: Sequence[RankingTask], rankings: Sequence[np.ndarray],
                   ks=DEFAULT_KS) -> RankingReport:
    """P@k, R@k and reciprocal rank per target, plus the macro average.

    Precision always divides by k, even when a task has fewer than k
    candidates.
    """
    if len(tasks) != len(rankings):
        raise InvalidInput("need exactly one ranking per task")
    ks = tuple(int(k) for k in ks)
    if any(k < 1 for k in ks):
        raise InvalidInput("k values must be >= 1")
    P = np.zeros((len(tasks), len(ks)))
    R = np.zeros((len(tasks), len(ks)))
    rr = np.zeros(len(tasks))
    for t, (task, ranking) in enumerate(zip(tasks, rankings)):
        ranking = np.asarray(ranking, dtype=int)
        if (len(ranking) != len(task.candidates)
                or not np.array_equal(np.sort(ranking), np.sort(task.candidates))):
            raise InvalidInput(f"ranking for {task.target!r} is not a permutation of its candidates")
        hits = np.isin(ranking, task.relevant_ids)
        cum = np.cumsum(hits)
        total = hits.sum()
        for j, k in enumerate(ks):
            found = cum[min(k, len(cum)) - 1]
            P[t, j] = found / k
            R[t, j] = found / total
        rr[t] = 1.0 / (np.argmax(hits) + 1)
    report = RankingReport(ks, [t.target for t in tasks], P, R, rr)
    means = list(P.mean(axis=0)) + list(R.mean(axis=0)) + [rr.mean()]
    report.macro = dict(zip(report.columns(), map(float, means)))
    return report


def pr_curve(tasks, rankings, ks) -> np.ndarray:
    """Macro precision and recall at each k, as rows ``(k, P@k, R@k)``."""
    rep = score_rankings(tasks, rankings, ks)
    return np.column_stack([np.asarray(ks, dtype=float),
                            rep.precision.mean(axis=0), rep.recall.mean(axis=0)])
