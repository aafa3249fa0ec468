"""
Deep generalized CCA at desk scale.

Each view has a small feedforward network ``f_j``.  The networks' outputs
feed a closed-form MAXVAR layer: with ``C_j = f_j^T f_j`` (plus a ridge) and
``P_j = f_j C_j^{-1} f_j^T``, the shared representation ``G`` holds the top
``r`` eigenvectors of ``M = sum_j P_j`` and ``U_j = C_j^{-1} f_j^T G``.
Training ascends ``L = sum of the top r eigenvalues of M`` by plain
full-batch gradient steps, which is the same as descending the
reconstruction error ``sum_j ||G - f_j U_j||^2 = r J - L``.

Storage convention: examples are rows throughout, so ``G`` is N x r and
``f_j`` is N x o_j (the transposes of the column-example convention).
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence

import numpy as np

from .errors import Diverged, InvalidInput
from .numerics import as_dense, solve_psd, svd_topk, whiten

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths ``(input, hidden..., output)``.

    Hidden layers use ``activation`` ("relu" or "linear"); the output layer is
    always linear.  Two widths (no hidden layer) give a single linear map.
    """
    layer_widths: tuple
    activation: str = "relu"

    def __post_init__(self):
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise InvalidInput("need input and output widths, all >= 1")
        if self.activation not in ("relu", "linear"):
            raise InvalidInput(f"unknown activation {self.activation!r}")

    @property
    def output_width(self):
        return self.layer_widths[-1]


class Mlp:
    def __init__(self, spec: MlpSpec, weights):
        self.spec = spec
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]

    @classmethod
    def init(cls, spec: MlpSpec, rng):
        ws = spec.layer_widths
        weights = [rng.standard_normal((a, b)) / np.sqrt(a) for a, b in zip(ws[:-1], ws[1:])]
        return cls(spec, weights)

    def forward(self, X, keep=False):
        """Output activations; with ``keep`` also every layer's input."""
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for li, W in enumerate(self.weights):
            h = h @ W
            if li < last and self.spec.activation == "relu":
                h = np.maximum(h, 0.0)
            acts.append(h)
        return (h, acts) if keep else h

    def backward(self, acts, grad_out):
        """Gradients w.r.t. each weight matrix given dObjective/dOutput."""
        grads = [None] * len(self.weights)
        g = grad_out
        for li in range(len(self.weights) - 1, -1, -1):
            grads[li] = acts[li].T @ g
            if li > 0:
                g = g @ self.weights[li].T
                if self.spec.activation == "relu":
                    g = g * (acts[li] > 0)
        return grads


class GccaLayer(NamedTuple):
    G: np.ndarray
    U: List[np.ndarray]
    L: float
    eigenvalues: np.ndarray


def dgcca_gcca_layer(outputs, r: int, ridge: float = DEFAULT_RIDGE) -> GccaLayer:
    """Closed-form MAXVAR layer over network outputs (one N x o_j per view).

    ``M = B B^T`` with ``B = [f_1 C_1^{-1/2}, ..., f_J C_J^{-1/2}]``, so the top
    eigenvectors of M are the top left singular vectors of B.
    """
    outputs = [as_dense(F) for F in outputs]
    N = outputs[0].shape[0]
    if any(F.shape[0] != N for F in outputs):
        raise InvalidInput("all outputs must share the number of examples")
    if r < 1 or r > N or any(r > F.shape[1] for F in outputs):
        raise InvalidInput(f"r={r} must be <= N and <= every output width")
    B = np.hstack([F @ whiten(F.T @ F, ridge) for F in outputs])
    G, s, _ = svd_topk(B, r)
    lam = s ** 2
    U = [solve_psd(F.T @ F, F.T @ G, ridge) for F in outputs]
    return GccaLayer(G, U, float(lam.sum()), lam)


def reconstruction_error(outputs, G, U) -> float:
    return float(sum(np.sum((G - F @ Uj) ** 2) for F, Uj in zip(outputs, U)))


def projection_trace(outputs, G, ridge: float = DEFAULT_RIDGE) -> float:
    """tr(G^T M G) with M = sum_j f_j C_j^{-1} f_j^T, evaluated directly."""
    total = 0.0
    for F in outputs:
        FtG = F.T @ G
        total += float(np.sum(FtG * solve_psd(F.T @ F, FtG, ridge)))
    return total


def dgcca_output_gradient(F, U, G) -> np.ndarray:
    """dL/df_j = 2 G U_j^T - 2 f_j U_j U_j^T (row-example convention)."""
    F, U, G = as_dense(F), as_dense(U), as_dense(G)
    if F.shape[0] != G.shape[0] or F.shape[1] != U.shape[0] or U.shape[1] != G.shape[1]:
        raise InvalidInput(f"shapes f={F.shape}, U={U.shape}, G={G.shape} do not conform")
    return 2.0 * (G @ U.T) - 2.0 * (F @ U) @ U.T


@dataclass
class DgccaModel:
    networks: List[Mlp]
    U: List[np.ndarray]
    G: np.ndarray
    r: int
    train_trace: List[float] = field(default_factory=list)
    identity_trace: List[float] = field(default_factory=list)

    def transform(self, j, X):
        return self.networks[j].forward(as_dense(X)) @ self.U[j]


def train_dgcca(views, specs: Sequence[MlpSpec], r: int, epochs: int,
                step: float, seed: int, ridge: float = DEFAULT_RIDGE) -> DgccaModel:
    """Full-batch gradient ascent on the eigenvalue sum L.

    ``train_trace[t]`` is the directly evaluated reconstruction error before
    update t; ``identity_trace[t]`` is ``r J - tr(G^T M G)`` at the same point.
    """
    views = [as_dense(X) for X in views]
    if len(specs) != len(views):
        raise InvalidInput("need one network spec per view")
    if epochs < 1:
        raise InvalidInput("epochs must be >= 1")
    for X, spec in zip(views, specs):
        if spec.layer_widths[0] != X.shape[1]:
            raise InvalidInput("network input width must match the view")
        if r > spec.output_width:
            raise InvalidInput("r must be <= every output width")
    rng = np.random.default_rng(seed)
    nets = [Mlp.init(spec, rng) for spec in specs]
    J = len(views)
    trace, identity = [], []
    for epoch in range(epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            fwd = [net.forward(X, keep=True) for net, X in zip(nets, views)]
        outputs = [f for f, _ in fwd]
        if not all(np.all(np.isfinite(F)) for F in outputs):
            raise Diverged(epoch)
        layer = dgcca_gcca_layer(outputs, r, ridge)
        err = reconstruction_error(outputs, layer.G, layer.U)
        if not np.isfinite(err) or not np.isfinite(layer.L):
            raise Diverged(epoch)
        trace.append(err)
        identity.append(r * J - projection_trace(outputs, layer.G, ridge))
        if step == 0:
            continue
        for net, (F, acts), Uj in zip(nets, fwd, layer.U):
            grad_out = dgcca_output_gradient(F, Uj, layer.G)
            with np.errstate(over="ignore", invalid="ignore"):
                for W, gW in zip(net.weights, net.backward(acts, grad_out)):
                    W += step * gW
            if not all(np.all(np.isfinite(W)) for W in net.weights):
                raise Diverged(epoch)
    outputs = [net.forward(X) for net, X in zip(nets, views)]
    layer = dgcca_gcca_layer(outputs, r, ridge)
    return DgccaModel(nets, layer.U, layer.G, r, trace, identity)


def sample_architecture(rng, low: int = 10, high: int = 1000):
    """Hidden width, output width and r drawn uniformly: c1, c2 in [low, high],
    r in [low, c2]."""
    c1 = int(rng.integers(low, high + 1))
    c2 = int(rng.integers(low, high + 1))
    r = int(rng.integers(low, c2 + 1))
    return c1, c2, r
