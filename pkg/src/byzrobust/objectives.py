"""Per-agent stochastic objectives.

Two families: quadratics with closed-form optima and exact curvature
constants (used by the theory checks), and softmax regression with an L2
regularizer (used by the figure-scale experiments). Also IDX-format data
ingestion, data partitioning across agents, and the pooled-optimum oracle.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np


class ObjectiveError(ValueError):
    pass


@runtime_checkable
class LocalObjective(Protocol):
    """One agent's stochastic cost E[F(x, xi)] + f0(x)."""

    dim: int

    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator,
                        batch_size: int = 32) -> np.ndarray: ...

    def full_gradient(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class QuadraticObjective:
    """Expected cost (c/2) * ||x - target||^2 with additive Gaussian gradient
    noise of std noise_std per coordinate per draw.

    Strong convexity and gradient-Lipschitz constants are both exactly c, and
    the sampled-gradient variance is exactly dim * noise_std^2.
    """

    target: np.ndarray
    curvature: float = 1.0
    noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "target", np.atleast_1d(np.asarray(self.target, dtype=float)))
        if self.curvature <= 0:
            raise ObjectiveError("curvature must be positive")
        if self.noise_std < 0:
            raise ObjectiveError("noise_std must be nonnegative")

    @property
    def dim(self) -> int:
        return self.target.size

    @property
    def strong_convexity(self) -> float:
        return self.curvature

    @property
    def lipschitz(self) -> float:
        return self.curvature

    @property
    def grad_variance_bound(self) -> float:
        return self.dim * self.noise_std**2

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.curvature * (x - self.target)

    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator,
                        batch_size: int = 32) -> np.ndarray:
        g = self.full_gradient(x)
        if self.noise_std == 0.0:
            return g
        return g + self.noise_std * rng.standard_normal(self.dim)


@dataclass(frozen=True)
class SoftmaxObjective:
    """Softmax regression over (feature, label) samples with an L2 regularizer
    (0.01/2)||x||^2 folded into every gradient.

    The parameter x has one feature_dim block per class, so dim = n_classes *
    feature_dim; block j scores class j.
    """

    features: np.ndarray          # (N, feature_dim)
    labels: np.ndarray            # (N,) ints in [0, n_classes)
    n_classes: int
    reg: float = 0.01

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        lab = np.asarray(self.labels, dtype=int)
        if f.ndim != 2 or lab.ndim != 1 or f.shape[0] != lab.shape[0]:
            raise ObjectiveError("features must be (N, d) and labels (N,)")
        if f.shape[0] == 0:
            raise ObjectiveError("at least one sample is required")
        if lab.min() < 0 or lab.max() >= self.n_classes:
            raise ObjectiveError("labels out of range")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", lab)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.n_classes * self.feature_dim

    def _check_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ObjectiveError(f"expected parameter of shape ({self.dim},), got {x.shape}")
        return x

    def probabilities(self, x: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        """Class probabilities, one row per selected sample."""
        x = self._check_x(x)
        W = x.reshape(self.n_classes, self.feature_dim)
        V = self.features if idx is None else self.features[idx]
        logits = V @ W.T
        logits -= logits.max(axis=1, keepdims=True)
        ex = np.exp(logits)
        return ex / ex.sum(axis=1, keepdims=True)

    def loss_and_gradient(self, x: np.ndarray,
                          batch: Sequence[int] | np.ndarray | None = None
                          ) -> tuple[float, np.ndarray]:
        """Average cross-entropy over the batch plus the regularizer."""
        x = self._check_x(x)
        idx = np.arange(self.n_samples) if batch is None else np.asarray(batch, dtype=int)
        if idx.size == 0:
            raise ObjectiveError("batch must be nonempty")
        probs = self.probabilities(x, idx)
        V = self.features[idx]
        lab = self.labels[idx]
        m = idx.size
        loss = -float(np.mean(np.log(probs[np.arange(m), lab] + 1e-300)))
        loss += 0.5 * self.reg * float(x @ x)
        resid = probs
        resid[np.arange(m), lab] -= 1.0
        grad_blocks = resid.T @ V / m                       # (n_classes, feature_dim)
        grad = grad_blocks.reshape(self.dim) + self.reg * x
        return loss, grad

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.loss_and_gradient(x)[1]

    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator,
                        batch_size: int = 32) -> np.ndarray:
        batch = rng.integers(0, self.n_samples, size=min(batch_size, self.n_samples))
        return self.loss_and_gradient(x, batch)[1]

    def accuracy(self, x: np.ndarray, features: np.ndarray | None = None,
                 labels: np.ndarray | None = None) -> float:
        """Fraction of correctly classified samples; argmax ties go to the
        lowest class index."""
        if features is None:
            features, labels = self.features, self.labels
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=int)
        if features.shape[0] == 0:
            raise ObjectiveError("evaluation set must be nonempty")
        x = self._check_x(x)
        W = x.reshape(self.n_classes, self.feature_dim)
        pred = np.argmax(features @ W.T, axis=1)            # argmax takes the first max
        return float(np.mean(pred == labels))


IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


def load_idx_images(path) -> np.ndarray:
    """Big-endian IDX image file -> (N, rows*cols) float array scaled to [0, 1]."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16:
            raise ObjectiveError(f"{path}: truncated IDX image header")
        magic, n, rows, cols = struct.unpack(">IIII", head)
        if magic != IDX_IMAGE_MAGIC:
            raise ObjectiveError(f"{path}: bad magic {magic}, expected {IDX_IMAGE_MAGIC}")
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != n * rows * cols:
        raise ObjectiveError(f"{path}: expected {n * rows * cols} pixels, got {data.size}")
    return data.reshape(n, rows * cols).astype(float) / 255.0


def load_idx_labels(path) -> np.ndarray:
    """Big-endian IDX label file -> (N,) int array."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8:
            raise ObjectiveError(f"{path}: truncated IDX label header")
        magic, n = struct.unpack(">II", head)
        if magic != IDX_LABEL_MAGIC:
            raise ObjectiveError(f"{path}: bad magic {magic}, expected {IDX_LABEL_MAGIC}")
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != n:
        raise ObjectiveError(f"{path}: expected {n} labels, got {data.size}")
    return data.astype(int)


def partition_iid(n_samples: int, n_agents: int, seed: int) -> list[np.ndarray]:
    """Random permutation split into near-equal disjoint shards."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_samples)
    return [np.sort(s) for s in np.array_split(perm, n_agents)]


def partition_per_digit_groups(labels: np.ndarray, n_agents: int,
                               n_classes: int = 10) -> list[np.ndarray]:
    """Agents 3d, 3d+1, 3d+2 evenly split the samples of class d."""
    if n_agents != 3 * n_classes:
        raise ObjectiveError(
            f"per_digit_groups needs n_agents == 3 * n_classes "
            f"({3 * n_classes}), got {n_agents}")
    labels = np.asarray(labels, dtype=int)
    shards: list[np.ndarray] = []
    for d in range(n_classes):
        idx = np.flatnonzero(labels == d)
        shards.extend(np.array_split(idx, 3))
    return shards


def global_optimum(objectives: Sequence[LocalObjective],
                   grad_tol: float = 1e-6, max_iter: int = 200_000) -> np.ndarray:
    """Minimizer of the pooled expected cost over the given (regular) agents.

    Quadratics have the closed form (sum c_i b_i) / (sum c_i). Otherwise runs
    full-gradient descent with backtracking until the pooled gradient norm
    drops below grad_tol.
    """
    if not objectives:
        raise ObjectiveError("objectives list must be nonempty")
    dims = {o.dim for o in objectives}
    if len(dims) != 1:
        raise ObjectiveError("all objectives must share a dimension")
    if all(isinstance(o, QuadraticObjective) for o in objectives):
        c = np.array([o.curvature for o in objectives])
        b = np.stack([o.target for o in objectives])
        return (c[:, None] * b).sum(axis=0) / c.sum()

    def pooled(x):
        loss, grad = 0.0, np.zeros_like(x)
        for o in objectives:
            lo, go = o.loss_and_gradient(x)  # type: ignore[attr-defined]
            loss += lo
            grad += go
        return loss, grad

    x = np.zeros(dims.pop())
    step = 1.0
    loss, g = pooled(x)
    for _ in range(max_iter):
        gn2 = float(g @ g)
        if np.sqrt(gn2) < grad_tol:
            return x
        # Armijo backtracking on the pooled loss.
        while step >= 1e-14:
            x_new = x - step * g
            loss_new, g_new = pooled(x_new)
            if loss_new <= loss - 0.5 * step * gn2:
                break
            step *= 0.5
        x, loss, g = x_new, loss_new, g_new
        step *= 2.0
    raise ObjectiveError(f"global_optimum did not reach grad_tol={grad_tol} "
                         f"in {max_iter} iterations")
