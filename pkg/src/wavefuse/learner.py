"""Small dropout MLP that supplies probabilities, MC-dropout stacks and embeddings.

Architecture: ``x -> relu(x W1 + b1) -> dropout -> h W2 + b2 -> softmax``.
Dropout is inverted (kept units scaled by ``1/(1-p)`` at train and MC time),
so deterministic inference uses the weights as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wavefuse.errors import ConfigError, DivergenceError, ShapeError


@dataclass(frozen=True)
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    dropout_p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        d, hidden = np.shape(self.W1)
        if np.shape(self.b1) != (hidden,) or np.shape(self.W2)[0] != hidden:
            raise ShapeError("hidden dimensions of W1, b1 and W2 disagree")
        if np.shape(self.b2) != (np.shape(self.W2)[1],):
            raise ShapeError("b2 does not match the number of classes")
        for name in ("W1", "b1", "W2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings. ``minibatch`` at or above the labeled count means full batch."""

    learning_rate: float = 0.1
    epochs: int = 100
    minibatch: int = 32
    l2: float = 1e-4
    seed: int = 0
    hidden_dim: int = 32
    dropout_p: float = 0.2

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.minibatch < 1:
            raise ConfigError("minibatch must be at least 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be non-negative")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be at least 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")


def _check_width(params: MlpParams, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_features:
        raise ShapeError(
            f"expected features of width {params.n_features}, got shape {x.shape}"
        )
    return x


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_params(n_features, n_classes, hidden_dim=32, dropout_p=0.0, seed=0) -> MlpParams:
    """He-initialised weights, zero biases."""
    rng = np.random.default_rng(seed)
    W1 = rng.normal(0.0, np.sqrt(2.0 / n_features), size=(n_features, hidden_dim))
    W2 = rng.normal(0.0, np.sqrt(1.0 / hidden_dim), size=(hidden_dim, n_classes))
    return MlpParams(W1, np.zeros(hidden_dim), W2, np.zeros(n_classes), dropout_p)


def _hidden(params: MlpParams, x: np.ndarray) -> np.ndarray:
    return np.maximum(x @ params.W1 + params.b1, 0.0)


def _output(params: MlpParams, h: np.ndarray) -> np.ndarray:
    return softmax(h @ params.W2 + params.b2)


def predict_proba(params: MlpParams, features) -> np.ndarray:
    """Class probabilities with dropout disabled."""
    x = _check_width(params, features)
    return _output(params, _hidden(params, x))


def penultimate_embeddings(params: MlpParams, features) -> np.ndarray:
    """Post-ReLU hidden activations (the layer feeding the classifier head)."""
    return _hidden(params, _check_width(params, features))


def mc_dropout_predict(params: MlpParams, features, n_passes: int, seed) -> np.ndarray:
    """Stack of ``n_passes`` dropout forward passes, shape ``(M, n, K)``."""
    if n_passes < 2:
        raise ConfigError(f"MC dropout needs at least 2 passes, got {n_passes}")
    x = _check_width(params, features)
    h = _hidden(params, x)
    keep = 1.0 - params.dropout_p
    rng = np.random.default_rng(seed)
    out = np.empty((n_passes, x.shape[0], params.n_classes))
    for m in range(n_passes):
        mask = (rng.random(h.shape) < keep) / keep
        out[m] = _output(params, h * mask)
    return out


def gradient_embeddings(params: MlpParams, features) -> np.ndarray:
    """Last-layer gradient embeddings under the argmax pseudo-label.

    Row ``i`` is ``(onehot(argmax p_i) - p_i) outer h_i`` flattened class-major,
    so entry ``k * D + j`` is ``(y_hat - p)[k] * h[j]``.
    """
    x = _check_width(params, features)
    h = _hidden(params, x)
    probs = _output(params, h)
    resid = -probs
    resid[np.arange(len(x)), probs.argmax(axis=1)] += 1.0
    return np.einsum("nk,nd->nkd", resid, h).reshape(len(x), -1)


def global_average_pool(feature_map) -> np.ndarray:
    """Channel-wise spatial mean of a ``(D, H, W)`` map."""
    fm = np.asarray(feature_map, dtype=np.float64)
    if fm.ndim != 3 or fm.shape[1] < 1 or fm.shape[2] < 1:
        raise ShapeError(f"expected a (D, H, W) feature map, got shape {fm.shape}")
    return fm.mean(axis=(1, 2))


def loss_and_grads(params: MlpParams, x, y, l2=0.0, mask=None):
    """Mean cross-entropy plus ``l2/2 * (|W1|^2 + |W2|^2)`` and its gradients.

    ``mask`` is an optional pre-scaled dropout multiplier on the hidden layer.
    Returns ``(loss, {"W1": ..., "b1": ..., "W2": ..., "b2": ...})``.
    """
    x = _check_width(params, x)
    y = np.asarray(y, dtype=np.int64)
    return _loss_and_grads(params.W1, params.b1, params.W2, params.b2, x, y, l2, mask)


def _loss_and_grads(W1, b1, W2, b2, x, y, l2, mask):
    n = len(x)
    pre = x @ W1 + b1
    h = np.maximum(pre, 0.0)
    if mask is not None:
        h = h * mask
    logits = h @ W2 + b2
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -log_probs[rows, y].mean()
    loss += 0.5 * l2 * (np.sum(W1**2) + np.sum(W2**2))

    dlogits = np.exp(log_probs)
    dlogits[rows, y] -= 1.0
    dlogits /= n
    gW2 = h.T @ dlogits + l2 * W2
    gb2 = dlogits.sum(axis=0)
    dh = dlogits @ W2.T
    if mask is not None:
        dh = dh * mask
    dpre = dh * (pre > 0)
    gW1 = x.T @ dpre + l2 * W1
    gb1 = dpre.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def fit(dataset, labeled_indices, config: TrainConfig):
    """Train from scratch on the labeled rows.

    Returns ``(params, history)`` where ``history[e]`` is the full labeled-set
    objective (dropout off) after epoch ``e``.
    """
    idx = np.asarray(labeled_indices, dtype=np.int64)
    if idx.size < 1:
        raise ValueError("need at least one labeled sample to train")
    x = dataset.features[idx]
    y = dataset.labels[idx]
    params = init_params(
        dataset.n_features, dataset.n_classes, config.hidden_dim, config.dropout_p,
        seed=config.seed,
    )
    W1, b1, W2, b2 = (np.array(a) for a in (params.W1, params.b1, params.W2, params.b2))
    rng = np.random.default_rng([config.seed, 1])
    keep = 1.0 - config.dropout_p
    n = len(idx)
    bs = min(config.minibatch, n)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        for start in range(0, n, bs):
            rows = order[start:start + bs]
            mask = None
            if config.dropout_p > 0:
                mask = (rng.random((len(rows), W1.shape[1])) < keep) / keep
            _, grads = _loss_and_grads(W1, b1, W2, b2, x[rows], y[rows], config.l2, mask)
            W1 -= config.learning_rate * grads["W1"]
            b1 -= config.learning_rate * grads["b1"]
            W2 -= config.learning_rate * grads["W2"]
            b2 -= config.learning_rate * grads["b2"]
        loss, _ = _loss_and_grads(W1, b1, W2, b2, x, y, config.l2, None)
        if not np.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch + 1}")
        history.append(float(loss))
    return MlpParams(W1, b1, W2, b2, config.dropout_p), history


def train(dataset, labeled_indices, config: TrainConfig) -> MlpParams:
    """Train from scratch on ``labeled_indices``; deterministic given ``config.seed``."""
    return fit(dataset, labeled_indices, config)[0]
