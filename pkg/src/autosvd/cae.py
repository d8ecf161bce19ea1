"""Contractive auto-encoder with tied weights.

Encoder ``h = sigmoid(W x + b_h)``, decoder ``x_hat = sigmoid(W.T h + b_y)``.
The training loss per example is binary cross-entropy plus
``jacobian_weight * ||dh/dx||_F^2``.  For a sigmoid encoder the Jacobian is
``diag(h * (1 - h)) @ W``, so the penalty has the closed form
``sum_j (h_j (1 - h_j))^2 * sum_i W_ji^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import store

_logger = logging.getLogger(__name__)

EPS = 1e-7


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss or parameter."""


def sigmoid(z):
    # split form avoids overflow in exp for large |z|
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(eq=False)
class CaeModel:
    W: np.ndarray
    b_h: np.ndarray
    b_y: np.ndarray
    jacobian_weight: float = 0.1
    encoder_activation: str = "sigmoid"
    decoder_activation: str = "sigmoid"

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64, ndmin=2)
        self.b_h = np.array(self.b_h, dtype=np.float64, ndmin=1)
        self.b_y = np.array(self.b_y, dtype=np.float64, ndmin=1)
        d_h, d_x = self.W.shape
        if self.b_h.shape != (d_h,) or self.b_y.shape != (d_x,):
            raise ValueError(f"bias shapes {self.b_h.shape}, {self.b_y.shape} "
                             f"do not match W of shape {self.W.shape}")

    @property
    def d_x(self):
        return self.W.shape[1]

    @property
    def d_h(self):
        return self.W.shape[0]

    @classmethod
    def zeros(cls, d_x, d_h, jacobian_weight=0.1):
        return cls(np.zeros((d_h, d_x)), np.zeros(d_h), np.zeros(d_x), jacobian_weight)

    def copy(self):
        return CaeModel(self.W.copy(), self.b_h.copy(), self.b_y.copy(), self.jacobian_weight,
                        self.encoder_activation, self.decoder_activation)


@dataclass(frozen=True)
class CaeTrainConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_order_seed: int = 0
    jacobian_weight: float = 0.1
    init_scale: float | None = None  # None -> 1/sqrt(d_x)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.jacobian_weight < 0:
            raise ValueError("jacobian_weight must be >= 0")
        if self.init_scale is not None and self.init_scale <= 0:
            raise ValueError("init_scale must be > 0")


def _check_input(m, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.d_x:
        raise ValueError(f"input has dimension {x.shape[-1]}, model expects {m.d_x}")
    return x


def encode(m, x):
    """Hidden representation ``sigmoid(W x + b_h)``; ``x`` may be a batch of rows."""
    x = _check_input(m, x)
    return sigmoid(x @ m.W.T + m.b_h)


def reconstruct(m, x):
    x = _check_input(m, x)
    return sigmoid(encode(m, x) @ m.W + m.b_y)


def jacobian_penalty(m, x):
    """Squared Frobenius norm of the encoder Jacobian at ``x``."""
    h = encode(m, x)
    s = h * (1.0 - h)
    return (s**2) @ np.sum(m.W**2, axis=1)


def cross_entropy(x, x_hat):
    x_hat = np.clip(x_hat, EPS, 1.0 - EPS)
    return -np.sum(x * np.log(x_hat) + (1.0 - x) * np.log(1.0 - x_hat), axis=-1)


def cae_loss(m, x):
    x = _check_input(m, x)
    loss = cross_entropy(x, reconstruct(m, x))
    if m.jacobian_weight:
        loss = loss + m.jacobian_weight * jacobian_penalty(m, x)
    return loss


def cae_gradients(m, x):
    """Analytic gradient of :func:`cae_loss` at a single example.

    Returns ``(loss, dW, db_h, db_y)``.  The cross-entropy gradient with
    respect to the decoder pre-activation is ``x_hat - x`` (exact away from
    the clipping bounds).
    """
    x = _check_input(m, x)
    W, lam = m.W, m.jacobian_weight
    h = sigmoid(W @ x + m.b_h)
    x_hat = sigmoid(h @ W + m.b_y)
    s = h * (1.0 - h)
    w_sq = np.sum(W**2, axis=1)

    d_z = x_hat - x
    d_a = (W @ d_z) * s
    # penalty: d/da_j [s_j^2 w_j] = 2 w_j s_j^2 (1 - 2 h_j)
    d_a_pen = 2.0 * w_sq * s**2 * (1.0 - 2.0 * h)
    d_a = d_a + lam * d_a_pen

    dW = np.outer(h, d_z) + np.outer(d_a, x) + lam * 2.0 * (s**2)[:, None] * W
    loss = cross_entropy(x, x_hat) + lam * float(s**2 @ w_sq)
    return float(loss), dW, d_a, d_z


def init_model(d_x, d_h, cfg, rng=None):
    scale = cfg.init_scale if cfg.init_scale is not None else 1.0 / np.sqrt(d_x)
    if rng is None:
        rng = np.random.default_rng(cfg.batch_order_seed)
    W = rng.uniform(-scale, scale, size=(d_h, d_x))
    return CaeModel(W, np.zeros(d_h), np.zeros(d_x), cfg.jacobian_weight)


@dataclass
class CaeTrace:
    epoch_loss: list = field(default_factory=list)


def train_cae(content, cfg, hidden_dim, trace=None):
    """Per-example SGD on the content rows, reshuffled each epoch.

    ``content`` is an :class:`~autosvd.dataset.ItemContentMatrix` or a plain
    2-d array.  Mean per-row loss of every epoch is appended to
    ``trace.epoch_loss`` when a :class:`CaeTrace` is given.
    """
    X = np.asarray(getattr(content, "rows", content), dtype=np.float64)
    if hidden_dim < 1:
        raise ValueError("hidden_dim must be >= 1")
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("content must be a non-empty 2-d matrix")

    rng = np.random.default_rng(cfg.batch_order_seed)
    m = init_model(X.shape[1], hidden_dim, cfg, rng)
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        total = 0.0
        for r in rng.permutation(len(X)):
            loss, dW, db_h, db_y = cae_gradients(m, X[r])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite CAE loss at epoch {epoch + 1}; learning rate {lr} is too high")
            m.W -= lr * dW
            m.b_h -= lr * db_h
            m.b_y -= lr * db_y
            total += loss
        if not (np.all(np.isfinite(m.W)) and np.all(np.isfinite(m.b_h))
                and np.all(np.isfinite(m.b_y))):
            raise DivergenceError(f"non-finite CAE parameters after epoch {epoch + 1}")
        mean = total / len(X)
        _logger.debug("cae epoch %d: mean loss %.6f", epoch + 1, mean)
        if trace is not None:
            trace.epoch_loss.append(mean)
    return m


def extract_features(m, content):
    """Encode every content row; the result is read-only."""
    X = np.asarray(getattr(content, "rows", content), dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.d_x:
        raise ValueError(f"content has shape {X.shape}, model expects (*, {m.d_x})")
    feats = encode(m, X)
    feats.setflags(write=False)
    return feats


def save_model(m, path):
    meta = {"d_x": m.d_x, "d_h": m.d_h, "jacobian_weight": m.jacobian_weight,
            "encoder_activation": m.encoder_activation,
            "decoder_activation": m.decoder_activation}
    return store.write_container(path, "cae_model", meta, {"W": m.W, "b_h": m.b_h, "b_y": m.b_y})


def load_model(path):
    meta, a = store.read_container(path, kind="cae_model")
    return CaeModel(a["W"], a["b_h"], a["b_y"], meta["jacobian_weight"],
                    meta["encoder_activation"], meta["decoder_activation"])


def save_features(features, path):
    return store.write_container(path, "cae_features",
                                 {"n_items": features.shape[0], "d_h": features.shape[1]},
                                 {"features": features})


def load_features(path):
    _, a = store.read_container(path, kind="cae_features")
    return a["features"]
