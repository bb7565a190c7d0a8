"""Encoder-decoder models whose reconstruction loss ABCD monitors.

Three kinds are available: linear PCA, RBF kernel PCA with a learned linear
pre-image map, and a one-hidden-layer autoencoder trained with full-batch Adam.
All of them map [0, 1]^d back into [0, 1]^d.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from abcd.exceptions import DomainError, InsufficientDataError

KINDS = ("pca", "kpca", "autoencoder")
FORMAT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ModelConfig:
    """Model hyper-parameters.

    ``n_components`` overrides the bottleneck derived from ``eta``; it is the
    only way to get ``d' = d``, which is useful for identity checks.
    """

    kind: str = "pca"
    eta: float = 0.5
    epochs: int = 50
    learning_rate: float = 1e-3
    rbf_gamma: Optional[float] = None
    seed: int = 0
    n_components: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")

    def bottleneck(self, d: int) -> int:
        if self.n_components is not None:
            if not 1 <= self.n_components <= d:
                raise DomainError(f"n_components must lie in [1, {d}]")
            return int(self.n_components)
        dp = int(np.floor(self.eta * d))
        if not 1 <= dp < d:
            raise DomainError(f"eta={self.eta} gives bottleneck {dp} for d={d}; need 1 <= d' < d")
        return dp


@dataclass(frozen=True)
class LossVector:
    per_dim: np.ndarray
    total: float


def loss(x, x_hat) -> LossVector:
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DomainError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    per_dim = (x - x_hat) ** 2
    return LossVector(per_dim, float(per_dim.mean()))


def _check_input(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DomainError("training data must be a 2-D array")
    if not np.all(np.isfinite(X)):
        raise DomainError("training data contains non-finite values")
    return X


class EncoderDecoder:
    kind: str = ""
    d: int

    def encode(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reconstruct(self, x) -> np.ndarray:
        """Reconstruct one observation (shape ``(d,)``) or a batch ``(n, d)``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.d:
            raise DomainError(f"expected dimension {self.d}, got {x.shape[-1]}")
        single = x.ndim == 1
        X = x[None, :] if single else x
        out = np.clip(self.decode(self.encode(X)), 0.0, 1.0)
        return out[0] if single else out

    def _arrays(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        arrays = {}
        for name, value in self._arrays().items():
            a = np.asarray(value, dtype=np.float64)
            arrays[name] = {"shape": list(a.shape), "data": a.ravel().tolist()}
        return {"format": FORMAT_VERSION, "kind": self.kind, "d": self.d, "arrays": arrays}


class PCAModel(EncoderDecoder):
    kind = "pca"

    def __init__(self, mean: np.ndarray, components: np.ndarray):
        self.mean = mean
        self.components = components  # (d, d')
        self.d = mean.shape[0]

    def encode(self, X):
        return (X - self.mean) @ self.components

    def decode(self, Z):
        return Z @ self.components.T + self.mean

    def _arrays(self):
        return {"mean": self.mean, "components": self.components}

    @classmethod
    def fit(cls, X: np.ndarray, n_components: int) -> "PCAModel":
        mean = X.mean(axis=0)
        Xc = X - mean
        cov = Xc.T @ Xc / X.shape[0]
        vals, vecs = np.linalg.eigh(cov)
        order = np.lexsort((np.arange(len(vals)), -vals))[:n_components]
        comps = _fix_signs(vecs[:, order])
        return cls(mean, comps)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each eigenvector positive, for reproducible output
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


class KernelPCAModel(EncoderDecoder):
    """RBF kernel PCA; decoding is a ridge-regularised linear map fitted on the training set."""

    kind = "kpca"

    def __init__(self, X_fit, alphas, gamma, k_col_mean, k_mean, W, b):
        self.X_fit = X_fit
        self.alphas = alphas
        self.gamma = float(gamma)
        self.k_col_mean = k_col_mean
        self.k_mean = float(k_mean)
        self.W = W
        self.b = b
        self.d = X_fit.shape[1]
        self._sq_fit = (X_fit**2).sum(axis=1)

    def _kernel(self, X):
        sq = (X**2).sum(axis=1)[:, None] + self._sq_fit[None, :] - 2.0 * X @ self.X_fit.T
        return np.exp(-self.gamma * np.maximum(sq, 0.0))

    def encode(self, X):
        K = self._kernel(X)
        Kc = K - K.mean(axis=1, keepdims=True) - self.k_col_mean + self.k_mean
        return Kc @ self.alphas

    def decode(self, Z):
        return Z @ self.W + self.b

    def _arrays(self):
        return {
            "X_fit": self.X_fit,
            "alphas": self.alphas,
            "gamma": self.gamma,
            "k_col_mean": self.k_col_mean,
            "k_mean": self.k_mean,
            "W": self.W,
            "b": self.b,
        }

    @classmethod
    def fit(cls, X: np.ndarray, n_components: int, gamma: Optional[float] = None, ridge: float = 1e-3):
        n, d = X.shape
        gamma = 1.0 / d if gamma is None else gamma
        sq = (X**2).sum(axis=1)
        K = np.exp(-gamma * np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0))
        k_col_mean = K.mean(axis=0)
        k_mean = K.mean()
        Kc = K - k_col_mean[None, :] - k_col_mean[:, None] + k_mean
        vals, vecs = np.linalg.eigh(Kc)
        order = np.lexsort((np.arange(n), -vals))[:n_components]
        vals, vecs = vals[order], _fix_signs(vecs[:, order])
        keep = vals > 1e-12 * max(vals.max(initial=0.0), 1.0)
        alphas = vecs[:, keep] / np.sqrt(vals[keep])
        Z = Kc @ alphas
        # pre-image: X ~ Z W + b, intercept unpenalised
        z_mean, x_mean = Z.mean(axis=0), X.mean(axis=0)
        Zc = Z - z_mean
        W = np.linalg.solve(Zc.T @ Zc + ridge * np.eye(Z.shape[1]), Zc.T @ (X - x_mean))
        b = x_mean - z_mean @ W
        return cls(X.copy(), alphas, gamma, k_col_mean, k_mean, W, b)


# ---------------------------------------------------------------------------
# autoencoder


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, learning_rate: float):
    """One Adam update with the usual defaults. Returns new ``(params, state)``."""
    t = state.step + 1
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = ADAM_BETA1 * state.m.get(name, np.zeros_like(p)) + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v.get(name, np.zeros_like(p)) + (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1**t)
        v_hat = v / (1 - ADAM_BETA2**t)
        new_params[name] = p - learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(m_new, v_new, t)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_autoencoder(d: int, hidden: int, rng: np.random.Generator) -> dict:
    b1 = 1.0 / np.sqrt(d)
    b2 = 1.0 / np.sqrt(hidden)
    return {
        "W1": rng.uniform(-b1, b1, size=(d, hidden)),
        "b1": rng.uniform(-b1, b1, size=hidden),
        "W2": rng.uniform(-b2, b2, size=(hidden, d)),
        "b2": rng.uniform(-b2, b2, size=d),
    }


def ae_loss_and_grads(params: dict, X: np.ndarray):
    """MSE over all entries of ``X`` and its gradient w.r.t. every parameter."""
    Z1 = X @ params["W1"] + params["b1"]
    H = np.maximum(Z1, 0.0)
    Y = _sigmoid(H @ params["W2"] + params["b2"])
    R = Y - X
    value = float(np.mean(R**2))
    dZ2 = (2.0 / R.size) * R * Y * (1.0 - Y)
    dH = dZ2 @ params["W2"].T
    dZ1 = dH * (Z1 > 0)
    grads = {
        "W1": X.T @ dZ1,
        "b1": dZ1.sum(axis=0),
        "W2": H.T @ dZ2,
        "b2": dZ2.sum(axis=0),
    }
    return value, grads


class AutoencoderModel(EncoderDecoder):
    kind = "autoencoder"

    def __init__(self, params: dict, history: Optional[list] = None):
        self.params = params
        self.d = params["W1"].shape[0]
        self.history = history or []

    def encode(self, X):
        return np.maximum(X @ self.params["W1"] + self.params["b1"], 0.0)

    def decode(self, Z):
        return _sigmoid(Z @ self.params["W2"] + self.params["b2"])

    def _arrays(self):
        return dict(self.params)

    @classmethod
    def fit(cls, X: np.ndarray, hidden: int, epochs: int, learning_rate: float, seed: int):
        rng = np.random.default_rng(seed)
        params = init_autoencoder(X.shape[1], hidden, rng)
        state = AdamState()
        history = []
        for _ in range(epochs):
            value, grads = ae_loss_and_grads(params, X)
            history.append(value)
            params, state = adam_step(params, grads, state, learning_rate)
        return cls(params, history)


def train(X, config: ModelConfig = ModelConfig()) -> EncoderDecoder:
    """Fit the configured encoder-decoder on the rows of ``X``."""
    X = _check_input(X)
    n, d = X.shape
    dp = config.bottleneck(d)
    if n < dp + 1:
        raise InsufficientDataError(f"need at least {dp + 1} observations to train, got {n}")
    if config.kind == "pca":
        return PCAModel.fit(X, dp)
    if config.kind == "kpca":
        return KernelPCAModel.fit(X, dp, config.rbf_gamma)
    return AutoencoderModel.fit(X, dp, config.epochs, config.learning_rate, config.seed)


def model_from_dict(blob: dict) -> EncoderDecoder:
    if blob.get("format") != FORMAT_VERSION:
        raise DomainError(f"unsupported model format {blob.get('format')!r}")
    a = {
        name: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
        for name, v in blob["arrays"].items()
    }
    kind = blob["kind"]
    if kind == "pca":
        return PCAModel(a["mean"], a["components"])
    if kind == "kpca":
        return KernelPCAModel(
            a["X_fit"], a["alphas"], float(a["gamma"]), a["k_col_mean"], float(a["k_mean"]), a["W"], a["b"]
        )
    if kind == "autoencoder":
        return AutoencoderModel({k: a[k] for k in ("W1", "b1", "W2", "b2")})
    raise DomainError(f"unknown model kind {kind!r}")


def save_model(model: EncoderDecoder, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> EncoderDecoder:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
