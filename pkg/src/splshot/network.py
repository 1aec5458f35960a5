"""From-scratch two-layer softmax network: forward pass, exact cross-entropy
gradients, and Adam updates.

The network is deliberately small (features -> rectified hidden layer ->
linear softmax head) and implemented directly in numpy so that every
gradient component can be checked against central finite differences and
every optimizer step against a hand-unrolled trace.

Parameters travel as a ``NetParams`` record or, for the optimizer, as a
plain ``{name: array}`` dict; all functions here return fresh arrays and
never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "AdamState",
    "NetParams",
    "TrainConfig",
    "adam_step",
    "forward",
    "init_params",
    "loss_and_grads",
    "relu",
    "softmax",
    "train",
]


@dataclass(frozen=True)
class TrainConfig:
    """One training phase: optimizer constants plus epoch/batch bookkeeping."""

    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0

    def violations(self) -> list[str]:
        bad = []
        if self.learning_rate <= 0:
            bad.append("learning_rate must be > 0")
        if self.batch_size < 1:
            bad.append("batch_size must be >= 1")
        if self.epochs < 0:
            bad.append("epochs must be >= 0")
        if not 0.0 <= self.beta1 < 1.0:
            bad.append("beta1 must lie in [0, 1)")
        if not 0.0 <= self.beta2 < 1.0:
            bad.append("beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            bad.append("epsilon must be > 0")
        return bad


@dataclass(eq=False)
class NetParams:
    """Weights of the two-layer network; shapes must agree pairwise."""

    w1: np.ndarray  # (hidden, d_feat)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (num_classes, hidden)
    b2: np.ndarray  # (num_classes,)

    def __post_init__(self) -> None:
        h, d = self.w1.shape
        c, h2 = self.w2.shape
        if self.b1.shape != (h,) or h2 != h or self.b2.shape != (c,):
            raise ValueError(
                f"inconsistent shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    @property
    def d_feat(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[0]

    def copy(self) -> "NetParams":
        return NetParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    @staticmethod
    def from_dict(d: dict[str, np.ndarray]) -> "NetParams":
        return NetParams(d["w1"], d["b1"], d["w2"], d["b2"])


@dataclass(eq=False)
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @staticmethod
    def zeros_like(params: dict[str, np.ndarray]) -> "AdamState":
        return AdamState(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def init_params(d_feat: int, hidden: int, num_classes: int, seed: int) -> NetParams:
    """Weights i.i.d. normal with std 1/sqrt(fan-in), biases zero."""
    if min(d_feat, hidden, num_classes) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return NetParams(
        w1=rng.standard_normal((hidden, d_feat)) / math.sqrt(d_feat),
        b1=np.zeros(hidden),
        w2=rng.standard_normal((num_classes, hidden)) / math.sqrt(hidden),
        b2=np.zeros(num_classes),
    )


def init_head(hidden: int, num_classes: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fresh output layer for head replacement: normal/sqrt(fan-in), zero bias."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((num_classes, hidden)) / math.sqrt(hidden), np.zeros(num_classes)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def forward(params: NetParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (logits, hidden) for a single vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.d_feat:
        raise ValueError(f"input has {x.shape[-1]} features, expected {params.d_feat}")
    hidden = relu(x @ params.w1.T + params.b1)
    logits = hidden @ params.w2.T + params.b2
    return logits, hidden


def loss_and_grads(
    params: NetParams, X: np.ndarray, y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its exact analytic gradients."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    n = X.shape[0]
    if n == 0:
        raise ValueError("batch is empty")
    if y.shape != (n,):
        raise ValueError(f"labels have shape {y.shape}, expected ({n},)")
    if np.any(y < 0) or np.any(y >= params.num_classes):
        raise ValueError("label out of range")

    pre = X @ params.w1.T + params.b1
    hidden = relu(pre)
    logits = hidden @ params.w2.T + params.b2
    probs = softmax(logits)

    # -log p[true], computed from the stabilized logits directly
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    loss = float(-np.mean(log_probs[np.arange(n), y]))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n

    grads = {
        "w2": dlogits.T @ hidden,
        "b2": dlogits.sum(axis=0),
    }
    dhidden = dlogits @ params.w2
    dpre = dhidden * (pre > 0)
    grads["w1"] = dpre.T @ X
    grads["b1"] = dpre.sum(axis=0)
    return loss, grads


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update over every named parameter; returns fresh arrays."""
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads[name]
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        new_params[name] = p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def train(params: NetParams, X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> NetParams:
    """Run epochs of shuffled mini-batch Adam; the input params are untouched.

    The last short mini-batch of each epoch is used, not dropped. Fully
    deterministic in (params, data order, cfg).
    """
    bad = cfg.violations()
    if bad:
        raise ValueError("; ".join(bad))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    n = X.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")

    p = params.copy().as_dict()
    state = AdamState.zeros_like(p)
    rng = np.random.default_rng(cfg.shuffle_seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = loss_and_grads(NetParams.from_dict(p), X[idx], y[idx])
            p, state = adam_step(p, grads, state, cfg)
    return NetParams.from_dict(p)
