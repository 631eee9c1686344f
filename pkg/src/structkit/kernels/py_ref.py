"""Pure-numpy reference implementations of the hot row-wise kernels.

All functions operate on float64 2D arrays (callers reshape batched inputs).
The compiled backend in _core.pyx mirrors these semantics exactly.
"""

import numpy as np

from structkit.errors import AllMaskedRow

_GELU_K = np.sqrt(2.0 / np.pi)
_GELU_C = 0.044715


def masked_softmax(scores: np.ndarray) -> np.ndarray:
    """Row softmax; -inf entries come out exactly 0. Raises AllMaskedRow."""
    rowmax = scores.max(axis=1, keepdims=True)
    if np.isneginf(rowmax).any():
        raise AllMaskedRow("softmax row entirely -inf")
    e = np.exp(scores - rowmax)  # exp(-inf) is exactly 0
    return e / e.sum(axis=1, keepdims=True)


def masked_softmax_bwd(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """dscores for p = softmax(s); masked positions get gradient exactly 0."""
    inner = (probs * dprobs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)


def cross_entropy_rows(logits: np.ndarray, targets: np.ndarray):
    """Per-row -log softmax(logits)[target] and dlogits = softmax - one_hot."""
    n = logits.shape[0]
    rowmax = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - rowmax)
    z = e.sum(axis=1, keepdims=True)
    lse = rowmax[:, 0] + np.log(z[:, 0])
    losses = lse - logits[np.arange(n), targets]
    dlogits = e / z
    dlogits[np.arange(n), targets] -= 1.0
    return losses, dlogits


def gelu(x: np.ndarray) -> np.ndarray:
    u = _GELU_K * (x + _GELU_C * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu_bwd(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    u = _GELU_K * (x + _GELU_C * x * x * x)
    t = np.tanh(u)
    du = _GELU_K * (1.0 + 3.0 * _GELU_C * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def layernorm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    """Returns (y, mean, rstd); mean/rstd are cached for the backward pass."""
    mean = x.mean(axis=1, keepdims=True)
    var = np.square(x - mean).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    y = (x - mean) * rstd * gamma + beta
    return y, mean, rstd


def layernorm_bwd(x: np.ndarray, gamma: np.ndarray, mean: np.ndarray,
                  rstd: np.ndarray, dy: np.ndarray):
    xhat = (x - mean) * rstd
    dxhat = dy * gamma
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = rstd * (dxhat - m1 - xhat * m2)
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    return dx, dgamma, dbeta


def bce_with_logits(z: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy over all entries, plus dz (already / N)."""
    n = z.size
    loss = (np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))).sum() / n
    sig = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                   1.0 - 1.0 / (1.0 + np.exp(-np.abs(z))))
    dz = (sig - y) / n
    return loss, dz


def adamw_update(value: np.ndarray, grad: np.ndarray, m: np.ndarray,
                 v: np.ndarray, step: int, lr: float, beta1: float,
                 beta2: float, eps: float, weight_decay: float) -> None:
    """In-place decoupled-weight-decay Adam update; step counts from 1."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** step)
    vhat = v / (1.0 - beta2 ** step)
    value -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * value)
