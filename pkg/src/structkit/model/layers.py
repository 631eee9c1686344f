"""Transformer building blocks with explicit forward and backward passes.

Layers own their Params; backward() accumulates into Param.grad and returns
the gradient with respect to the layer input. No linear layer carries a bias
(T5 convention); layer norms carry gamma and beta.
"""

import numpy as np

from structkit.kernels import (
    gelu, gelu_bwd, layernorm, layernorm_bwd, masked_softmax,
    masked_softmax_bwd,
)
from structkit.numkit import Param


def init_matrix(rng: np.random.Generator, shape: tuple[int, ...],
                std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class Linear:
    """y = x @ W.T with W of shape (out_dim, in_dim)."""

    def __init__(self, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator, std: float):
        self.w = Param(name, init_matrix(rng, (out_dim, in_dim), std))

    @property
    def params(self) -> list[Param]:
        return [self.w]

    def forward(self, x: np.ndarray):
        return x @ self.w.value.T, x

    def backward(self, cache, dy: np.ndarray) -> np.ndarray:
        x = cache
        self.w.grad += dy.T @ x
        return dy @ self.w.value


class LayerNorm:
    def __init__(self, name: str, dim: int, eps: float = 1e-5):
        self.gamma = Param(f"{name}.gamma", np.ones(dim))
        self.beta = Param(f"{name}.beta", np.zeros(dim))
        self.eps = eps

    @property
    def params(self) -> list[Param]:
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray):
        y, mean, rstd = layernorm(x, self.gamma.value, self.beta.value, self.eps)
        return y, (x, mean, rstd)

    def backward(self, cache, dy: np.ndarray) -> np.ndarray:
        x, mean, rstd = cache
        dx, dgamma, dbeta = layernorm_bwd(x, self.gamma.value, mean, rstd, dy)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        return dx


class MultiHeadAttention:
    """Additive-bias attention; scores are raw dot products plus bias."""

    def __init__(self, name: str, d: int, n_heads: int,
                 rng: np.random.Generator, std: float):
        self.d = d
        self.n_heads = n_heads
        self.d_head = d // n_heads
        self.wq = Param(f"{name}.wq", init_matrix(rng, (d, d), std))
        self.wk = Param(f"{name}.wk", init_matrix(rng, (d, d), std))
        self.wv = Param(f"{name}.wv", init_matrix(rng, (d, d), std))
        self.wo = Param(f"{name}.wo", init_matrix(rng, (d, d), std))

    @property
    def params(self) -> list[Param]:
        return [self.wq, self.wk, self.wv, self.wo]

    def _split(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        return x.reshape(n, self.n_heads, self.d_head).transpose(1, 0, 2)

    def forward(self, xq: np.ndarray, xkv: np.ndarray,
                bias: np.ndarray | None):
        """bias: per-head (H, n, m) additive matrix, may contain -inf."""
        n, m = xq.shape[0], xkv.shape[0]
        qh = self._split(xq @ self.wq.value.T)
        kh = self._split(xkv @ self.wk.value.T)
        vh = self._split(xkv @ self.wv.value.T)
        scores = qh @ kh.transpose(0, 2, 1)
        if bias is not None:
            scores = scores + bias
        probs = masked_softmax(
            scores.reshape(self.n_heads * n, m)).reshape(self.n_heads, n, m)
        ctx = probs @ vh
        concat = np.ascontiguousarray(ctx.transpose(1, 0, 2)).reshape(n, self.d)
        out = concat @ self.wo.value.T
        return out, (xq, xkv, qh, kh, vh, probs, concat)

    def backward(self, cache, dout: np.ndarray):
        """Returns (dxq, dxkv, dscores); dscores feeds the bias backward."""
        xq, xkv, qh, kh, vh, probs, concat = cache
        n, m = xq.shape[0], xkv.shape[0]
        h, dh = self.n_heads, self.d_head
        self.wo.grad += dout.T @ concat
        dconcat = dout @ self.wo.value
        dctx = np.ascontiguousarray(dconcat.reshape(n, h, dh).transpose(1, 0, 2))
        dprobs = dctx @ vh.transpose(0, 2, 1)
        dvh = probs.transpose(0, 2, 1) @ dctx
        dscores = masked_softmax_bwd(
            probs.reshape(h * n, m), dprobs.reshape(h * n, m)).reshape(h, n, m)
        dqh = dscores @ kh
        dkh = dscores.transpose(0, 2, 1) @ qh
        dq = np.ascontiguousarray(dqh.transpose(1, 0, 2)).reshape(n, self.d)
        dk = np.ascontiguousarray(dkh.transpose(1, 0, 2)).reshape(m, self.d)
        dv = np.ascontiguousarray(dvh.transpose(1, 0, 2)).reshape(m, self.d)
        self.wq.grad += dq.T @ xq
        self.wk.grad += dk.T @ xkv
        self.wv.grad += dv.T @ xkv
        dxq = dq @ self.wq.value
        dxkv = dk @ self.wk.value + dv @ self.wv.value
        return dxq, dxkv, dscores


class FeedForward:
    """GELU MLP: x -> gelu(x W1.T) W2.T."""

    def __init__(self, name: str, d: int, d_ff: int,
                 rng: np.random.Generator, std: float):
        self.w1 = Param(f"{name}.w1", init_matrix(rng, (d_ff, d), std))
        self.w2 = Param(f"{name}.w2", init_matrix(rng, (d, d_ff), std))

    @property
    def params(self) -> list[Param]:
        return [self.w1, self.w2]

    def forward(self, x: np.ndarray):
        u = x @ self.w1.value.T
        g = gelu(u)
        y = g @ self.w2.value.T
        return y, (x, u, g)

    def backward(self, cache, dy: np.ndarray) -> np.ndarray:
        x, u, g = cache
        self.w2.grad += dy.T @ g
        dg = dy @ self.w2.value
        du = gelu_bwd(u, dg)
        self.w1.grad += du.T @ x
        return du @ self.w1.value
