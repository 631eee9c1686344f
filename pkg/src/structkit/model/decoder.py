"""Causal decoder with cross-attention and a bucketed relative-position bias."""

import numpy as np

from structkit.model.bias import (
    assemble_decoder_bias, causal_mask, code_buckets, decoder_bias_backward,
)
from structkit.model.config import ModelConfig
from structkit.model.layers import FeedForward, LayerNorm, MultiHeadAttention
from structkit.numkit import Param


class DecoderBlock:
    def __init__(self, name: str, cfg: ModelConfig, rng: np.random.Generator):
        d, std = cfg.d_model, cfg.init_std
        self.ln1 = LayerNorm(f"{name}.ln1", d)
        self.self_attn = MultiHeadAttention(f"{name}.self", d, cfg.n_heads,
                                            rng, std)
        self.ln2 = LayerNorm(f"{name}.ln2", d)
        self.cross_attn = MultiHeadAttention(f"{name}.cross", d, cfg.n_heads,
                                             rng, std)
        self.ln3 = LayerNorm(f"{name}.ln3", d)
        self.ff = FeedForward(f"{name}.ff", d, cfg.d_ff, rng, std)

    @property
    def params(self) -> list[Param]:
        return (self.ln1.params + self.self_attn.params + self.ln2.params
                + self.cross_attn.params + self.ln3.params + self.ff.params)

    def forward(self, x: np.ndarray, enc_out: np.ndarray,
                self_bias: np.ndarray):
        h1, c_ln1 = self.ln1.forward(x)
        a, c_self = self.self_attn.forward(h1, h1, self_bias)
        x2 = x + a
        h2, c_ln2 = self.ln2.forward(x2)
        c, c_cross = self.cross_attn.forward(h2, enc_out, None)
        x3 = x2 + c
        h3, c_ln3 = self.ln3.forward(x3)
        f, c_ff = self.ff.forward(h3)
        return x3 + f, (c_ln1, c_self, c_ln2, c_cross, c_ln3, c_ff)

    def backward(self, cache, dy: np.ndarray):
        c_ln1, c_self, c_ln2, c_cross, c_ln3, c_ff = cache
        dx3 = dy + self.ln3.backward(c_ln3, self.ff.backward(c_ff, dy))
        dh2, denc, _ = self.cross_attn.backward(c_cross, dx3)
        dx2 = dx3 + self.ln2.backward(c_ln2, dh2)
        dxq, dxkv, dscores = self.self_attn.backward(c_self, dx2)
        dx = dx2 + self.ln1.backward(c_ln1, dxq + dxkv)
        return dx, denc, dscores


class Decoder:
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator,
                 e_token: Param):
        self.cfg = cfg
        self.e_token = e_token
        self.blocks = [DecoderBlock(f"dec.l{i}", cfg, rng)
                       for i in range(cfg.n_dec_layers)]
        self.phis = [Param(f"dec.l{i}.phi",
                           np.zeros((cfg.n_heads, cfg.phi_buckets)))
                     for i in range(cfg.n_dec_layers)]
        self.final_ln = LayerNorm("dec.final_ln", cfg.d_model)

    @property
    def params(self) -> list[Param]:
        out: list[Param] = []
        for block, phi in zip(self.blocks, self.phis):
            out.extend(block.params)
            out.append(phi)
        out.extend(self.final_ln.params)
        return out

    def forward(self, dec_ids: np.ndarray, enc_out: np.ndarray):
        n = len(dec_ids)
        causal = causal_mask(n)
        buckets = code_buckets(n, self.cfg.phi_buckets,
                               self.cfg.phi_max_distance)
        x = self.e_token.value[dec_ids]
        block_caches = []
        for block, phi in zip(self.blocks, self.phis):
            bias = assemble_decoder_bias(causal, buckets, phi.value)
            x, cache = block.forward(x, enc_out, bias)
            block_caches.append(cache)
        h, c_final = self.final_ln.forward(x)
        return h, (dec_ids, buckets, block_caches, c_final)

    def backward(self, cache, dh: np.ndarray) -> np.ndarray:
        """Returns the gradient with respect to the encoder output."""
        dec_ids, buckets, block_caches, c_final = cache
        dx = self.final_ln.backward(c_final, dh)
        denc_total = None
        for block, phi, bc in zip(reversed(self.blocks), reversed(self.phis),
                                  reversed(block_caches)):
            dx, denc, dscores = block.backward(bc, dx)
            decoder_bias_backward(dscores, buckets, phi.grad)
            denc_total = denc if denc_total is None else denc_total + denc
        np.add.at(self.e_token.grad, dec_ids, dx)
        return denc_total
