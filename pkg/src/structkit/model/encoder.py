"""Structure-aware encoder: input composition, leaf embedding, and the stack."""

import numpy as np

from structkit.errors import UnknownNodeType
from structkit.frontend.tokenizer import CLS, SEP
from structkit.model.bias import (
    assemble_encoder_bias, code_buckets, encoder_bias_backward, encoder_mask,
    segments_of,
)
from structkit.model.config import ModelConfig
from structkit.model.inputs import EncoderInput
from structkit.model.layers import (
    FeedForward, LayerNorm, MultiHeadAttention, init_matrix,
)
from structkit.numkit import Param


def embed_leaf(path_types, e_type: np.ndarray, e_height: np.ndarray) -> np.ndarray:
    """Leaf embedding: sum over path of E_type(r_i) ⊙ E_height(|l|-i);
    the leaf itself sits at height 0."""
    n = len(path_types)
    types = np.asarray(path_types, dtype=np.int64)
    if types.size and (types.min() < 0 or types.max() >= e_type.shape[0]):
        raise UnknownNodeType(f"node type out of range in path {path_types}")
    heights = np.arange(n - 1, -1, -1)
    return (e_type[types] * e_height[heights]).sum(axis=0)


class EncoderBlock:
    def __init__(self, name: str, cfg: ModelConfig, rng: np.random.Generator):
        d, std = cfg.d_model, cfg.init_std
        self.ln1 = LayerNorm(f"{name}.ln1", d)
        self.attn = MultiHeadAttention(f"{name}.attn", d, cfg.n_heads, rng, std)
        self.ln2 = LayerNorm(f"{name}.ln2", d)
        self.ff = FeedForward(f"{name}.ff", d, cfg.d_ff, rng, std)

    @property
    def params(self) -> list[Param]:
        return (self.ln1.params + self.attn.params + self.ln2.params
                + self.ff.params)

    def forward(self, x: np.ndarray, bias: np.ndarray):
        h1, c_ln1 = self.ln1.forward(x)
        a, c_attn = self.attn.forward(h1, h1, bias)
        x2 = x + a
        h2, c_ln2 = self.ln2.forward(x2)
        f, c_ff = self.ff.forward(h2)
        return x2 + f, (c_ln1, c_attn, c_ln2, c_ff)

    def backward(self, cache, dy: np.ndarray):
        c_ln1, c_attn, c_ln2, c_ff = cache
        dx2 = dy + self.ln2.backward(c_ln2, self.ff.backward(c_ff, dy))
        dxq, dxkv, dscores = self.attn.backward(c_attn, dx2)
        dx = dx2 + self.ln1.backward(c_ln1, dxq + dxkv)
        return dx, dscores


class Encoder:
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator,
                 e_token: Param):
        self.cfg = cfg
        self.e_token = e_token  # owned by the Model (shared with decoder)
        d, std = cfg.d_model, cfg.init_std
        self.e_type = Param("enc.embed.type",
                            init_matrix(rng, (cfg.n_node_types, d), std))
        self.e_height = Param("enc.embed.height",
                              init_matrix(rng, (cfg.h_max, d), std))
        self.var_emb = Param("enc.embed.var", init_matrix(rng, (d,), std))
        self.blocks = [EncoderBlock(f"enc.l{i}", cfg, rng)
                       for i in range(cfg.n_enc_layers)]
        self.phis = [Param(f"enc.l{i}.phi",
                           np.zeros((cfg.n_heads, cfg.phi_buckets)))
                     for i in range(cfg.n_enc_layers)]
        self.was = [Param(f"enc.l{i}.wa", np.ones(cfg.n_heads))
                    for i in range(cfg.n_enc_layers)]
        self.wbs = [Param(f"enc.l{i}.wb", np.zeros(cfg.n_heads))
                    for i in range(cfg.n_enc_layers)]
        self.final_ln = LayerNorm("enc.final_ln", d)

    @property
    def params(self) -> list[Param]:
        out = [self.e_type, self.e_height, self.var_emb]
        for block, phi, wa, wb in zip(self.blocks, self.phis, self.was,
                                      self.wbs):
            out.extend(block.params)
            out.extend([phi, wa, wb])
        out.extend(self.final_ln.params)
        return out

    def embed(self, inp: EncoderInput) -> np.ndarray:
        segs = segments_of(inp.n_code, inp.n_leaves, inp.n_vars)
        x = np.empty((segs.length, self.cfg.d_model), dtype=np.float64)
        tok = self.e_token.value
        x[segs.cls] = tok[CLS]
        x[segs.code] = tok[inp.code_ids]
        x[segs.sep] = tok[SEP]
        et, eh = self.e_type.value, self.e_height.value
        for i, path in enumerate(inp.leaf_type_paths):
            x[segs.leaves.start + i] = embed_leaf(path, et, eh)
        x[segs.vars] = self.var_emb.value
        return x

    def embed_backward(self, inp: EncoderInput, dx: np.ndarray) -> None:
        segs = segments_of(inp.n_code, inp.n_leaves, inp.n_vars)
        tg = self.e_token.grad
        tg[CLS] += dx[segs.cls]
        np.add.at(tg, inp.code_ids, dx[segs.code])
        tg[SEP] += dx[segs.sep]
        et, eh = self.e_type.value, self.e_height.value
        for i, path in enumerate(inp.leaf_type_paths):
            dleaf = dx[segs.leaves.start + i]
            types = np.asarray(path, dtype=np.int64)
            heights = np.arange(len(path) - 1, -1, -1)
            np.add.at(self.e_type.grad, types, eh[heights] * dleaf)
            np.add.at(self.e_height.grad, heights, et[types] * dleaf)
        if inp.n_vars:
            self.var_emb.grad += dx[segs.vars].sum(axis=0)

    def forward(self, inp: EncoderInput):
        segs = segments_of(inp.n_code, inp.n_leaves, inp.n_vars)
        mask = encoder_mask(segs, inp.link_ast, inp.link_dfg, inp.adjacency)
        buckets = code_buckets(inp.n_code, self.cfg.phi_buckets,
                               self.cfg.phi_max_distance)
        x = self.embed(inp)
        block_caches = []
        for block, phi, wa, wb in zip(self.blocks, self.phis, self.was,
                                      self.wbs):
            bias = assemble_encoder_bias(mask, buckets, inp.sim, segs,
                                         phi.value, wa.value, wb.value)
            x, cache = block.forward(x, bias)
            block_caches.append(cache)
        out, c_final = self.final_ln.forward(x)
        return out, (inp, segs, buckets, block_caches, c_final)

    def backward(self, cache, dout: np.ndarray) -> None:
        inp, segs, buckets, block_caches, c_final = cache
        dx = self.final_ln.backward(c_final, dout)
        for block, phi, wa, wb, bc in zip(
                reversed(self.blocks), reversed(self.phis),
                reversed(self.was), reversed(self.wbs),
                reversed(block_caches)):
            dx, dscores = block.backward(bc, dx)
            encoder_bias_backward(dscores, buckets, inp.sim, segs,
                                  phi.grad, wa.grad, wb.grad)
        self.embed_backward(inp, dx)
