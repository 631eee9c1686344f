"""Structure-aware attention bias assembly and its backward pass.

The pre-softmax score is (W_q e_x)·(W_k e_y) + bias(x, y). The bias splits
into a layer-independent mask (0 or -inf, from link matrices and DFG
adjacency) plus per-layer, per-head finite terms: a bucketed
relative-position table phi over the code block and w_a * sim + w_b over the
leaf block.
"""

from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


def relative_bucket(distance: np.ndarray, num_buckets: int = 32,
                    max_distance: int = 128) -> np.ndarray:
    """Bucket unsigned distances: exact up to num_buckets // 4, then
    log-spaced out to max_distance, clipped to the last bucket."""
    d = np.asarray(distance, dtype=np.int64)
    n_exact = num_buckets // 4
    with np.errstate(divide="ignore"):
        scaled = np.log(np.maximum(d, 1) / n_exact) / np.log(
            max_distance / n_exact)
    large = n_exact + (scaled * (num_buckets - n_exact)).astype(np.int64)
    large = np.minimum(large, num_buckets - 1)
    return np.where(d < n_exact, d, large)


@dataclass(frozen=True)
class Segments:
    cls: int
    code: slice
    sep: int
    leaves: slice
    vars: slice
    length: int


def segments_of(n_code: int, n_leaves: int, n_vars: int) -> Segments:
    return Segments(
        cls=0,
        code=slice(1, 1 + n_code),
        sep=1 + n_code,
        leaves=slice(n_code + 2, n_code + 2 + n_leaves),
        vars=slice(n_code + 2 + n_leaves, n_code + 2 + n_leaves + n_vars),
        length=n_code + 2 + n_leaves + n_vars,
    )


def code_buckets(n_code: int, num_buckets: int, max_distance: int) -> np.ndarray:
    idx = np.arange(n_code)
    return relative_bucket(np.abs(idx[:, None] - idx[None, :]),
                           num_buckets, max_distance)


def encoder_mask(segs: Segments, link_ast: np.ndarray, link_dfg: np.ndarray,
                 adjacency: np.ndarray) -> np.ndarray:
    """Layer-independent 0 / -inf mask over the composed input."""
    n = segs.length
    mask = np.zeros((n, n), dtype=np.float64)
    code, leaves, vars_ = segs.code, segs.leaves, segs.vars

    ast_blocked = np.where(link_ast, 0.0, NEG_INF)
    mask[code, leaves] = ast_blocked
    mask[leaves, code] = ast_blocked.T
    dfg_blocked = np.where(link_dfg, 0.0, NEG_INF)
    mask[code, vars_] = dfg_blocked
    mask[vars_, code] = dfg_blocked.T
    mask[leaves, vars_] = NEG_INF
    mask[vars_, leaves] = NEG_INF
    n_vars = adjacency.shape[0]
    allowed = adjacency | np.eye(n_vars, dtype=bool)
    mask[vars_, vars_] = np.where(allowed, 0.0, NEG_INF)

    mask[segs.cls, :] = 0.0
    mask[:, segs.cls] = 0.0
    mask[segs.sep, :] = 0.0
    mask[:, segs.sep] = 0.0
    diag = np.arange(n)
    mask[diag, diag] = np.where(np.isneginf(mask[diag, diag]), 0.0,
                                mask[diag, diag])
    return mask


def assemble_encoder_bias(mask: np.ndarray, buckets: np.ndarray,
                          sim: np.ndarray, segs: Segments, phi: np.ndarray,
                          w_a: np.ndarray, w_b: np.ndarray) -> np.ndarray:
    """Per-head bias (H, L, L): mask plus the layer's finite terms."""
    n_heads = phi.shape[0]
    bias = np.broadcast_to(mask, (n_heads, *mask.shape)).copy()
    bias[:, segs.code, segs.code] += phi[:, buckets]
    if sim.shape[0]:
        bias[:, segs.leaves, segs.leaves] += (
            w_a[:, None, None] * sim + w_b[:, None, None])
    return bias


def encoder_bias_backward(dscores: np.ndarray, buckets: np.ndarray,
                          sim: np.ndarray, segs: Segments,
                          phi_grad: np.ndarray, wa_grad: np.ndarray,
                          wb_grad: np.ndarray) -> None:
    """Accumulate phi / w_a / w_b grads from attention-score grads."""
    n_heads, n_buckets = phi_grad.shape
    ds_code = dscores[:, segs.code, segs.code]
    flat_buckets = buckets.ravel()
    for h in range(n_heads):
        phi_grad[h] += np.bincount(flat_buckets, weights=ds_code[h].ravel(),
                                   minlength=n_buckets)
    if sim.shape[0]:
        ds_leaf = dscores[:, segs.leaves, segs.leaves]
        wa_grad += (ds_leaf * sim).sum(axis=(1, 2))
        wb_grad += ds_leaf.sum(axis=(1, 2))


def causal_mask(n: int) -> np.ndarray:
    mask = np.zeros((n, n), dtype=np.float64)
    mask[np.triu_indices(n, k=1)] = NEG_INF
    return mask


def assemble_decoder_bias(causal: np.ndarray, buckets: np.ndarray,
                          phi: np.ndarray) -> np.ndarray:
    return phi[:, buckets] + causal


def decoder_bias_backward(dscores: np.ndarray, buckets: np.ndarray,
                          phi_grad: np.ndarray) -> None:
    n_heads, n_buckets = phi_grad.shape
    flat = buckets.ravel()
    for h in range(n_heads):
        phi_grad[h] += np.bincount(flat, weights=dscores[h].ravel(),
                                   minlength=n_buckets)
