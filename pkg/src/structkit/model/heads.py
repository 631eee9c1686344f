"""LM, AST-paths-prediction, and data-flow-prediction heads.

The DFP head reads the first d_dfp coordinates of the final decoder state and
the APP head the next d_app coordinates; the LM head reads the full state.
"""

import numpy as np

from structkit.errors import HeightOverflow
from structkit.kernels import bce_with_logits, cross_entropy_rows
from structkit.model.config import ModelConfig
from structkit.model.layers import init_matrix
from structkit.numkit import Param


class LMHead:
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.w = Param("head.lm.w",
                       init_matrix(rng, (cfg.vocab_size, cfg.d_model),
                                   cfg.init_std))

    @property
    def params(self) -> list[Param]:
        return [self.w]

    def logits(self, h: np.ndarray) -> np.ndarray:
        return h @ self.w.value.T

    def forward_loss(self, h: np.ndarray, targets: np.ndarray):
        losses, dlogits = cross_entropy_rows(self.logits(h), targets)
        loss = float(losses.sum() / len(targets))
        return loss, (h, dlogits)

    def backward(self, cache, dh: np.ndarray, scale: float) -> None:
        h, dlogits = cache
        d = dlogits * (scale / h.shape[0])
        self.w.grad += d.T @ h
        dh += d @ self.w.value


class AppHead:
    """Per-height ancestor-type classifiers over the APP slice of h."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.lo = cfg.d_dfp
        self.hi = cfg.d_dfp + cfg.d_app
        self.tables = [
            Param(f"head.app.w{h}",
                  init_matrix(rng, (cfg.n_node_types, cfg.d_app), cfg.init_std))
            for h in range(cfg.h_max)
        ]

    @property
    def params(self) -> list[Param]:
        return list(self.tables)

    def forward_loss(self, h: np.ndarray, paths):
        """paths: per target position, a type-id path or None (no leaf).

        Loss follows the written normalization 1 / (|T| * sum of path
        lengths); positions without a path contribute nothing to either sum.
        """
        n_positions = h.shape[0]
        total_len = sum(len(p) for p in paths if p is not None)
        if total_len == 0:
            return 0.0, None
        by_height: dict[int, tuple[list[int], list[int]]] = {}
        for i, path in enumerate(paths):
            if path is None:
                continue
            length = len(path)
            for k, node_type in enumerate(path):
                height = length - 1 - k
                if height >= self.cfg.h_max:
                    raise HeightOverflow(
                        f"height {height} >= h_max {self.cfg.h_max}")
                pos, types = by_height.setdefault(height, ([], []))
                pos.append(i)
                types.append(node_type)
        denom = n_positions * total_len
        hslice = h[:, self.lo:self.hi]
        loss_sum = 0.0
        caches = []
        for height in sorted(by_height):
            pos, types = by_height[height]
            rows = np.array(pos, dtype=np.int64)
            x = hslice[rows]
            logits = x @ self.tables[height].value.T
            losses, dlogits = cross_entropy_rows(
                logits, np.array(types, dtype=np.int64))
            loss_sum += float(losses.sum())
            caches.append((height, rows, x, dlogits))
        return loss_sum / denom, (denom, caches)

    def backward(self, cache, dh: np.ndarray, scale: float) -> None:
        if cache is None or scale == 0.0:
            return
        denom, caches = cache
        coef = scale / denom
        for height, rows, x, dlogits in caches:
            d = dlogits * coef
            table = self.tables[height]
            table.grad += d.T @ x
            # rows are unique within one height group, so fancy-index add is safe
            dh[rows, self.lo:self.hi] += d @ table.value

    def predict_types(self, h: np.ndarray) -> list[list[int]]:
        """Per position, argmax type id at every height 0..h_max-1."""
        hslice = h[:, self.lo:self.hi]
        out = []
        for i in range(h.shape[0]):
            out.append([int(np.argmax(self.tables[height].value @ hslice[i]))
                        for height in range(self.cfg.h_max)])
        return out

    def predict(self, h: np.ndarray, paths):
        """Argmax type predictions; returns (n_correct, n_terms)."""
        hslice = h[:, self.lo:self.hi]
        correct = 0
        total = 0
        for i, path in enumerate(paths):
            if path is None:
                continue
            length = len(path)
            for k, node_type in enumerate(path):
                height = length - 1 - k
                logits = self.tables[height].value @ hslice[i]
                if int(np.argmax(logits)) == node_type:
                    correct += 1
                total += 1
        return correct, total


class DfpHead:
    """Asymmetric bilinear sigmoid scorer over the DFP slice of h."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.d_dfp = cfg.d_dfp
        std = cfg.init_std
        self.u_mat = Param("head.dfp.U",
                           init_matrix(rng, (cfg.d_dfp, cfg.d_dfp), std))
        self.v_mat = Param("head.dfp.V",
                           init_matrix(rng, (cfg.d_dfp, cfg.d_dfp), std))
        self.u_vec = Param("head.dfp.u", init_matrix(rng, (cfg.d_dfp,), std))
        self.v_vec = Param("head.dfp.v", init_matrix(rng, (cfg.d_dfp,), std))
        self.w_bias = Param("head.dfp.w", np.zeros(1))

    @property
    def params(self) -> list[Param]:
        return [self.u_mat, self.v_mat, self.u_vec, self.v_vec, self.w_bias]

    def scores(self, h: np.ndarray) -> np.ndarray:
        hh = h[:, :self.d_dfp]
        a = hh @ self.u_mat.value.T
        b = hh @ self.v_mat.value.T
        return (a @ b.T + (hh @ self.u_vec.value)[:, None]
                + (hh @ self.v_vec.value)[None, :] + self.w_bias.value[0])

    def probabilities(self, h: np.ndarray) -> np.ndarray:
        z = self.scores(h)
        return np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                        1.0 - 1.0 / (1.0 + np.exp(-np.abs(z))))

    def forward_loss(self, h: np.ndarray, y: np.ndarray):
        hh = h[:, :self.d_dfp]
        a = hh @ self.u_mat.value.T
        b = hh @ self.v_mat.value.T
        z = (a @ b.T + (hh @ self.u_vec.value)[:, None]
             + (hh @ self.v_vec.value)[None, :] + self.w_bias.value[0])
        yf = y.astype(np.float64)
        if self.cfg.dfp_pos_weight == 1.0:
            loss, dz = bce_with_logits(z, yf)
        else:
            loss, dz = _weighted_bce(z, yf, self.cfg.dfp_pos_weight)
        return float(loss), (hh, a, b, dz)

    def backward(self, cache, dh: np.ndarray, scale: float) -> None:
        if scale == 0.0:
            return
        hh, a, b, dz = cache
        dz = dz * scale
        da = dz @ b
        db = dz.T @ a
        self.u_mat.grad += da.T @ hh
        self.v_mat.grad += db.T @ hh
        dhh = da @ self.u_mat.value + db @ self.v_mat.value
        rowsum = dz.sum(axis=1)
        colsum = dz.sum(axis=0)
        self.u_vec.grad += hh.T @ rowsum
        self.v_vec.grad += hh.T @ colsum
        dhh += np.outer(rowsum, self.u_vec.value)
        dhh += np.outer(colsum, self.v_vec.value)
        self.w_bias.grad[0] += dz.sum()
        dh[:, :self.d_dfp] += dhh


def _weighted_bce(z: np.ndarray, y: np.ndarray, pos_weight: float):
    """Positive-weighted BCE from logits; mean over all entries."""
    n = z.size
    weight = np.where(y > 0.0, pos_weight, 1.0)
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                   1.0 - 1.0 / (1.0 + np.exp(-np.abs(z))))
    loss = float((weight * per).sum() / n)
    dz = weight * (sig - y) / n
    return loss, dz
