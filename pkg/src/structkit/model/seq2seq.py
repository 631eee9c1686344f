"""Full model: encoder, decoder, heads, combined loss, and generation."""

from dataclasses import dataclass

import numpy as np

from structkit.frontend.tokenizer import EOS, PAD
from structkit.model.config import ModelConfig
from structkit.model.decoder import Decoder
from structkit.model.encoder import Encoder
from structkit.model.heads import AppHead, DfpHead, LMHead
from structkit.model.inputs import EncoderInput, TargetLabels
from structkit.model.layers import init_matrix
from structkit.numkit import Param


@dataclass(frozen=True)
class LossBreakdown:
    lm: float
    app: float
    dfp: float
    total: float


def shift_right(target_ids: np.ndarray) -> np.ndarray:
    """Teacher-forcing input: <pad> start token, then the target minus its last id."""
    out = np.empty_like(target_ids)
    out[0] = PAD
    out[1:] = target_ids[:-1]
    return out


class Model:
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.e_token = Param("embed.token",
                             init_matrix(rng, (cfg.vocab_size, cfg.d_model),
                                         cfg.init_std))
        self.encoder = Encoder(cfg, rng, self.e_token)
        self.decoder = Decoder(cfg, rng, self.e_token)
        self.lm = LMHead(cfg, rng)
        self.app = AppHead(cfg, rng)
        self.dfp = DfpHead(cfg, rng)
        self.params: list[Param] = (
            [self.e_token] + self.encoder.params + self.decoder.params
            + self.lm.params + self.app.params + self.dfp.params)
        names = [p.name for p in self.params]
        assert len(names) == len(set(names)), "duplicate parameter names"

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def forward_loss(self, enc_input: EncoderInput, targets: TargetLabels):
        enc_out, enc_cache = self.encoder.forward(enc_input)
        dec_in = shift_right(targets.token_ids)
        h, dec_cache = self.decoder.forward(dec_in, enc_out)
        lm_loss, lm_cache = self.lm.forward_loss(h, targets.token_ids)
        app_loss, app_cache = self.app.forward_loss(h, targets.leaf_type_paths)
        dfp_loss, dfp_cache = self.dfp.forward_loss(h, targets.y)
        total = (lm_loss + self.cfg.alpha_app * app_loss
                 + self.cfg.alpha_dfp * dfp_loss)
        losses = LossBreakdown(lm_loss, app_loss, dfp_loss, total)
        cache = (h.shape, enc_cache, dec_cache, lm_cache, app_cache, dfp_cache)
        return losses, cache

    def backward(self, cache, scale: float = 1.0) -> None:
        """Accumulate gradients of scale * total loss into Param.grad."""
        h_shape, enc_cache, dec_cache, lm_cache, app_cache, dfp_cache = cache
        dh = np.zeros(h_shape, dtype=np.float64)
        self.lm.backward(lm_cache, dh, scale)
        self.app.backward(app_cache, dh, scale * self.cfg.alpha_app)
        self.dfp.backward(dfp_cache, dh, scale * self.cfg.alpha_dfp)
        denc = self.decoder.backward(dec_cache, dh)
        self.encoder.backward(enc_cache, denc)

    def loss_and_grad(self, enc_input: EncoderInput, targets: TargetLabels,
                      scale: float = 1.0) -> LossBreakdown:
        losses, cache = self.forward_loss(enc_input, targets)
        self.backward(cache, scale)
        return losses

    def decoder_hidden(self, enc_input: EncoderInput,
                       targets: TargetLabels) -> np.ndarray:
        """Teacher-forced final decoder states (used by evaluation)."""
        enc_out, _ = self.encoder.forward(enc_input)
        h, _ = self.decoder.forward(shift_right(targets.token_ids), enc_out)
        return h

    def generate(self, enc_input: EncoderInput, max_len: int = 128,
                 beam: int = 1) -> tuple[list[int], bool]:
        """Autoregressive decode; returns (token ids without <eos>, truncated)."""
        enc_out, _ = self.encoder.forward(enc_input)
        if beam <= 1:
            return self._greedy(enc_out, max_len)
        return self._beam(enc_out, max_len, beam)

    def _step_logits(self, ids: list[int], enc_out: np.ndarray) -> np.ndarray:
        dec_in = np.array([PAD] + ids, dtype=np.int64)
        h, _ = self.decoder.forward(dec_in, enc_out)
        return self.lm.logits(h[-1:])[0]

    def _greedy(self, enc_out: np.ndarray, max_len: int):
        ids: list[int] = []
        for _ in range(max_len):
            nxt = int(np.argmax(self._step_logits(ids, enc_out)))
            if nxt == EOS:
                return ids, False
            ids.append(nxt)
        return ids, True

    def _beam(self, enc_out: np.ndarray, max_len: int, width: int):
        hyps: list[tuple[float, list[int], bool]] = [(0.0, [], False)]
        for _ in range(max_len):
            candidates: list[tuple[float, list[int], bool]] = []
            for logp, ids, finished in hyps:
                if finished:
                    candidates.append((logp, ids, True))
                    continue
                logits = self._step_logits(ids, enc_out)
                shifted = logits - logits.max()
                logprobs = shifted - np.log(np.exp(shifted).sum())
                top = np.argsort(-logprobs, kind="stable")[:width]
                for tok in top:
                    tok = int(tok)
                    score = logp + float(logprobs[tok])
                    if tok == EOS:
                        candidates.append((score, ids, True))
                    else:
                        candidates.append((score, ids + [tok], False))
            candidates.sort(key=lambda c: (-c[0], c[1]))
            hyps = candidates[:width]
            if all(finished for _, _, finished in hyps):
                break
        for logp, ids, finished in hyps:
            if finished:
                return ids, False
        return hyps[0][1], True
