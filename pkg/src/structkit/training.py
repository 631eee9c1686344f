"""Deterministic training loop: teacher-forced steps over a fixed corpus.

Examples are prepared once up front (DAE corruption uses a per-example seed,
global_seed XOR example_index), batches cycle through the corpus in a fixed
order, and gradient accumulation is sequential, so a (config, seed) pair
yields bitwise-identical runs.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from structkit.corruption import CorruptionConfig, example_seed, make_dae_example
from structkit.data import (
    DatasetRecord, analyze, encoder_input_from, prepare, vocabulary_for,
)
from structkit.errors import NonFiniteLoss
from structkit.frontend.tokenizer import EOS, Vocabulary, tokenize_text
from structkit.model.config import ModelConfig
from structkit.model.inputs import TargetLabels
from structkit.model.seq2seq import LossBreakdown, Model
from structkit.numkit import AdamW

METRICS_HEADER = "step,lm_loss,app_loss,dfp_loss,total"


@dataclass
class RunConfig:
    d_model: int = 64
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0
    h_max: int = 12
    phi_buckets: int = 32
    phi_max_distance: int = 128
    d_dfp: int = 8
    d_app: int = 32
    alpha_app: float = 0.1
    alpha_dfp: float = 0.1
    dfp_pos_weight: float = 1.0
    max_code_tokens: int = 256
    max_leaves: int = 64
    max_vars: int = 32
    init_std: float = 0.02
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    batch_size: int = 8
    steps: int = 2000
    seed: int = 0
    swap_direction: bool = False
    vocab_size: int = 512
    corruption: CorruptionConfig = field(default_factory=CorruptionConfig)

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, d_model=self.d_model,
            n_enc_layers=self.n_enc_layers, n_dec_layers=self.n_dec_layers,
            n_heads=self.n_heads, d_ff=self.d_ff, h_max=self.h_max,
            phi_buckets=self.phi_buckets,
            phi_max_distance=self.phi_max_distance, d_dfp=self.d_dfp,
            d_app=self.d_app, alpha_app=self.alpha_app,
            alpha_dfp=self.alpha_dfp, dfp_pos_weight=self.dfp_pos_weight,
            max_code_tokens=self.max_code_tokens, max_leaves=self.max_leaves,
            max_vars=self.max_vars, init_std=self.init_std)


def text_target_labels(text: str, vocab: Vocabulary) -> TargetLabels:
    """Structure-free target (swapped-direction text generation)."""
    ids = np.array([t.id for t in tokenize_text(text, vocab)] + [EOS],
                   dtype=np.int64)
    n = len(ids)
    return TargetLabels(token_ids=ids,
                        leaf_type_paths=[None] * n,
                        y=np.zeros((n, n), dtype=bool))


def prepare_examples(records: list[DatasetRecord], vocab: Vocabulary,
                     cfg: RunConfig):
    """Model-ready (EncoderInput, TargetLabels) pairs, one per record."""
    mcfg = cfg.model_config(len(vocab))
    out = []
    for idx, rec in enumerate(records):
        if rec.mode == "dae":
            rng = np.random.default_rng(
                example_seed(cfg.corruption.seed, idx))
            dae = make_dae_example(rec.source, cfg.corruption, rng, vocab,
                                   h_max=cfg.h_max)
            out.append((dae.encoder_input, dae.targets))
        elif rec.mode == "text2code" and cfg.swap_direction:
            source_ex = analyze(rec.target, vocab, cfg.h_max)
            out.append((encoder_input_from(source_ex),
                        text_target_labels(rec.source, vocab)))
        else:
            out.append(prepare(rec, vocab, mcfg))
    return out


class Trainer:
    """Resumable in-memory trainer; run() may be called repeatedly."""

    def __init__(self, cfg: RunConfig, records: list[DatasetRecord],
                 vocab: Vocabulary | None = None):
        self.cfg = cfg
        self.vocab = vocab if vocab is not None else vocabulary_for(
            records, max_size=cfg.vocab_size)
        self.records = records
        self.examples = prepare_examples(records, self.vocab, cfg)
        if not self.examples:
            raise ValueError("empty corpus")
        self.model = Model(cfg.model_config(len(self.vocab)), seed=cfg.seed)
        self.optimizer = AdamW(self.model.params, lr=cfg.lr,
                               betas=(cfg.beta1, cfg.beta2), eps=cfg.eps,
                               weight_decay=cfg.weight_decay)
        self.step_count = 0
        self.metrics: list[tuple[int, float, float, float, float]] = []

    def _batch_indices(self, step: int) -> list[int]:
        n = len(self.examples)
        base = step * self.cfg.batch_size
        return [(base + k) % n for k in range(self.cfg.batch_size)]

    def train_step(self) -> LossBreakdown:
        indices = self._batch_indices(self.step_count)
        scale = 1.0 / len(indices)
        self.optimizer.zero_grad()
        lm = app = dfp = total = 0.0
        for idx in indices:
            enc, labels = self.examples[idx]
            losses = self.model.loss_and_grad(enc, labels, scale=scale)
            if not math.isfinite(losses.total):
                raise NonFiniteLoss(self.step_count, idx, losses.total)
            lm += losses.lm * scale
            app += losses.app * scale
            dfp += losses.dfp * scale
            total += losses.total * scale
        self.optimizer.step()
        self.metrics.append((self.step_count, lm, app, dfp, total))
        self.step_count += 1
        return LossBreakdown(lm, app, dfp, total)

    def run(self, n_steps: int) -> None:
        for _ in range(n_steps):
            self.train_step()

    def metrics_csv(self) -> str:
        lines = [METRICS_HEADER]
        for step, lm, app, dfp, total in self.metrics:
            lines.append(f"{step},{lm!r},{app!r},{dfp!r},{total!r}")
        return "\n".join(lines) + "\n"

    def save_metrics(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.metrics_csv())


def train(cfg: RunConfig, records: list[DatasetRecord],
          vocab: Vocabulary | None = None) -> Trainer:
    trainer = Trainer(cfg, records, vocab)
    trainer.run(cfg.steps)
    return trainer
