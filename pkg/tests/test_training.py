"""Trainer determinism, loss accounting, and failure reporting."""

import math

import numpy as np
import pytest

from structkit.data import DatasetRecord, generate_corpus
from structkit.errors import NonFiniteLoss
from structkit.training import (
    METRICS_HEADER, RunConfig, Trainer, text_target_labels,
)


def tiny_config(**kw) -> RunConfig:
    base = dict(d_model=16, n_enc_layers=1, n_dec_layers=1, n_heads=2,
                h_max=12, d_dfp=4, d_app=8, batch_size=4, steps=3, seed=0)
    base.update(kw)
    return RunConfig(**base)


def tiny_corpus(task="rename", n=6, seed=13):
    return generate_corpus(n, seed=seed, task=task, max_leaves=64, max_vars=32)


def test_metrics_header_exact():
    assert METRICS_HEADER == "step,lm_loss,app_loss,dfp_loss,total"


def test_batch_indices_cycle_in_order():
    trainer = Trainer(tiny_config(batch_size=4), tiny_corpus(n=6))
    assert trainer._batch_indices(0) == [0, 1, 2, 3]
    assert trainer._batch_indices(1) == [4, 5, 0, 1]
    assert trainer._batch_indices(3) == [0, 1, 2, 3]


def test_two_runs_are_bitwise_identical():
    records = tiny_corpus()
    a = Trainer(tiny_config(), records)
    b = Trainer(tiny_config(), records)
    a.run(5)
    b.run(5)
    assert a.metrics == b.metrics
    for pa, pb in zip(a.model.params, b.model.params):
        assert np.array_equal(pa.value, pb.value), pa.name


def test_different_seeds_diverge():
    records = tiny_corpus()
    a = Trainer(tiny_config(seed=0), records)
    b = Trainer(tiny_config(seed=1), records)
    a.run(1)
    b.run(1)
    assert a.metrics != b.metrics


def test_step_zero_loss_matches_analytic_estimate():
    records = tiny_corpus(n=8)
    cfg = tiny_config(batch_size=8)
    trainer = Trainer(cfg, records)
    losses = trainer.train_step()
    vocab_size = len(trainer.vocab)
    mean_inv_t = float(np.mean(
        [1.0 / labels.length for _, labels in trainer.examples]))
    expected = (math.log(vocab_size) + 0.1 * math.log(13.0) * mean_inv_t
                + 0.1 * math.log(2.0))
    assert abs(losses.total - expected) / expected < 0.20
    assert abs(losses.lm - math.log(vocab_size)) / math.log(vocab_size) < 0.20
    assert abs(losses.dfp - math.log(2.0)) < 0.05


def test_alpha_zero_trains_only_the_seq2seq_path():
    records = tiny_corpus()
    cfg = tiny_config(alpha_app=0.0, alpha_dfp=0.0)
    trainer = Trainer(cfg, records)
    before = {p.name: p.value.copy()
              for p in trainer.model.app.params + trainer.model.dfp.params}
    trainer.run(3)
    for p in trainer.model.app.params + trainer.model.dfp.params:
        assert np.array_equal(p.value, before[p.name]), p.name
    # aux losses are still measured and logged
    for _, _, app, dfp, _ in trainer.metrics:
        assert app > 0.0 and dfp > 0.0
    # lm loss actually moved
    assert trainer.metrics[-1][1] != trainer.metrics[0][1]


def test_metrics_csv_shape_and_roundtrip(tmp_path):
    trainer = Trainer(tiny_config(), tiny_corpus())
    trainer.run(2)
    path = str(tmp_path / "metrics.csv")
    trainer.save_metrics(path)
    lines = open(path).read().strip().split("\n")
    assert lines[0] == METRICS_HEADER
    assert len(lines) == 3
    step, lm, app, dfp, total = lines[1].split(",")
    assert step == "0"
    assert abs(float(total) - (float(lm) + 0.1 * float(app)
                               + 0.1 * float(dfp))) < 1e-12
    # repr round-trips the floats exactly
    assert float(lm) == trainer.metrics[0][1]


def test_non_finite_loss_reports_step_and_example():
    trainer = Trainer(tiny_config(), tiny_corpus())
    trainer.run(1)
    trainer.model.lm.w.value[6, 0] = float("nan")
    with pytest.raises(NonFiniteLoss) as exc:
        trainer.train_step()
    assert exc.value.step == 1
    assert exc.value.example_index == 4  # first index of batch 1
    assert not math.isfinite(exc.value.value)


def test_dae_mode_examples_use_corruption():
    programs = generate_corpus(4, seed=17, task="identity", max_leaves=64,
                               max_vars=32)
    records = [DatasetRecord(r.target, r.target, "dae") for r in programs]
    trainer = Trainer(tiny_config(batch_size=2), records)
    corrupted = 0
    for (enc, labels), rec in zip(trainer.examples, records):
        assert labels.token_ids[-1] == 5  # clean targets end in <eos>
        if enc.n_code != labels.length - 1:
            corrupted += 1  # deletions shortened the encoder side
    assert corrupted > 0
    trainer.run(1)


def test_swap_direction_prepares_text_targets():
    records = generate_corpus(4, seed=19, task="spec2code", max_leaves=64,
                              max_vars=32)
    trainer = Trainer(tiny_config(batch_size=2, swap_direction=True), records)
    for enc, labels in trainer.examples:
        assert enc.n_leaves > 0          # structured program side in
        assert all(p is None for p in labels.leaf_type_paths)
        assert not labels.y.any()
    losses = trainer.train_step()
    assert losses.app == 0.0             # no paths to predict
    assert losses.dfp > 0.0              # all-negative y still scored


def test_text_target_labels_shape():
    vocab = Trainer(tiny_config(), tiny_corpus()).vocab
    labels = text_target_labels("assign x add a b ;", vocab)
    assert labels.token_ids[-1] == 5
    assert labels.y.shape == (labels.length, labels.length)
    assert all(p is None for p in labels.leaf_type_paths)
