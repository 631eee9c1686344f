"""Span corruption budgets, structure drops, and DAE example assembly."""

import math

import numpy as np
import pytest

from structkit.corruption import (
    CorruptionConfig, corpus_stats, corrupt_structure, corrupt_tokens,
    example_seed, make_dae_example,
)
from structkit.data import analyze, encoder_input_from, generate_corpus
from structkit.frontend.tokenizer import MASK, build_vocabulary
from structkit.model.config import ModelConfig
from structkit.model.seq2seq import Model
from structkit.structure import leaf_similarity

SOURCES = [
    "x = 1 ; y = x + 2 ; x = y ; return x ;",
    "a = 3 ; if ( a < 5 ) { b = a ; } else { b = 0 ; } return b ;",
    "n = 4 ; k = 0 ; while ( k < n ) { k = k + 1 ; } return k ;",
]


def vocab_and_tokens(source=SOURCES[0]):
    vocab = build_vocabulary(SOURCES)
    ex = analyze(source, vocab, 12)
    return vocab, ex


def test_config_validation():
    with pytest.raises(ValueError):
        CorruptionConfig(token_corrupt_rate=1.5)
    with pytest.raises(ValueError):
        CorruptionConfig(structure_drop_rate=-0.1)
    with pytest.raises(ValueError):
        CorruptionConfig(op_mix=(0.5, 0.5, 0.5))


def test_empty_input_stays_empty():
    vocab, _ = vocab_and_tokens()
    cfg = CorruptionConfig()
    out, fates, draws = corrupt_tokens([], cfg, np.random.default_rng(0), vocab)
    assert out == [] and fates == [] and draws == []


def test_rate_zero_keeps_every_token():
    vocab, ex = vocab_and_tokens()
    cfg = CorruptionConfig(token_corrupt_rate=0.0)
    out, fates, _ = corrupt_tokens(ex.tokens, cfg, np.random.default_rng(1),
                                   vocab)
    assert [t.id for t in out] == [t.id for t in ex.tokens]
    assert all(f.op == "keep" for f in fates)
    assert [f.new_index for f in fates] == list(range(len(ex.tokens)))


@pytest.mark.parametrize("n,rate", [(7, 0.35), (10, 0.35), (200, 0.35),
                                    (53, 0.5), (40, 0.15)])
def test_affected_count_hits_ceiling_budget(n, rate):
    vocab, ex = vocab_and_tokens()
    tokens = (ex.tokens * math.ceil(n / len(ex.tokens)))[:n]
    cfg = CorruptionConfig(token_corrupt_rate=rate)
    _, fates, _ = corrupt_tokens(tokens, cfg, np.random.default_rng(2), vocab)
    affected = sum(1 for f in fates if f.op != "keep")
    assert affected == math.ceil(rate * n - 1e-9)


def test_fates_bookkeeping_is_consistent():
    vocab, ex = vocab_and_tokens(SOURCES[1])
    cfg = CorruptionConfig(token_corrupt_rate=0.5)
    out, fates, _ = corrupt_tokens(ex.tokens, cfg, np.random.default_rng(3),
                                   vocab)
    survivors = [f for f in fates if f.new_index is not None]
    assert [f.new_index for f in survivors] == list(range(len(out)))
    for i, f in enumerate(fates):
        assert f.op in ("keep", "mask", "random", "delete")
        if f.op == "keep":
            assert out[f.new_index].id == ex.tokens[i].id
        elif f.op == "mask":
            assert out[f.new_index].id == MASK
        elif f.op == "delete":
            assert f.new_index is None


def test_same_seed_is_bitwise_deterministic():
    vocab, ex = vocab_and_tokens(SOURCES[2])
    cfg = CorruptionConfig(token_corrupt_rate=0.4)
    a = corrupt_tokens(ex.tokens, cfg, np.random.default_rng(7), vocab)
    b = corrupt_tokens(ex.tokens, cfg, np.random.default_rng(7), vocab)
    assert [t.id for t in a[0]] == [t.id for t in b[0]]
    assert a[1] == b[1]
    assert a[2] == b[2]


def test_structure_floor_drop_counts():
    _, ex = vocab_and_tokens(SOURCES[1])
    paths = (ex.paths * 3)[:10]
    cfg = CorruptionConfig(structure_drop_rate=0.35)
    surv_leaves, surv_vars, thinned = corrupt_structure(
        paths, 10, cfg, np.random.default_rng(4))
    assert len(surv_leaves) == 7  # 10 - floor(3.5)
    assert len(surv_vars) == 7
    assert len(thinned) == 7


def test_structure_rate_zero_is_identity():
    _, ex = vocab_and_tokens()
    cfg = CorruptionConfig(structure_drop_rate=0.0)
    surv_leaves, surv_vars, thinned = corrupt_structure(
        ex.paths, ex.dfg.n_vars, cfg, np.random.default_rng(5))
    assert surv_leaves == list(range(len(ex.paths)))
    assert surv_vars == list(range(ex.dfg.n_vars))
    assert [p.node_ids for p in thinned] == [p.node_ids for p in ex.paths]


def test_leaf_node_survives_thinning():
    _, ex = vocab_and_tokens(SOURCES[1])
    cfg = CorruptionConfig(structure_drop_rate=0.9)
    surv, _, thinned = corrupt_structure(ex.paths, ex.dfg.n_vars, cfg,
                                         np.random.default_rng(6))
    for k, i in enumerate(surv):
        assert len(thinned[k].node_ids) >= 1
        assert thinned[k].node_ids[-1] == ex.paths[i].node_ids[-1]


def test_thinned_similarity_diagonal_stays_ln_two():
    _, ex = vocab_and_tokens(SOURCES[2])
    cfg = CorruptionConfig(structure_drop_rate=0.5)
    _, _, thinned = corrupt_structure(ex.paths, ex.dfg.n_vars, cfg,
                                      np.random.default_rng(8))
    sim = leaf_similarity(thinned)
    assert np.all(np.diag(sim) == math.log(2.0))


def test_dae_all_rates_zero_is_a_copy_task():
    vocab, ex = vocab_and_tokens()
    cfg = CorruptionConfig(token_corrupt_rate=0.0, structure_drop_rate=0.0)
    dae = make_dae_example(SOURCES[0], cfg, np.random.default_rng(9), vocab)
    clean = encoder_input_from(ex)
    assert np.array_equal(dae.encoder_input.code_ids, clean.code_ids)
    assert dae.encoder_input.leaf_type_paths == clean.leaf_type_paths
    assert np.array_equal(dae.encoder_input.link_ast, clean.link_ast)
    assert np.array_equal(dae.encoder_input.link_dfg, clean.link_dfg)
    assert np.array_equal(dae.encoder_input.adjacency, clean.adjacency)
    assert np.array_equal(dae.encoder_input.sim, clean.sim)
    assert dae.stats.n_affected == 0


def test_deleted_identifier_loses_links_and_var_drops():
    vocab = build_vocabulary(["x = a ;"])
    # Budget forces exactly one affected token; hunt a seed that deletes "a".
    cfg = CorruptionConfig(token_corrupt_rate=0.25, span_mean=1.0,
                           structure_drop_rate=0.0)
    for seed in range(500):
        dae = make_dae_example("x = a ;", cfg, np.random.default_rng(seed),
                               vocab)
        if dae.stats.vars_lost_to_deletion == 1 and len(
                dae.encoder_input.code_ids) == 3:
            break
    else:
        pytest.fail("no seed deleted the single-token variable")
    enc = dae.encoder_input
    assert enc.link_dfg.shape == (3, 1)   # only x's variable survives
    assert enc.link_dfg[0, 0]             # x kept its link at new row 0
    assert enc.adjacency.shape == (1, 1)
    assert dae.targets.y.shape == (5, 5)  # clean targets: 4 tokens + <eos>


def test_dae_targets_come_from_the_clean_program():
    vocab, ex = vocab_and_tokens(SOURCES[1])
    cfg = CorruptionConfig(token_corrupt_rate=0.6, structure_drop_rate=0.6)
    dae = make_dae_example(SOURCES[1], cfg, np.random.default_rng(10), vocab)
    from structkit.data import target_labels_from
    clean = target_labels_from(ex)
    assert np.array_equal(dae.targets.token_ids, clean.token_ids)
    assert dae.targets.leaf_type_paths == clean.leaf_type_paths
    assert np.array_equal(dae.targets.y, clean.y)


def test_delete_everything_still_leaves_a_usable_input():
    vocab, _ = vocab_and_tokens()
    cfg = CorruptionConfig(token_corrupt_rate=1.0, op_mix=(0.0, 0.0, 1.0),
                           structure_drop_rate=0.35)
    dae = make_dae_example(SOURCES[0], cfg, np.random.default_rng(11), vocab)
    enc = dae.encoder_input
    assert enc.n_code == 0
    assert enc.length >= 2  # <cls> and <sep> always survive
    model = Model(ModelConfig(vocab_size=len(vocab), d_model=8, n_enc_layers=1,
                              n_dec_layers=1, n_heads=1, h_max=12, d_dfp=2,
                              d_app=4), seed=0)
    losses, _ = model.forward_loss(enc, dae.targets)
    assert np.isfinite(losses.total)


def test_dae_determinism_bitwise():
    vocab, _ = vocab_and_tokens()
    cfg = CorruptionConfig()
    a = make_dae_example(SOURCES[2], cfg, np.random.default_rng(12), vocab)
    b = make_dae_example(SOURCES[2], cfg, np.random.default_rng(12), vocab)
    assert np.array_equal(a.encoder_input.code_ids, b.encoder_input.code_ids)
    assert np.array_equal(a.encoder_input.sim, b.encoder_input.sim)
    assert a.stats == b.stats


def test_example_seed_is_xor():
    assert example_seed(5, 3) == 6
    assert example_seed(0, 41) == 41
    assert example_seed(41, 41) == 0


def test_affected_fraction_concentrates_at_rate():
    records = generate_corpus(60, seed=51, task="rename", target_tokens=200)
    sources = [r.target for r in records]
    vocab = build_vocabulary(sources)
    cfg = CorruptionConfig()
    stats = corpus_stats(sources, cfg, vocab)
    assert stats["n_examples"] == 60
    assert 0.33 <= stats["mean_affected_fraction"] <= 0.37
    assert stats["leaf_drops_exact_floor"] is True
    assert stats["var_drops_exact_floor"] is True
    assert stats["n_spans"] > 0
