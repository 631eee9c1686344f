"""Acceptance gate: one test per criterion, one printed pass/fail line each.

Criteria 7 and 8 share a single trained model (module-scoped fixture).
Training-based criteria dominate the runtime; run with -s to see the lines.
"""

import math
import time

import numpy as np
import pytest

from oracles import (
    ReachingDefsOracle, disallowed_pairs, quadruple_loop_targets,
)
from structkit.corruption import CorruptionConfig, corpus_stats
from structkit.data import (
    DatasetRecord, analyze, encoder_input_from, generate_corpus,
    target_labels_from, vocabulary_for,
)
from structkit.evaluation import evaluate_auxiliary, evaluate_generation
from structkit.frontend.lexer import lex
from structkit.frontend.parser import parse, parse_source
from structkit.frontend.tokenizer import build_vocabulary, tokenize
from structkit.model.checkpoint import save_checkpoint
from structkit.model.config import ModelConfig
from structkit.model.seq2seq import Model
from structkit.numkit import finite_diff_check
from structkit.structure import (
    RootLeafPath, build_dfg, dfp_pair_targets, leaf_similarity,
    root_leaf_paths,
)
from structkit.training import RunConfig, Trainer


def report(ok: bool, text: str) -> None:
    print(f"{'✓' if ok else '✗'} {text}")


GRADCHECK_SOURCE = ("x = 1 ; y = x + 2 ; "
                    "if ( y < 3 ) { x = y ; } return x ;")


def test_criterion_1_gradient_correctness():
    t0 = time.time()
    records = [DatasetRecord(GRADCHECK_SOURCE, GRADCHECK_SOURCE, "translate")]
    vocab = vocabulary_for(records)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=16, n_enc_layers=1,
                      n_dec_layers=1, n_heads=2, d_dfp=4, d_app=8)
    ex = analyze(GRADCHECK_SOURCE, vocab, cfg.h_max)
    enc = encoder_input_from(ex)
    labels = target_labels_from(ex)
    assert enc.n_leaves >= 3 and enc.n_vars >= 2 and labels.y.any()
    model = Model(cfg, seed=0)

    def loss_and_grad():
        model.zero_grad()
        losses, cache = model.forward_loss(enc, labels)
        model.backward(cache)
        return losses.total

    errors = finite_diff_check(loss_and_grad, model.params,
                               raise_on_failure=False)
    for fragment in ("embed.type", "embed.height", ".phi", ".wa", ".wb",
                     "attn", "head.lm", "head.app", "head.dfp"):
        assert any(fragment in name for name in errors), fragment
    worst = max(errors.values())
    elapsed = time.time() - t0
    ok = worst < 1e-4 and elapsed < 120.0
    report(ok, f"criterion 1: gradcheck max rel err {worst:.3e} over "
               f"{len(errors)} parameter groups in {elapsed:.1f}s")
    assert ok


def test_criterion_2_mask_soundness():
    records = generate_corpus(50, seed=31, task="identity",
                              max_leaves=48, max_vars=24)
    vocab = vocabulary_for(records)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=32, n_enc_layers=2,
                      n_dec_layers=1, n_heads=2, d_dfp=4, d_app=8)
    model = Model(cfg, seed=1)
    violations = 0
    checked = 0
    for rec in records:
        inp = encoder_input_from(analyze(rec.source, vocab, cfg.h_max))
        _, cache = model.encoder.forward(inp)
        pairs = disallowed_pairs(inp)
        checked += len(pairs)
        n = 2 + inp.n_code + inp.n_leaves + inp.n_vars
        masked = np.zeros((n, n), dtype=bool)
        for i, j in pairs:
            masked[i, j] = True
        for block_cache in cache[3]:
            probs = block_cache[1][5]
            violations += int(np.count_nonzero(probs[:, masked]))
    ok = checked > 0 and violations == 0
    report(ok, f"criterion 2: mask soundness on 50 examples, {checked} "
               f"disallowed pairs, {violations} nonzero attention weights")
    assert ok


def test_criterion_3_similarity_identities():
    records = generate_corpus(1000, seed=41, task="identity")
    ln2 = math.log(2.0)
    worst_asym = 0.0
    diag_exact = True
    for rec in records:
        sim = leaf_similarity(root_leaf_paths(parse_source(rec.source),
                                              h_max=12))
        if sim.size:
            worst_asym = max(worst_asym, float(np.abs(sim - sim.T).max()))
            diag_exact &= bool((np.diag(sim) == ln2).all())
    paths = [RootLeafPath(leaf=i, node_ids=tuple(ids),
                          node_types=tuple(0 for _ in ids))
             for i, ids in enumerate(([1, 2, 3, 4], [1, 2, 3, 9]))]
    hand = abs(leaf_similarity(paths)[0, 1] - math.log(1 + 9 / 16))
    ok = worst_asym <= 1e-12 and diag_exact and hand < 1e-12
    report(ok, f"criterion 3: 1000 trees, asymmetry {worst_asym:.1e}, "
               f"diagonal ln2 exact={diag_exact}, "
               f"ln(1+9/16) case off by {hand:.1e}")
    assert ok


def _frontend(source: str):
    lexemes = lex(source)
    ast = parse(lexemes)
    vocab = build_vocabulary([[lx.text for lx in lexemes]])
    tokens = tokenize(lexemes, ast, vocab)
    return ast, build_dfg(ast, tokens)


def test_criterion_4_eq12_oracle_equivalence():
    records = generate_corpus(100, seed=42, task="identity")
    mismatches = 0
    for rec in records:
        _, dfg = _frontend(rec.source)
        y = dfp_pair_targets(dfg.link, dfg.adjacency)
        oracle = quadruple_loop_targets(dfg.link, dfg.adjacency)
        mismatches += int(not np.array_equal(y, oracle))
    ok = mismatches == 0
    report(ok, f"criterion 4: Eq. 12 quadruple-loop oracle, "
               f"{mismatches}/100 program mismatches")
    assert ok


def test_criterion_5_reaching_defs_oracle():
    records = generate_corpus(100, seed=43, task="identity")
    mismatches = 0
    with_branch = with_loop = 0
    for rec in records:
        ast, dfg = _frontend(rec.source)
        with_branch += "if" in rec.source
        with_loop += "while" in rec.source
        oracle = ReachingDefsOracle(ast)
        if not (np.array_equal(dfg.comes_from, oracle.comes_from())
                and np.array_equal(dfg.computed_from, oracle.computed_from)):
            mismatches += 1
    ok = mismatches == 0 and with_branch > 0 and with_loop > 0
    report(ok, f"criterion 5: reaching-defs worklist oracle, "
               f"{mismatches}/100 mismatches ({with_branch} with if, "
               f"{with_loop} with while)")
    assert ok


def test_criterion_6_corruption_statistics():
    records = generate_corpus(1000, seed=51, task="rename",
                              target_tokens=200)
    vocab = vocabulary_for(records)
    stats = corpus_stats([rec.target for rec in records],
                         CorruptionConfig(), vocab)
    mean = stats["mean_affected_fraction"]
    span = stats["mean_raw_span_length"]
    ok = (abs(mean - 0.35) <= 0.02 and abs(span - 12.0) <= 1.0
          and stats["leaf_drops_exact_floor"]
          and stats["var_drops_exact_floor"])
    report(ok, f"criterion 6: 1000 programs, affected fraction {mean:.4f} "
               f"(0.35±0.02), span mean {span:.2f} (12±1), drop floors "
               f"exact={stats['leaf_drops_exact_floor']}"
               f"/{stats['var_drops_exact_floor']}")
    assert ok


@pytest.fixture(scope="module")
def overfit():
    records = generate_corpus(32, seed=11, task="rename",
                              max_leaves=64, max_vars=32)
    cfg = RunConfig(batch_size=8, seed=0, alpha_app=8.0, alpha_dfp=4.0,
                    dfp_pos_weight=24.0, lr=1e-3)
    trainer = Trainer(cfg, records)
    t0 = time.time()
    trainer.run(2000)
    return trainer, time.time() - t0


def test_criterion_7_overfit_learnability(overfit):
    trainer, elapsed = overfit
    gen = evaluate_generation(trainer.model, trainer.examples, trainer.vocab,
                              beam=1, max_len=192)
    ok = (gen["token_accuracy"] >= 0.99 and gen["exact_match"] >= 0.90
          and gen["parse_rate"] >= 0.95 and elapsed < 600.0)
    report(ok, f"criterion 7: overfit 32 rename pairs, token acc "
               f"{gen['token_accuracy']:.4f} (>=0.99), exact "
               f"{gen['exact_match']:.3f} (>=0.90), parse "
               f"{gen['parse_rate']:.3f} (>=0.95), {elapsed:.0f}s (<600)")
    assert ok


def test_criterion_8_auxiliary_tasks(overfit):
    trainer, _ = overfit
    aux = evaluate_auxiliary(trainer.model, trainer.examples)
    ok = aux["app_accuracy"] >= 0.95 and aux["dfp_ap"] >= 0.90
    report(ok, f"criterion 8: APP accuracy {aux['app_accuracy']:.4f} "
               f"(>=0.95), DFP AP {aux['dfp_ap']:.4f} (>=0.90) at positive "
               f"prevalence {aux['dfp_prevalence']:.4f}")
    assert ok


def test_criterion_9_ablation_direction():
    records = generate_corpus(128, seed=21, task="spec2code",
                              max_leaves=64, max_vars=32)
    wins = 0
    parts = []
    for seed in (0, 1, 2):
        lm = {}
        for label, (a_app, a_dfp) in (("struct", (0.1, 0.1)),
                                      ("plain", (0.0, 0.0))):
            cfg = RunConfig(batch_size=8, steps=500, seed=seed,
                            alpha_app=a_app, alpha_dfp=a_dfp)
            trainer = Trainer(cfg, records)
            trainer.run(500)
            lm[label] = trainer.metrics[-1][1]
        wins += lm["struct"] <= lm["plain"]
        parts.append(f"seed {seed}: {lm['struct']:.5f} vs {lm['plain']:.5f}")
    ok = wins >= 2
    report(ok, f"criterion 9: structure lm <= plain lm in {wins}/3 seeds "
               f"({'; '.join(parts)})")
    assert ok


def test_criterion_10_determinism(tmp_path):
    records = generate_corpus(8, seed=61, task="rename",
                              max_leaves=48, max_vars=24)
    traces = []
    checkpoints = []
    for run in range(2):
        cfg = RunConfig(d_model=32, n_enc_layers=1, n_dec_layers=1,
                        n_heads=2, d_dfp=4, d_app=8, batch_size=4,
                        steps=10, seed=5)
        trainer = Trainer(cfg, records)
        trainer.run(10)
        traces.append(trainer.metrics_csv())
        path = tmp_path / f"run{run}.json"
        save_checkpoint(str(path), trainer.model, trainer.vocab)
        checkpoints.append(path.read_bytes())
    ok = traces[0] == traces[1] and checkpoints[0] == checkpoints[1]
    report(ok, "criterion 10: two identical-seed runs, 10-step traces and "
               f"checkpoint files identical={ok}")
    assert ok
