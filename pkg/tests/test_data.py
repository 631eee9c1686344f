"""Dataset records, the seeded generator, corpus tasks, and preparation."""

import numpy as np
import pytest

from structkit.data import (
    DatasetRecord, ProgramGenerator, count_code_tokens, fits_caps,
    generate_corpus, linearize, prepare, read_jsonl, rename_identifiers,
    vocabulary_for, write_jsonl,
)
from structkit.frontend.lexer import LexKind, lex
from structkit.frontend.parser import parse
from structkit.frontend.tokenizer import EOS, UNK
from structkit.model.config import ModelConfig


def small_config(**kw) -> ModelConfig:
    base = dict(vocab_size=512, d_model=8, n_enc_layers=1, n_dec_layers=1,
                n_heads=1, h_max=12, d_dfp=2, d_app=4)
    base.update(kw)
    return ModelConfig(**base)


def test_record_mode_validation():
    DatasetRecord("a = 1 ;", "a = 1 ;", "translate")
    with pytest.raises(ValueError):
        DatasetRecord("a = 1 ;", "a = 1 ;", "finetune")


def test_jsonl_roundtrip(tmp_path):
    records = generate_corpus(8, seed=1, task="rename")
    path = str(tmp_path / "data.jsonl")
    write_jsonl(path, records)
    assert read_jsonl(path) == records


def test_identity_corpus_parses_and_copies():
    records = generate_corpus(20, seed=2, task="identity")
    assert len(records) == 20
    for rec in records:
        assert rec.source == rec.target
        assert rec.mode == "translate"
        parse(lex(rec.target))


def test_rename_is_consistent_and_parses():
    records = generate_corpus(20, seed=3, task="rename")
    for rec in records:
        src, tgt = lex(rec.source), lex(rec.target)
        assert len(src) == len(tgt)
        mapping = {}
        for a, b in zip(src, tgt):
            assert a.kind == b.kind
            if a.kind == LexKind.IDENT:
                assert mapping.setdefault(a.text, b.text) == b.text
            else:
                assert a.text == b.text
        # distinct names stay distinct
        assert len(set(mapping.values())) == len(mapping)
        assert not (set(mapping) & set(mapping.values()))
        parse(tgt)


def test_spec2code_sources_are_linearizations():
    records = generate_corpus(12, seed=4, task="spec2code")
    for rec in records:
        assert rec.mode == "text2code"
        assert rec.source == linearize(parse(lex(rec.target)))


def test_unknown_task_raises():
    with pytest.raises(ValueError):
        generate_corpus(1, seed=0, task="reverse")


@pytest.mark.parametrize("source,want", [
    ("x = a + b ;", "assign x add a b ;"),
    ("x = ( a + b ) * c ;", "assign x mul add a b c ;"),
    ("if ( a < b ) { x = 1 ; } else { y = 2 ; } return x ;",
     "if lt a b { assign x 1 ; } else { assign y 2 ; } return x ;"),
    ("while ( k < n ) { k = k + 1 ; }",
     "while lt k n { assign k add k 1 ; }"),
])
def test_linearize_hand_cases(source, want):
    assert linearize(parse(lex(source))) == want


@pytest.mark.parametrize("target", [9, 20, 57, 200])
def test_program_with_tokens_hits_exact_count(target):
    gen = ProgramGenerator(np.random.default_rng(target))
    program = gen.program_with_tokens(target)
    assert count_code_tokens(program) == target
    parse(lex(program))


def test_fits_caps():
    assert fits_caps("x = 1 ;", max_leaves=8, max_vars=8)
    assert not fits_caps("x = 1 ;", max_leaves=1, max_vars=8)
    assert not fits_caps("x = y ;", max_leaves=8, max_vars=1)


def test_generate_corpus_respects_caps():
    records = generate_corpus(24, seed=11, task="rename", max_leaves=24,
                              max_vars=10)
    for rec in records:
        assert fits_caps(rec.target, 24, 10)
        assert fits_caps(rec.source, 24, 10)


def test_vocabulary_covers_corpus_without_unk():
    records = generate_corpus(16, seed=6, task="spec2code")
    vocab = vocabulary_for(records)
    assert len(vocab) <= 512
    cfg = small_config(vocab_size=len(vocab))
    for rec in records[:6]:
        enc, labels = prepare(rec, vocab, cfg)
        assert UNK not in enc.code_ids
        assert UNK not in labels.token_ids


def test_prepare_translate_mode():
    records = generate_corpus(4, seed=7, task="identity", max_leaves=64,
                              max_vars=32)
    vocab = vocabulary_for(records)
    cfg = small_config(vocab_size=len(vocab))
    enc, labels = prepare(records[0], vocab, cfg)
    assert enc.n_leaves > 0 and enc.n_vars > 0
    assert labels.token_ids[-1] == EOS
    assert labels.leaf_type_paths[-1] is None
    assert not labels.y[-1].any() and not labels.y[:, -1].any()
    assert len(labels.token_ids) == enc.n_code + 1  # identity task


def test_prepare_text2code_mode():
    records = generate_corpus(4, seed=8, task="spec2code")
    vocab = vocabulary_for(records)
    cfg = small_config(vocab_size=len(vocab))
    enc, labels = prepare(records[0], vocab, cfg)
    assert enc.n_leaves == 0 and enc.n_vars == 0
    assert enc.n_code > 0
    assert labels.token_ids[-1] == EOS


def test_prepare_enforces_caps():
    records = generate_corpus(1, seed=9, task="identity", target_tokens=60)
    vocab = vocabulary_for(records)
    with pytest.raises(ValueError):
        prepare(records[0], vocab, small_config(max_leaves=2))
    with pytest.raises(ValueError):
        prepare(records[0], vocab, small_config(max_vars=1))
    with pytest.raises(ValueError):
        prepare(records[0], vocab, small_config(max_code_tokens=10))
