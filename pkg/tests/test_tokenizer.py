import numpy as np

from structkit.data import generate_corpus
from structkit.frontend.lexer import lex
from structkit.frontend.parser import parse
from structkit.frontend.tokenizer import (
    CLS, EOS, MASK, PAD, SEP, SPECIAL_TOKENS, UNK, Vocabulary,
    build_vocabulary, chunk_word, code_token_texts, detokenize, tokenize,
    tokenize_text,
)


def make_vocab(sources):
    lists = [code_token_texts(lex(src)) for src in sources]
    return build_vocabulary([[t for t, _ in lst] for lst in lists])


def test_special_ids_fixed():
    assert (PAD, CLS, SEP, MASK, UNK, EOS) == (0, 1, 2, 3, 4, 5)
    vocab = Vocabulary()
    assert vocab.texts[:6] == list(SPECIAL_TOKENS)


def test_chunk_word():
    assert chunk_word("counter") == ["coun", "ter"]
    assert chunk_word("x") == ["x"]
    assert chunk_word("abcd") == ["abcd"]
    assert chunk_word("abcdefghi") == ["abcd", "efgh", "i"]


def test_identifier_chunks_share_leaf():
    src = "counter = counter + 1 ;"
    lexemes = lex(src)
    vocab = make_vocab([src])
    tokens = tokenize(lexemes, parse(lexemes), vocab)
    assert [t.text for t in tokens] == ["coun", "ter", "=", "coun", "ter",
                                       "+", "1", ";"]
    assert [t.leaf for t in tokens] == [0, 0, 1, 2, 2, 3, 4, 5]


def test_small_program_link_identity():
    src = "x = ab ;"
    lexemes = lex(src)
    vocab = make_vocab([src])
    tokens = tokenize(lexemes, parse(lexemes), vocab)
    assert len(tokens) == 4
    assert [t.leaf for t in tokens] == [0, 1, 2, 3]


def test_unknown_text_maps_to_unk():
    vocab = make_vocab(["x = 1 ;"])
    src = "zq = 1 ;"
    lexemes = lex(src)
    tokens = tokenize(lexemes, parse(lexemes), vocab)
    assert tokens[0].id == UNK
    assert tokens[0].text == "zq"


def test_vocabulary_roundtrip_json():
    vocab = make_vocab(["counter = counter + 1 ;"])
    clone = Vocabulary.from_json(vocab.to_json())
    assert clone.texts == vocab.texts
    assert clone.id_of("coun") == vocab.id_of("coun")


def test_build_vocabulary_orders_by_count_then_text():
    vocab = build_vocabulary([["b", "a", "b"]])
    assert vocab.texts[len(SPECIAL_TOKENS):] == ["b", "a"]


def test_build_vocabulary_cap():
    words = [f"w{i:03d}" for i in range(600)]
    vocab = build_vocabulary([words], max_size=512)
    assert len(vocab) == 512


def test_detokenize_merges_chunks():
    assert detokenize(["coun", "ter", "=", "coun", "ter", "+", "1", ";"]) \
        == "counter = counter + 1 ;"
    assert detokenize(["x", "=", "1", ";"]) == "x = 1 ;"


def test_detokenize_skips_specials():
    assert detokenize(["<pad>", "x", "=", "1", ";", "<eos>"]) == "x = 1 ;"


def test_detokenize_merge_needs_letter_start():
    # A number run never merges with a following chunk.
    assert detokenize(["1234", "x"]) == "1234 x"
    assert detokenize(["abcd", "x"]) == "abcdx"


def test_roundtrip_over_generated_corpus():
    records = generate_corpus(30, seed=4, task="identity")
    sources = [r.source for r in records]
    vocab = make_vocab(sources)
    for src in sources:
        lexemes = lex(src)
        tokens = tokenize(lexemes, parse(lexemes), vocab)
        assert detokenize(t.text for t in tokens) == src
        assert "".join(t.text for t in tokens) == src.replace(" ", "")


def test_text_mode_tokens_have_no_leaf():
    vocab = make_vocab(["x = 1 ;"])
    tokens = tokenize_text("assign x add counter 1 ;", vocab)
    assert all(t.leaf is None for t in tokens)
    texts = [t.text for t in tokens]
    # Reserved spec words stay whole; other long words are chunked.
    assert "assign" in texts
    assert "coun" in texts and "ter" in texts


def test_token_ids_match_vocabulary():
    src = "total = total + 2 ;"
    lexemes = lex(src)
    vocab = make_vocab([src])
    tokens = tokenize(lexemes, parse(lexemes), vocab)
    for t in tokens:
        assert vocab.text_of(t.id) == t.text
