"""Subword tokenization with token-to-leaf links, and the vocabulary.

Identifiers are split into consecutive 4-character chunks; every other lexeme
is one token. All chunks of an identifier share its leaf, so the induced
token-to-leaf link matrix has exactly one 1 per token row.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from structkit.frontend.lexer import Lexeme, LexKind
from structkit.frontend.parser import Ast

PAD, CLS, SEP, MASK, UNK, EOS = 0, 1, 2, 3, 4, 5
SPECIAL_TOKENS = ("<pad>", "<cls>", "<sep>", "<mask>", "<unk>", "<eos>")

CHUNK = 4

# Spec-string words exempt from chunking in text mode (all other words longer
# than CHUNK characters are treated as identifiers).
TEXT_RESERVED = frozenset({"assign", "while", "return"})

_IDENT_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


@dataclass(frozen=True)
class Token:
    id: int
    text: str
    leaf: int | None  # index into Ast.leaves order; None in text mode


class Vocabulary:
    """Fixed-id token table: six specials first, then corpus tokens."""

    def __init__(self, words: Sequence[str] = ()):
        self.texts: list[str] = list(SPECIAL_TOKENS)
        self._index: dict[str, int] = {t: i for i, t in enumerate(self.texts)}
        for w in words:
            self.add(w)

    def add(self, text: str) -> int:
        if text not in self._index:
            self._index[text] = len(self.texts)
            self.texts.append(text)
        return self._index[text]

    def id_of(self, text: str) -> int:
        return self._index.get(text, UNK)

    def text_of(self, token_id: int) -> str:
        return self.texts[token_id]

    def __len__(self) -> int:
        return len(self.texts)

    def __contains__(self, text: str) -> bool:
        return text in self._index

    def to_json(self) -> list[str]:
        return self.texts[len(SPECIAL_TOKENS):]

    @classmethod
    def from_json(cls, words: list[str]) -> "Vocabulary":
        return cls(words)


def chunk_word(word: str) -> list[str]:
    """Split into consecutive CHUNK-character pieces (last may be shorter)."""
    return [word[i:i + CHUNK] for i in range(0, len(word), CHUNK)] or [word]


def code_token_texts(lexemes: Sequence[Lexeme]) -> list[tuple[str, int]]:
    """(text, leaf index) pairs; leaf index equals lexeme index by construction."""
    out: list[tuple[str, int]] = []
    for i, lx in enumerate(lexemes):
        if lx.kind == LexKind.IDENT and len(lx.text) > CHUNK:
            out.extend((piece, i) for piece in chunk_word(lx.text))
        else:
            out.append((lx.text, i))
    return out


def tokenize(lexemes: Sequence[Lexeme], ast: Ast, vocab: Vocabulary) -> list[Token]:
    """Tokenize code; each token links to the leaf owning its lexeme."""
    # In-order leaf k owns lexeme k (spans strictly increase), so lexeme index
    # doubles as the leaf-list index used by the link matrices.
    for k, leaf_id in enumerate(ast.leaves):
        assert ast.nodes[leaf_id].leaf_lexeme == k, "leaf order out of sync"
    return [Token(vocab.id_of(text), text, leaf)
            for text, leaf in code_token_texts(lexemes)]


def text_token_texts(text: str) -> list[str]:
    out: list[str] = []
    for word in text.split():
        if len(word) > CHUNK and word not in TEXT_RESERVED:
            out.extend(chunk_word(word))
        else:
            out.append(word)
    return out


def tokenize_text(text: str, vocab: Vocabulary) -> list[Token]:
    """Tokenize a structure-free spec string; tokens carry no leaf link."""
    return [Token(vocab.id_of(t), t, None) for t in text_token_texts(text)]


def _ident_like(text: str) -> bool:
    return bool(text) and all(c in _IDENT_CHARS for c in text)


def detokenize(texts: Iterable[str]) -> str:
    """Join token texts back into source text.

    A run of identifier-like tokens merges into one word while every
    non-final token has length exactly CHUNK and the run starts with a
    letter or underscore; all other tokens are space-separated.
    """
    words: list[str] = []
    run = ""
    for text in texts:
        if text in SPECIAL_TOKENS:
            continue
        if run:
            if _ident_like(text):
                run += text
                if len(text) != CHUNK:
                    words.append(run)
                    run = ""
                continue
            words.append(run)
            run = ""
        if _ident_like(text) and len(text) == CHUNK and not text[0].isdigit():
            run = text
        else:
            words.append(text)
    if run:
        words.append(run)
    return " ".join(words)


def build_vocabulary(token_lists: Iterable[Sequence[str]],
                     max_size: int = 512) -> Vocabulary:
    """Frequency-sorted vocabulary (ties broken by text), capped at max_size."""
    counts: Counter[str] = Counter()
    for texts in token_lists:
        counts.update(texts)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    budget = max_size - len(SPECIAL_TOKENS)
    return Vocabulary([text for text, _ in ranked[:budget]])
