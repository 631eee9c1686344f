"""Lexer for the small imperative language handled by this toolkit.

Grammar surface: identifiers, integer literals, the keywords
if/else/while/return, operators = + - * / < ==, and punctuation ; ( ) { }.
"""

from dataclasses import dataclass
from enum import Enum

from structkit.errors import UnknownCharacter

KEYWORDS = ("if", "else", "while", "return")
OPERATORS = ("==", "=", "+", "-", "*", "/", "<")
PUNCT = (";", "(", ")", "{", "}")


class LexKind(Enum):
    IDENT = "IDENT"
    NUMBER = "NUMBER"
    KEYWORD = "KEYWORD"
    OPERATOR = "OPERATOR"
    PUNCT = "PUNCT"


@dataclass(frozen=True)
class Lexeme:
    kind: LexKind
    text: str
    span: tuple[int, int]


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def lex(source: str) -> list[Lexeme]:
    """Split source text into maximal-munch lexemes.

    Raises UnknownCharacter for anything outside the alphabet.
    """
    out: list[Lexeme] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(source[j]):
                j += 1
            text = source[i:j]
            kind = LexKind.KEYWORD if text in KEYWORDS else LexKind.IDENT
            out.append(Lexeme(kind, text, (i, j)))
            i = j
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and source[j].isdigit():
                j += 1
            out.append(Lexeme(LexKind.NUMBER, source[i:j], (i, j)))
            i = j
            continue
        if ch == "=" and i + 1 < n and source[i + 1] == "=":
            out.append(Lexeme(LexKind.OPERATOR, "==", (i, i + 2)))
            i += 2
            continue
        if ch in "=+-*/<":
            out.append(Lexeme(LexKind.OPERATOR, ch, (i, i + 1)))
            i += 1
            continue
        if ch in PUNCT:
            out.append(Lexeme(LexKind.PUNCT, ch, (i, i + 1)))
            i += 1
            continue
        raise UnknownCharacter(i, ch)
    return out
