"""Lexing, parsing, and subword tokenization front-end."""

from structkit.frontend.lexer import Lexeme, LexKind, lex
from structkit.frontend.parser import (
    Ast, AstNode, LEAF_TYPES, N_NODE_TYPES, NodeType, parse, parse_source,
)
from structkit.frontend.tokenizer import (
    CLS, EOS, MASK, PAD, SEP, UNK, Token, Vocabulary,
    build_vocabulary, chunk_word, detokenize, tokenize, tokenize_text,
)

__all__ = [
    "Lexeme", "LexKind", "lex",
    "Ast", "AstNode", "LEAF_TYPES", "N_NODE_TYPES", "NodeType",
    "parse", "parse_source",
    "PAD", "CLS", "SEP", "MASK", "UNK", "EOS",
    "Token", "Vocabulary", "build_vocabulary", "chunk_word",
    "detokenize", "tokenize", "tokenize_text",
]
