"""Structure-aware seq2seq toolkit for a small imperative language."""

__version__ = "0.1.0"
