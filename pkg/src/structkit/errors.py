"""Exception types shared across the toolkit."""


class StructkitError(Exception):
    """Base class for all structkit errors."""


class UnknownCharacter(StructkitError):
    """Source text contains a character outside the language alphabet."""

    def __init__(self, position: int, char: str):
        super().__init__(f"unknown character {char!r} at byte {position}")
        self.position = position
        self.char = char


class ParseError(StructkitError):
    """Input violates the grammar."""

    def __init__(self, position: int, expected: set[str], found: str):
        exp = ", ".join(sorted(expected))
        super().__init__(f"at lexeme {position}: expected {exp}, found {found!r}")
        self.position = position
        self.expected = frozenset(expected)
        self.found = found


class AllMaskedRow(StructkitError):
    """A softmax row was entirely -inf; signals a masking bug upstream."""


class UnknownNodeType(StructkitError):
    """A node type id falls outside the embedding table."""


class HeightOverflow(StructkitError):
    """A target ancestor height is not covered by the per-height classifiers."""


class GradCheckFailure(StructkitError):
    """Finite-difference check exceeded tolerance for a parameter."""

    def __init__(self, name: str, rel_err: float, tolerance: float):
        super().__init__(
            f"gradient check failed for {name!r}: "
            f"max relative error {rel_err:.3e} > {tolerance:.0e}")
        self.name = name
        self.rel_err = rel_err
        self.tolerance = tolerance


class NonFiniteLoss(StructkitError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, step: int, example_index: int, value: float):
        super().__init__(
            f"non-finite loss {value!r} at step {step}, example {example_index}")
        self.step = step
        self.example_index = example_index
        self.value = value
