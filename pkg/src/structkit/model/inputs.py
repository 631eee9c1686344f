"""Numeric example bundles consumed by the model.

EncoderInput composes as <cls>, code tokens, <sep>, AST leaves, DFG variables;
text-mode inputs carry no leaves or variables and compose as <cls> tokens
<sep>. TargetLabels hold the teacher-forced target ids (ending in <eos>), the
per-position root-leaf paths for APP, and the token-pair flow matrix for DFP;
the <eos> position has no path and an all-zero y row and column.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class EncoderInput:
    code_ids: np.ndarray                      # (n_s,) vocab ids, no specials
    leaf_type_paths: list[tuple[int, ...]]    # per leaf, trimmed type-id path
    link_ast: np.ndarray                      # bool (n_s, n_leaf)
    link_dfg: np.ndarray                      # bool (n_s, n_var)
    adjacency: np.ndarray                     # bool (n_var, n_var)
    sim: np.ndarray                           # float (n_leaf, n_leaf)

    @property
    def n_code(self) -> int:
        return len(self.code_ids)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_type_paths)

    @property
    def n_vars(self) -> int:
        return self.adjacency.shape[0]

    @property
    def length(self) -> int:
        return 1 + self.n_code + 1 + self.n_leaves + self.n_vars

    @classmethod
    def text_mode(cls, code_ids: np.ndarray) -> "EncoderInput":
        return cls(
            code_ids=np.asarray(code_ids, dtype=np.int64),
            leaf_type_paths=[],
            link_ast=np.zeros((len(code_ids), 0), dtype=bool),
            link_dfg=np.zeros((len(code_ids), 0), dtype=bool),
            adjacency=np.zeros((0, 0), dtype=bool),
            sim=np.zeros((0, 0), dtype=np.float64),
        )


@dataclass
class TargetLabels:
    token_ids: np.ndarray                            # (|T|,) ends with <eos>
    leaf_type_paths: list[tuple[int, ...] | None]    # per position; None = no path
    y: np.ndarray                                    # bool (|T|, |T|)

    @property
    def length(self) -> int:
        return len(self.token_ids)
