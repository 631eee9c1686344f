"""Dataset records, the seeded program generator, corpus tasks, and example
preparation (source text -> model-ready numeric bundles).

Dataset files are JSONL: one object per line with fields source, target,
mode (translate | text2code | dae). Targets always parse; sources parse for
translate and dae.
"""

import json
from dataclasses import dataclass

import numpy as np

from structkit.frontend.lexer import LexKind, lex
from structkit.frontend.parser import Ast, NodeType, parse
from structkit.frontend.tokenizer import (
    EOS, Token, Vocabulary, build_vocabulary, code_token_texts,
    text_token_texts, tokenize, tokenize_text,
)
from structkit.model.config import ModelConfig
from structkit.model.inputs import EncoderInput, TargetLabels
from structkit.structure import (
    Dfg, RootLeafPath, build_dfg, dfp_pair_targets, leaf_similarity, link_ast,
    root_leaf_paths,
)

MODES = ("translate", "text2code", "dae")


@dataclass(frozen=True)
class DatasetRecord:
    source: str
    target: str
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


def write_jsonl(path: str, records: list[DatasetRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"source": rec.source, "target": rec.target,
                                 "mode": rec.mode}) + "\n")


def read_jsonl(path: str) -> list[DatasetRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                out.append(DatasetRecord(obj["source"], obj["target"],
                                         obj["mode"]))
    return out


# --------------------------------------------------------------------------
# Structured analysis of one side of an example.

@dataclass
class StructuredExample:
    source: str
    ast: Ast
    tokens: list[Token]
    dfg: Dfg
    paths: list[RootLeafPath]
    sim: np.ndarray
    link_ast: np.ndarray

    @property
    def n_code(self) -> int:
        return len(self.tokens)


def analyze(source: str, vocab: Vocabulary, h_max: int) -> StructuredExample:
    lexemes = lex(source)
    ast = parse(lexemes)
    tokens = tokenize(lexemes, ast, vocab)
    dfg = build_dfg(ast, tokens)
    paths = root_leaf_paths(ast, h_max)
    sim = leaf_similarity(paths)
    la = link_ast(tokens, len(ast.leaves))
    return StructuredExample(source, ast, tokens, dfg, paths, sim, la)


def encoder_input_from(ex: StructuredExample) -> EncoderInput:
    return EncoderInput(
        code_ids=np.array([t.id for t in ex.tokens], dtype=np.int64),
        leaf_type_paths=[p.node_types for p in ex.paths],
        link_ast=ex.link_ast,
        link_dfg=ex.dfg.link,
        adjacency=ex.dfg.adjacency,
        sim=ex.sim,
    )


def target_labels_from(ex: StructuredExample) -> TargetLabels:
    """Target ids end with <eos>; <eos> has no path and a zero y row/column."""
    ids = np.array([t.id for t in ex.tokens] + [EOS], dtype=np.int64)
    paths: list[tuple[int, ...] | None] = [
        ex.paths[t.leaf].node_types for t in ex.tokens]
    paths.append(None)
    y_code = dfp_pair_targets(ex.dfg.link, ex.dfg.adjacency)
    n = len(ids)
    y = np.zeros((n, n), dtype=bool)
    y[:n - 1, :n - 1] = y_code
    return TargetLabels(token_ids=ids, leaf_type_paths=paths, y=y)


def check_caps(enc: EncoderInput, cfg: ModelConfig) -> None:
    if enc.n_code > cfg.max_code_tokens:
        raise ValueError(f"{enc.n_code} code tokens exceed the "
                         f"max_code_tokens cap {cfg.max_code_tokens}")
    if enc.n_leaves > cfg.max_leaves:
        raise ValueError(f"{enc.n_leaves} leaves exceed the max_leaves cap "
                         f"{cfg.max_leaves}")
    if enc.n_vars > cfg.max_vars:
        raise ValueError(f"{enc.n_vars} variables exceed the max_vars cap "
                         f"{cfg.max_vars}")


def prepare(record: DatasetRecord, vocab: Vocabulary,
            cfg: ModelConfig) -> tuple[EncoderInput, TargetLabels]:
    """Build the model-ready pair for translate and text2code records.

    DAE records go through corruption.make_dae_example instead.
    """
    target_ex = analyze(record.target, vocab, cfg.h_max)
    labels = target_labels_from(target_ex)
    if record.mode == "text2code":
        ids = np.array([t.id for t in tokenize_text(record.source, vocab)],
                       dtype=np.int64)
        enc = EncoderInput.text_mode(ids)
    else:
        source_ex = analyze(record.source, vocab, cfg.h_max)
        enc = encoder_input_from(source_ex)
    check_caps(enc, cfg)
    return enc, labels


def extract_json(ex: StructuredExample) -> dict:
    """Per-example JSON for the extract CLI subcommand."""
    return {
        "tokens": [t.text for t in ex.tokens],
        "leaf_ids": list(ex.ast.leaves),
        "paths": [list(p.node_types) for p in ex.paths],
        "dfg_edges": [[int(i), int(j)]
                      for i, j in zip(*np.nonzero(ex.dfg.adjacency))],
        "link_ast": [[int(i), int(j)]
                     for i, j in zip(*np.nonzero(ex.link_ast))],
        "link_dfg": [[int(i), int(j)]
                     for i, j in zip(*np.nonzero(ex.dfg.link))],
    }


# --------------------------------------------------------------------------
# Seeded random program generator.

# Identifier lengths avoid multiples of 4 so detokenization is unambiguous.
IDENT_POOL = (
    "x", "y", "z", "a", "b", "c", "n", "k",
    "acc", "tmp", "sum", "cnt", "val", "res", "lim", "idx",
    "total", "delta", "count", "bound", "counter", "maxstep",
)
RENAME_POOL = (
    "p", "q", "r", "s", "t", "u", "v", "w",
    "alp", "bet", "gam", "dlt", "eps", "rho", "phj", "psi",
    "north", "south", "level", "pivot", "radix",
    "january", "october", "degrees",
    "elm", "oak", "fir", "ash",
)
_FILLER_BY_SIZE = {4: "pd", 5: "fills", 6: "fillfillf", 7: "fillfillfillf"}

_OPS = ("+", "-", "*", "/", "<", "==")


def count_code_tokens(source: str) -> int:
    return len(code_token_texts(lex(source)))


class ProgramGenerator:
    """Bounded-depth random MiniLang programs over a fixed identifier pool."""

    def __init__(self, rng: np.random.Generator, max_depth: int = 2,
                 max_stmts: int = 5, pool: tuple[str, ...] = IDENT_POOL):
        self.rng = rng
        self.max_depth = max_depth
        self.max_stmts = max_stmts
        self.pool = pool

    def _pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def _name(self, defined: list[str]) -> str:
        if defined and self.rng.random() < 0.8:
            return self._pick(defined)
        return self._pick(self.pool)

    def _atom(self, defined: list[str]) -> str:
        if defined and self.rng.random() < 0.6:
            return self._pick(defined)
        if self.rng.random() < 0.5:
            return self._pick(self.pool)
        return str(int(self.rng.integers(10)))

    def _expr(self, depth: int, defined: list[str]) -> str:
        if depth <= 0 or self.rng.random() < 0.35:
            return self._atom(defined)
        left = self._expr(depth - 1, defined)
        right = self._expr(depth - 1, defined)
        op = self._pick(_OPS)
        if self.rng.random() < 0.25:
            return f"( {left} {op} {right} )"
        return f"{left} {op} {right}"

    def _statement(self, depth: int, defined: list[str]) -> str:
        roll = self.rng.random()
        if depth <= 0 or roll < 0.6:
            name = self._name(defined)
            expr = self._expr(2, defined)
            if name not in defined:
                defined.append(name)
            return f"{name} = {expr} ;"
        if roll < 0.75:
            cond = self._expr(1, defined)
            then_branch = self._statements(depth - 1, list(defined))
            if self.rng.random() < 0.5:
                else_branch = self._statements(depth - 1, list(defined))
                return (f"if ( {cond} ) {{ {then_branch} }} "
                        f"else {{ {else_branch} }}")
            return f"if ( {cond} ) {{ {then_branch} }}"
        if roll < 0.9:
            cond = self._expr(1, defined)
            body = self._statements(depth - 1, list(defined))
            return f"while ( {cond} ) {{ {body} }}"
        return f"return {self._expr(2, defined)} ;"

    def _statements(self, depth: int, defined: list[str]) -> str:
        n = 1 + int(self.rng.integers(max(1, self.max_stmts - 1)))
        return " ".join(self._statement(depth, defined) for _ in range(n))

    def program(self) -> str:
        defined: list[str] = []
        n = 1 + int(self.rng.integers(self.max_stmts))
        return " ".join(self._statement(self.max_depth, defined)
                        for _ in range(n))

    def program_with_tokens(self, target_tokens: int) -> str:
        """A program with exactly target_tokens code tokens (filler-padded)."""
        assert target_tokens >= 4, "need room for at least one statement"
        stmts: list[str] = []
        sizes: list[int] = []
        defined: list[str] = []
        count = 0
        while count < target_tokens:
            stmt = self._statement(self.max_depth, defined)
            size = count_code_tokens(stmt)
            if count + size > target_tokens:
                break
            stmts.append(stmt)
            sizes.append(size)
            count += size
        gap = target_tokens - count
        if 0 < gap < 4:
            # A lone filler needs at least 4 tokens; free up room.
            count -= sizes.pop()
            stmts.pop()
            gap = target_tokens - count
        while gap:
            size = gap if gap in (4, 5, 6, 7) else 4
            stmts.append(f"{_FILLER_BY_SIZE[size]} = 1 ;")
            gap -= size
        return " ".join(stmts)


def rename_identifiers(source: str, rng: np.random.Generator) -> str:
    """Consistently rename identifiers using a disjoint pool."""
    lexemes = lex(source)
    distinct: list[str] = []
    for lx in lexemes:
        if lx.kind == LexKind.IDENT and lx.text not in distinct:
            distinct.append(lx.text)
    pool = list(RENAME_POOL)
    order = rng.permutation(len(pool))
    fresh = [pool[i] for i in order]
    assert len(distinct) <= len(fresh), "rename pool exhausted"
    mapping = dict(zip(distinct, fresh))
    out = [mapping.get(lx.text, lx.text) if lx.kind == LexKind.IDENT
           else lx.text for lx in lexemes]
    return " ".join(out)


# --------------------------------------------------------------------------
# Spec-string linearization (prefix form) for the text2code task.

_OP_WORDS = {"+": "add", "-": "sub", "*": "mul", "/": "div",
             "<": "lt", "==": "eq"}


def linearize(ast: Ast) -> str:
    """Canonical prefix spec string, e.g. "assign x add a b ;"."""
    from structkit.frontend.parser import NodeType

    def expr(nid: int) -> str:
        node = ast.nodes[nid]
        if node.node_type == NodeType.BINARY_EXPR:
            lhs, op, rhs = node.children
            return f"{_OP_WORDS[ast.leaf_text(op)]} {expr(lhs)} {expr(rhs)}"
        if node.node_type == NodeType.PAREN_EXPR:
            return expr(node.children[1])
        return ast.leaf_text(nid)

    def stmt(nid: int) -> str:
        node = ast.nodes[nid]
        if node.node_type == NodeType.ASSIGN_STMT:
            lhs, _eq, e, _semi = node.children
            return f"assign {ast.leaf_text(lhs)} {expr(e)} ;"
        if node.node_type == NodeType.IF_STMT:
            cond = expr(node.children[2])
            body = block(node.children[4])
            if len(node.children) > 5:
                return (f"if {cond} {{ {body} }} "
                        f"else {{ {block(node.children[6])} }}")
            return f"if {cond} {{ {body} }}"
        if node.node_type == NodeType.WHILE_STMT:
            return f"while {expr(node.children[2])} {{ {block(node.children[4])} }}"
        if node.node_type == NodeType.RETURN_STMT:
            return f"return {expr(node.children[1])} ;"
        raise AssertionError(f"unexpected statement {node.node_type!r}")

    def block(nid: int) -> str:
        return " ".join(stmt(c) for c in ast.nodes[nid].children[1:-1])

    root = ast.nodes[ast.root]
    return " ".join(stmt(c) for c in root.children)


def fits_caps(program: str, max_leaves: int, max_vars: int) -> bool:
    ast = parse(lex(program))
    n_leaves = len(ast.leaves)
    n_vars = sum(1 for nid in ast.leaves
                 if ast.nodes[nid].node_type == NodeType.IDENTIFIER)
    return n_leaves <= max_leaves and n_vars <= max_vars


def generate_corpus(n: int, seed: int, task: str,
                    max_depth: int = 2, max_stmts: int = 4,
                    target_tokens: int | None = None,
                    max_leaves: int | None = None,
                    max_vars: int | None = None) -> list[DatasetRecord]:
    """identity: target == source; rename: identifiers consistently renamed;
    spec2code: source is the linearized spec string.

    When max_leaves/max_vars are given, oversized programs are redrawn so
    every record fits the encoder caps (deterministic given the seed).
    """
    if task not in ("identity", "rename", "spec2code"):
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    gen = ProgramGenerator(rng, max_depth=max_depth, max_stmts=max_stmts)
    records = []
    for _ in range(n):
        while True:
            if target_tokens is None:
                program = gen.program()
            else:
                program = gen.program_with_tokens(target_tokens)
            if fits_caps(program,
                         max_leaves if max_leaves is not None else 1 << 30,
                         max_vars if max_vars is not None else 1 << 30):
                break
        if task == "identity":
            records.append(DatasetRecord(program, program, "translate"))
        elif task == "rename":
            records.append(DatasetRecord(program,
                                         rename_identifiers(program, rng),
                                         "translate"))
        else:
            spec = linearize(parse(lex(program)))
            records.append(DatasetRecord(spec, program, "text2code"))
    return records


def vocabulary_for(records: list[DatasetRecord],
                   max_size: int = 512) -> Vocabulary:
    lists = []
    for rec in records:
        if rec.mode == "text2code":
            lists.append(text_token_texts(rec.source))
        else:
            lists.append([t for t, _ in code_token_texts(lex(rec.source))])
        lists.append([t for t, _ in code_token_texts(lex(rec.target))])
    return build_vocabulary(lists, max_size=max_size)
