"""Structure-based denoising corruption: token span noise plus random
dropping of DFG variables, AST leaves, and per-leaf ancestors.

Token corruption samples non-overlapping spans (uniform start, Poisson
length) until exactly ceil(rate * n) tokens are affected; each span gets one
op from {mask, random, delete}. Masked and randomly replaced tokens keep
their structure links; deleted tokens lose them, and a variable with no
surviving linked token is dropped. Targets always come from the clean
program.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from structkit.data import analyze, target_labels_from
from structkit.frontend.tokenizer import MASK, SPECIAL_TOKENS, Token, Vocabulary
from structkit.model.inputs import EncoderInput, TargetLabels
from structkit.structure import RootLeafPath, leaf_similarity

_EPS = 1e-9
OPS = ("mask", "random", "delete")


@dataclass
class CorruptionConfig:
    token_corrupt_rate: float = 0.35
    span_mean: float = 12.0
    structure_drop_rate: float = 0.35
    op_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.token_corrupt_rate <= 1.0:
            raise ValueError("token_corrupt_rate must be in [0, 1]")
        if not 0.0 <= self.structure_drop_rate <= 1.0:
            raise ValueError("structure_drop_rate must be in [0, 1]")
        if abs(sum(self.op_mix) - 1.0) > 1e-9:
            raise ValueError("op_mix must sum to 1")


@dataclass(frozen=True)
class TokenFate:
    op: str                 # keep | mask | random | delete
    new_index: int | None   # position in the corrupted sequence


@dataclass
class CorruptionStats:
    n_tokens: int = 0
    n_affected: int = 0
    raw_span_lengths: list[int] = field(default_factory=list)
    leaf_drops: int = 0
    var_drops: int = 0
    vars_lost_to_deletion: int = 0


def _budget(rate: float, n: int) -> int:
    return int(math.ceil(rate * n - _EPS))


def _floor_count(rate: float, n: int) -> int:
    return int(math.floor(rate * n + _EPS))


def corrupt_tokens(tokens: list[Token], cfg: CorruptionConfig,
                   rng: np.random.Generator, vocab: Vocabulary):
    """Returns (corrupted tokens, per-original-token fates, raw span draws)."""
    n = len(tokens)
    if n == 0:
        return [], [], []
    budget = _budget(cfg.token_corrupt_rate, n)
    ops = np.full(n, -1, dtype=np.int64)  # -1 keep, else index into OPS
    affected = 0
    raw_draws: list[int] = []
    while affected < budget:
        start = int(rng.integers(n))
        if ops[start] >= 0:
            continue
        raw = int(rng.poisson(cfg.span_mean))
        raw_draws.append(raw)
        length = min(raw, budget - affected)
        if length == 0:
            continue
        op = int(rng.choice(len(OPS), p=np.asarray(cfg.op_mix)))
        end = start
        while end < n and ops[end] < 0 and end - start < length:
            ops[end] = op
            end += 1
        affected += end - start
    n_specials = len(SPECIAL_TOKENS)
    n_real = len(vocab) - n_specials
    corrupted: list[Token] = []
    fates: list[TokenFate] = []
    for i, tok in enumerate(tokens):
        op = ops[i]
        if op < 0:
            fates.append(TokenFate("keep", len(corrupted)))
            corrupted.append(tok)
        elif OPS[op] == "mask":
            fates.append(TokenFate("mask", len(corrupted)))
            corrupted.append(Token(MASK, SPECIAL_TOKENS[MASK], tok.leaf))
        elif OPS[op] == "random":
            rand_id = n_specials + int(rng.integers(n_real))
            fates.append(TokenFate("random", len(corrupted)))
            corrupted.append(Token(rand_id, vocab.text_of(rand_id), tok.leaf))
        else:
            fates.append(TokenFate("delete", None))
    return corrupted, fates, raw_draws


def corrupt_structure(paths: list[RootLeafPath], n_vars: int,
                      cfg: CorruptionConfig, rng: np.random.Generator):
    """Returns (surviving leaf indices, surviving var indices, thinned paths).

    Drops floor(rate * n) leaves and variables uniformly without
    replacement, then thins each surviving leaf's ancestors independently at
    the same rate (the leaf node itself is never dropped).
    """
    n_leaves = len(paths)
    rate = cfg.structure_drop_rate
    drop_leaves = _floor_count(rate, n_leaves)
    drop_vars = _floor_count(rate, n_vars)
    leaf_perm = rng.permutation(n_leaves)
    dropped_leaf = set(int(i) for i in leaf_perm[:drop_leaves])
    var_perm = rng.permutation(n_vars)
    dropped_var = set(int(i) for i in var_perm[:drop_vars])
    surviving_leaves = [i for i in range(n_leaves) if i not in dropped_leaf]
    surviving_vars = [i for i in range(n_vars) if i not in dropped_var]
    thinned: list[RootLeafPath] = []
    for i in surviving_leaves:
        path = paths[i]
        keep_ids = []
        keep_types = []
        for k in range(len(path.node_ids) - 1):  # ancestors only
            if rng.random() >= rate:
                keep_ids.append(path.node_ids[k])
                keep_types.append(path.node_types[k])
        keep_ids.append(path.node_ids[-1])
        keep_types.append(path.node_types[-1])
        thinned.append(RootLeafPath(leaf=path.leaf,
                                    node_ids=tuple(keep_ids),
                                    node_types=tuple(keep_types)))
    return surviving_leaves, surviving_vars, thinned


@dataclass
class DaeExample:
    encoder_input: EncoderInput
    targets: TargetLabels
    stats: CorruptionStats


def make_dae_example(source: str, cfg: CorruptionConfig,
                     rng: np.random.Generator, vocab: Vocabulary,
                     h_max: int = 12) -> DaeExample:
    """Corrupted encoder side, clean target side, per-example statistics."""
    clean = analyze(source, vocab, h_max)
    targets = target_labels_from(clean)
    stats = CorruptionStats(n_tokens=len(clean.tokens))

    corrupted, fates, raw_draws = corrupt_tokens(clean.tokens, cfg, rng, vocab)
    stats.raw_span_lengths = [int(x) for x in raw_draws]
    stats.n_affected = sum(1 for f in fates if f.op != "keep")

    surv_leaves, surv_vars, thinned = corrupt_structure(
        clean.paths, clean.dfg.n_vars, cfg, rng)
    stats.leaf_drops = len(clean.paths) - len(surv_leaves)
    stats.var_drops = clean.dfg.n_vars - len(surv_vars)

    # Deleted tokens lose their links; a variable with no surviving linked
    # token is dropped on top of the random drops.
    surviving_rows = [i for i, f in enumerate(fates) if f.new_index is not None]
    old_link_dfg = clean.dfg.link
    kept_vars = []
    for j in surv_vars:
        if old_link_dfg[surviving_rows, j].any():
            kept_vars.append(j)
        else:
            stats.vars_lost_to_deletion += 1
    surv_vars = kept_vars

    n_new = len(corrupted)
    leaf_pos = {leaf: k for k, leaf in enumerate(surv_leaves)}
    link_ast = np.zeros((n_new, len(surv_leaves)), dtype=bool)
    for i, f in enumerate(fates):
        if f.new_index is None:
            continue
        leaf = clean.tokens[i].leaf
        if leaf in leaf_pos:
            link_ast[f.new_index, leaf_pos[leaf]] = True
    link_dfg = np.zeros((n_new, len(surv_vars)), dtype=bool)
    for jj, j in enumerate(surv_vars):
        for i in np.nonzero(old_link_dfg[:, j])[0]:
            f = fates[int(i)]
            if f.new_index is not None:
                link_dfg[f.new_index, jj] = True
    adjacency = clean.dfg.adjacency[np.ix_(surv_vars, surv_vars)]

    enc = EncoderInput(
        code_ids=np.array([t.id for t in corrupted], dtype=np.int64),
        leaf_type_paths=[p.node_types for p in thinned],
        link_ast=link_ast,
        link_dfg=link_dfg,
        adjacency=adjacency,
        sim=leaf_similarity(thinned),
    )
    return DaeExample(enc, targets, stats)


def example_seed(global_seed: int, example_index: int) -> int:
    return global_seed ^ example_index


def corpus_stats(sources: list[str], cfg: CorruptionConfig,
                 vocab: Vocabulary, h_max: int = 12) -> dict:
    """Empirical corruption statistics over a corpus (the corrupt --stats CLI)."""
    fractions = []
    span_lengths: list[int] = []
    leaf_drop_exact = True
    var_drop_exact = True
    lost = 0
    for idx, src in enumerate(sources):
        rng = np.random.default_rng(example_seed(cfg.seed, idx))
        ex = make_dae_example(src, cfg, rng, vocab, h_max)
        st = ex.stats
        if st.n_tokens:
            fractions.append(st.n_affected / st.n_tokens)
        span_lengths.extend(st.raw_span_lengths)
        clean = analyze(src, vocab, h_max)
        if st.leaf_drops != _floor_count(cfg.structure_drop_rate,
                                         len(clean.paths)):
            leaf_drop_exact = False
        if st.var_drops != _floor_count(cfg.structure_drop_rate,
                                        clean.dfg.n_vars):
            var_drop_exact = False
        lost += st.vars_lost_to_deletion
    return {
        "n_examples": len(sources),
        "mean_affected_fraction": float(np.mean(fractions)) if fractions else 0.0,
        "mean_raw_span_length": float(np.mean(span_lengths)) if span_lengths else 0.0,
        "n_spans": len(span_lengths),
        "leaf_drops_exact_floor": leaf_drop_exact,
        "var_drops_exact_floor": var_drop_exact,
        "vars_lost_to_deletion": lost,
    }
