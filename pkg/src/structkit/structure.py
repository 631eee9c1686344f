"""Structure extraction: data flow graph, link matrices, paths, similarity.

The DFG is built over identifier occurrences (not names), in token order.
Edges follow two rules:
  computed-from: for `x = e;` the defined occurrence of x has an edge from
    every identifier occurrence inside e;
  comes-from: every use occurrence has an edge from each of its reaching
    definitions, computed to fixed point (if branches merge; while bodies
    flow back to the loop head and out).
D[i][j] = 1 reads "the value of occurrence i is obtained from occurrence j".
"""

from dataclasses import dataclass

import numpy as np

from structkit.frontend.parser import Ast, NodeType
from structkit.frontend.tokenizer import Token


@dataclass(frozen=True)
class Occurrence:
    leaf: int                    # leaf-list index (== lexeme index)
    node_id: int                 # AST node id of the identifier leaf
    name: str
    token_range: tuple[int, int]  # [start, stop) over the code token list


@dataclass
class Dfg:
    occurrences: list[Occurrence]
    comes_from: np.ndarray     # bool |V| x |V|
    computed_from: np.ndarray  # bool |V| x |V|
    link: np.ndarray           # bool |S| x |V|

    @property
    def adjacency(self) -> np.ndarray:
        return self.comes_from | self.computed_from

    @property
    def n_vars(self) -> int:
        return len(self.occurrences)


@dataclass(frozen=True)
class RootLeafPath:
    leaf: int              # AST node id of the leaf
    node_ids: tuple[int, ...]
    node_types: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.node_ids)


def _identifier_leaves(ast: Ast, node_id: int) -> list[int]:
    """Identifier leaf node ids under node_id, in source order."""
    out: list[int] = []
    stack = [node_id]
    while stack:
        nid = stack.pop()
        node = ast.nodes[nid]
        if node.node_type == NodeType.IDENTIFIER:
            out.append(nid)
        stack.extend(reversed(node.children))
    return out


def _expr_of_if_while(ast: Ast, node_id: int) -> int:
    # children: keyword, '(', expr, ')', block, ...
    return ast.nodes[node_id].children[2]


class _DfgBuilder:
    """Structural reaching-definitions walk with while-loop fixpoints.

    State maps variable name -> frozenset of defining occurrence indices.
    """

    def __init__(self, ast: Ast, occ_index: dict[int, int], names: list[str]):
        self.ast = ast
        self.occ_index = occ_index  # identifier node id -> occurrence index
        self.names = names          # occurrence index -> name
        n = len(names)
        self.comes_from = np.zeros((n, n), dtype=bool)
        self.computed_from = np.zeros((n, n), dtype=bool)

    def run(self) -> None:
        root = self.ast.nodes[self.ast.root]
        self.walk_stmts(root.children, {}, record=True)

    def uses(self, expr_node: int, state: dict, record: bool) -> None:
        for leaf in _identifier_leaves(self.ast, expr_node):
            use = self.occ_index[leaf]
            if record:
                for d in state.get(self.names[use], frozenset()):
                    self.comes_from[use, d] = True

    def walk_stmts(self, stmts: list[int], state: dict, record: bool) -> dict:
        for nid in stmts:
            state = self.walk_stmt(nid, state, record)
        return state

    def walk_stmt(self, nid: int, state: dict, record: bool) -> dict:
        node = self.ast.nodes[nid]
        kind = node.node_type
        if kind == NodeType.ASSIGN_STMT:
            lhs, _eq, expr, _semi = node.children
            self.uses(expr, state, record)
            def_idx = self.occ_index[lhs]
            if record:
                for leaf in _identifier_leaves(self.ast, expr):
                    self.computed_from[def_idx, self.occ_index[leaf]] = True
            state = dict(state)
            state[self.names[def_idx]] = frozenset({def_idx})
            return state
        if kind == NodeType.IF_STMT:
            self.uses(_expr_of_if_while(self.ast, nid), state, record)
            then_block = node.children[4]
            then_state = self.walk_block(then_block, state, record)
            if len(node.children) > 5:  # keyword 'else' + block
                else_state = self.walk_block(node.children[6], state, record)
            else:
                else_state = state
            return _merge(then_state, else_state)
        if kind == NodeType.WHILE_STMT:
            cond = _expr_of_if_while(self.ast, nid)
            body = node.children[4]
            head = state
            while True:  # fixed point, no recording
                exit_state = self.walk_block(body, head, record=False)
                merged = _merge(head, exit_state)
                if merged == head:
                    break
                head = merged
            if record:
                self.uses(cond, head, record=True)
                self.walk_block(body, head, record=True)
            return head
        if kind == NodeType.RETURN_STMT:
            self.uses(node.children[1], state, record)
            return state
        raise AssertionError(f"unexpected statement node {kind!r}")

    def walk_block(self, block_id: int, state: dict, record: bool) -> dict:
        stmts = self.ast.nodes[block_id].children[1:-1]  # strip braces
        return self.walk_stmts(stmts, state, record)


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for name, defs in b.items():
        out[name] = out.get(name, frozenset()) | defs
    return out


def build_dfg(ast: Ast, tokens: list[Token]) -> Dfg:
    """Extract the DFG; occurrences are identifier leaves in token order."""
    ident_leaves = [nid for nid in ast.leaves
                    if ast.nodes[nid].node_type == NodeType.IDENTIFIER]
    occ_index = {nid: i for i, nid in enumerate(ident_leaves)}
    names = [ast.leaf_text(nid) for nid in ident_leaves]

    leaf_list_index = {nid: k for k, nid in enumerate(ast.leaves)}
    ranges: list[tuple[int, int]] = []
    for nid in ident_leaves:
        rows = [i for i, tok in enumerate(tokens)
                if tok.leaf == leaf_list_index[nid]]
        assert rows and rows == list(range(rows[0], rows[-1] + 1))
        ranges.append((rows[0], rows[-1] + 1))

    builder = _DfgBuilder(ast, occ_index, names)
    builder.run()
    occurrences = [
        Occurrence(leaf=leaf_list_index[nid], node_id=nid,
                   name=names[i], token_range=ranges[i])
        for i, nid in enumerate(ident_leaves)
    ]
    dfg = Dfg(occurrences, builder.comes_from, builder.computed_from,
              link=np.zeros((len(tokens), len(occurrences)), dtype=bool))
    dfg.link = link_dfg(dfg, tokens)
    return dfg


def link_dfg(dfg: Dfg, tokens: list[Token]) -> np.ndarray:
    """L^dfg[i][j] = 1 iff token i lies in the token range of occurrence j."""
    link = np.zeros((len(tokens), len(dfg.occurrences)), dtype=bool)
    for j, occ in enumerate(dfg.occurrences):
        start, stop = occ.token_range
        link[start:stop, j] = True
    return link


def link_ast(tokens: list[Token], n_leaves: int) -> np.ndarray:
    """L^ast[i][j] = 1 iff token i belongs to leaf j; one 1 per row."""
    link = np.zeros((len(tokens), n_leaves), dtype=bool)
    for i, tok in enumerate(tokens):
        link[i, tok.leaf] = True
    return link


def root_leaf_paths(ast: Ast, h_max: int) -> list[RootLeafPath]:
    """One root-to-leaf path per leaf; long paths keep the deepest h_max nodes."""
    out: list[RootLeafPath] = []
    for leaf in ast.leaves:
        ids = ast.path_from_root(leaf)
        if len(ids) > h_max:
            ids = ids[len(ids) - h_max:]
        types = tuple(int(ast.nodes[n].node_type) for n in ids)
        out.append(RootLeafPath(leaf=leaf, node_ids=tuple(ids), node_types=types))
    return out


def leaf_similarity(paths: list[RootLeafPath]) -> np.ndarray:
    """Eq.-style path similarity: sim_ij = ln(1 + c^2 / (|l_i| |l_j|)).

    c counts positions where the two paths hold the identical node, which on
    a single tree is the common prefix length of the node-id sequences.
    """
    n = len(paths)
    if n == 0:
        return np.zeros((0, 0), dtype=np.float64)
    lengths = np.array([len(p) for p in paths], dtype=np.int64)
    width = int(lengths.max())
    # Unique negative padding per row so padded positions never match.
    padded = np.empty((n, width), dtype=np.int64)
    for i, p in enumerate(paths):
        padded[i, :lengths[i]] = p.node_ids
        padded[i, lengths[i]:] = -(i + 1)
    eq = padded[:, None, :] == padded[None, :, :]
    prefix = np.cumprod(eq, axis=2, dtype=np.int64)
    c = prefix.sum(axis=2)
    # Matches only count positions up to the shorter path (the diagonal
    # compares a row to itself, where padding trivially "matches").
    c = np.minimum(c, np.minimum(lengths[:, None], lengths[None, :]))
    c = c.astype(np.float64)
    ratio = (c * c) / (lengths[:, None] * lengths[None, :]).astype(np.float64)
    return np.log1p(ratio)


def dfp_pair_targets(link: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """Token-pair data-flow labels: y_ij = 1 iff some linked occurrence pair
    (a of token i, b of token j) has adjacency[a][b] = 1."""
    if link.shape[1] == 0:
        return np.zeros((link.shape[0], link.shape[0]), dtype=bool)
    l = link.astype(np.int64)
    return (l @ adjacency.astype(np.int64) @ l.T) > 0
