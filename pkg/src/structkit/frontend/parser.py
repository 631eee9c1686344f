"""Recursive-descent parser producing an arena-backed syntax tree.

Grammar:

    program := stmt*
    stmt    := assign | if | while | return
    assign  := IDENT '=' expr ';'
    if      := 'if' '(' expr ')' '{' stmt* '}' ('else' '{' stmt* '}')?
    while   := 'while' '(' expr ')' '{' stmt* '}'
    return  := 'return' expr ';'
    expr    := term (('+'|'-'|'<'|'==') term)*     (left associative)
    term    := factor (('*'|'/') factor)*          (left associative)
    factor  := IDENT | NUMBER | '(' expr ')'

Keywords, operators and punctuation all become leaves, so every token of the
source is covered by exactly one leaf. Operator chains with a single operand
collapse to that operand (there is no bare "expr" node type).
"""

from dataclasses import dataclass, field
from enum import IntEnum

from structkit.errors import ParseError
from structkit.frontend.lexer import Lexeme, LexKind


class NodeType(IntEnum):
    PROGRAM = 0
    ASSIGN_STMT = 1
    IF_STMT = 2
    WHILE_STMT = 3
    RETURN_STMT = 4
    BINARY_EXPR = 5
    PAREN_EXPR = 6
    BLOCK = 7
    IDENTIFIER = 8
    NUMBER = 9
    KEYWORD = 10
    OPERATOR = 11
    PUNCT = 12


N_NODE_TYPES = len(NodeType)

LEAF_TYPES = frozenset({
    NodeType.IDENTIFIER, NodeType.NUMBER, NodeType.KEYWORD,
    NodeType.OPERATOR, NodeType.PUNCT,
})

_LEAF_TYPE_FOR_KIND = {
    LexKind.IDENT: NodeType.IDENTIFIER,
    LexKind.NUMBER: NodeType.NUMBER,
    LexKind.KEYWORD: NodeType.KEYWORD,
    LexKind.OPERATOR: NodeType.OPERATOR,
    LexKind.PUNCT: NodeType.PUNCT,
}


@dataclass
class AstNode:
    id: int
    node_type: NodeType
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    leaf_lexeme: int | None = None


class Ast:
    """Node arena with parent links and an in-order leaf list."""

    def __init__(self, lexemes: list[Lexeme]):
        self.lexemes = lexemes
        self.nodes: list[AstNode] = []
        self.root = 0
        self._leaves: list[int] | None = None

    def new_node(self, node_type: NodeType, leaf_lexeme: int | None = None) -> int:
        node = AstNode(id=len(self.nodes), node_type=node_type,
                       leaf_lexeme=leaf_lexeme)
        self.nodes.append(node)
        return node.id

    def attach(self, parent: int, child: int) -> None:
        self.nodes[parent].children.append(child)
        self.nodes[child].parent = parent

    @property
    def leaves(self) -> list[int]:
        """Leaf node ids in source order (in-order traversal)."""
        if self._leaves is None:
            order: list[int] = []
            stack = [self.root]
            while stack:
                nid = stack.pop()
                node = self.nodes[nid]
                if node.leaf_lexeme is not None:
                    order.append(nid)
                stack.extend(reversed(node.children))
            self._leaves = order
        return self._leaves

    def path_from_root(self, node_id: int) -> list[int]:
        path = [node_id]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        path.reverse()
        return path

    def leaf_text(self, node_id: int) -> str:
        lex = self.nodes[node_id].leaf_lexeme
        assert lex is not None
        return self.lexemes[lex].text

    def dump(self) -> str:
        """Indented one-node-per-line listing: "<id> <node_type> parent=<id> [text]"."""
        lines: list[str] = []

        def walk(nid: int, depth: int) -> None:
            node = self.nodes[nid]
            parent = node.parent if node.parent is not None else "-"
            line = f"{'  ' * depth}{node.id} {node.node_type.name.lower()} parent={parent}"
            if node.leaf_lexeme is not None:
                line += f" [{self.lexemes[node.leaf_lexeme].text}]"
            lines.append(line)
            for child in node.children:
                walk(child, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


_EXPR_OPS = ("+", "-", "<", "==")
_TERM_OPS = ("*", "/")


class _Parser:
    def __init__(self, lexemes: list[Lexeme]):
        self.lexemes = lexemes
        self.pos = 0
        self.ast = Ast(lexemes)

    def peek(self) -> Lexeme | None:
        if self.pos < len(self.lexemes):
            return self.lexemes[self.pos]
        return None

    def error(self, expected: set[str]) -> ParseError:
        cur = self.peek()
        found = cur.text if cur is not None else "<eof>"
        return ParseError(self.pos, expected, found)

    def take_leaf(self) -> int:
        lex = self.lexemes[self.pos]
        nid = self.ast.new_node(_LEAF_TYPE_FOR_KIND[lex.kind], leaf_lexeme=self.pos)
        self.pos += 1
        return nid

    def expect(self, text: str) -> int:
        cur = self.peek()
        if cur is None or cur.text != text:
            raise self.error({text})
        return self.take_leaf()

    def expect_kind(self, kind: LexKind) -> int:
        cur = self.peek()
        if cur is None or cur.kind != kind:
            raise self.error({kind.value})
        return self.take_leaf()

    def at(self, text: str) -> bool:
        cur = self.peek()
        return cur is not None and cur.text == text

    def parse_program(self) -> Ast:
        root = self.ast.new_node(NodeType.PROGRAM)
        self.ast.root = root
        while self.peek() is not None:
            self.ast.attach(root, self.parse_stmt())
        return self.ast

    def parse_stmt(self) -> int:
        cur = self.peek()
        if cur is None:
            raise self.error({"statement"})
        if cur.kind == LexKind.IDENT:
            return self.parse_assign()
        if cur.text == "if":
            return self.parse_if()
        if cur.text == "while":
            return self.parse_while()
        if cur.text == "return":
            return self.parse_return()
        raise self.error({"IDENT", "if", "while", "return"})

    def parse_assign(self) -> int:
        node = self.ast.new_node(NodeType.ASSIGN_STMT)
        self.ast.attach(node, self.expect_kind(LexKind.IDENT))
        self.ast.attach(node, self.expect("="))
        self.ast.attach(node, self.parse_expr())
        self.ast.attach(node, self.expect(";"))
        return node

    def parse_if(self) -> int:
        node = self.ast.new_node(NodeType.IF_STMT)
        self.ast.attach(node, self.expect("if"))
        self.ast.attach(node, self.expect("("))
        self.ast.attach(node, self.parse_expr())
        self.ast.attach(node, self.expect(")"))
        self.ast.attach(node, self.parse_block())
        if self.at("else"):
            self.ast.attach(node, self.take_leaf())
            self.ast.attach(node, self.parse_block())
        return node

    def parse_while(self) -> int:
        node = self.ast.new_node(NodeType.WHILE_STMT)
        self.ast.attach(node, self.expect("while"))
        self.ast.attach(node, self.expect("("))
        self.ast.attach(node, self.parse_expr())
        self.ast.attach(node, self.expect(")"))
        self.ast.attach(node, self.parse_block())
        return node

    def parse_return(self) -> int:
        node = self.ast.new_node(NodeType.RETURN_STMT)
        self.ast.attach(node, self.expect("return"))
        self.ast.attach(node, self.parse_expr())
        self.ast.attach(node, self.expect(";"))
        return node

    def parse_block(self) -> int:
        node = self.ast.new_node(NodeType.BLOCK)
        self.ast.attach(node, self.expect("{"))
        while not self.at("}"):
            if self.peek() is None:
                raise self.error({"}", "statement"})
            self.ast.attach(node, self.parse_stmt())
        self.ast.attach(node, self.expect("}"))
        return node

    def parse_expr(self) -> int:
        return self._parse_chain(self.parse_term, _EXPR_OPS)

    def parse_term(self) -> int:
        return self._parse_chain(self.parse_factor, _TERM_OPS)

    def _parse_chain(self, sub, ops: tuple[str, ...]) -> int:
        left = sub()
        while True:
            cur = self.peek()
            if cur is None or cur.kind != LexKind.OPERATOR or cur.text not in ops:
                return left
            node = self.ast.new_node(NodeType.BINARY_EXPR)
            self.ast.attach(node, left)
            self.ast.attach(node, self.take_leaf())
            self.ast.attach(node, sub())
            left = node

    def parse_factor(self) -> int:
        cur = self.peek()
        if cur is None:
            raise self.error({"IDENT", "NUMBER", "("})
        if cur.kind in (LexKind.IDENT, LexKind.NUMBER):
            return self.take_leaf()
        if cur.text == "(":
            node = self.ast.new_node(NodeType.PAREN_EXPR)
            self.ast.attach(node, self.take_leaf())
            self.ast.attach(node, self.parse_expr())
            self.ast.attach(node, self.expect(")"))
            return node
        raise self.error({"IDENT", "NUMBER", "("})


def parse(lexemes: list[Lexeme]) -> Ast:
    """Parse a lexeme list into a syntax tree; raises ParseError on violations."""
    return _Parser(lexemes).parse_program()


def parse_source(source: str) -> Ast:
    from structkit.frontend.lexer import lex
    return parse(lex(source))
