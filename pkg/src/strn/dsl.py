"""Plain-text problem files (``.nls``) and the arithmetic expressions inside them.

A problem file looks like::

    # Rosenbrock written as a square system
    name rosenbrock
    vars 2
    eq 10*(x2 - x1^2)
    eq 1 - x1
    lower -inf -inf
    upper inf inf
    start -1.2 1
    solution 1 1

``eq`` lines give F_1 ... F_n in order, ``start`` may repeat, ``lower`` and
``upper`` default to an unbounded box.  Expressions use ``+ - * / ^``,
parentheses, variables ``x1`` ... ``xn`` and the functions exp, log, sin, cos,
tan, sqrt and abs.  ``^`` binds tighter than unary minus and is
right-associative, so ``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is 512.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import (
    DSLError,
    ExpressionSyntaxError,
    FormatError,
    NonFiniteEvaluation,
    UnknownIdentifier,
    VariableIndexOutOfRange,
)
from .problem import Bounds, ProblemDefinition

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sqrt", "abs")

# limits that keep parsing and evaluation well inside the interpreter stack
MAX_NESTING = 64
MAX_TREE_DEPTH = 256

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VAR_RE = re.compile(r"x([1-9][0-9]*)")
_LITERAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
_NAME_RE = re.compile(r"[A-Za-z0-9_.\-]+")


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


# --- tokenizer and parser --------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    column: int


def _tokenize(text: str, line: Optional[int]) -> List[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m and ch in "0123456789.":
            tokens.append(_Token("num", m.group(), i + 1))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), i + 1))
            i = m.end()
            continue
        if ch in "+-*/^(),":
            tokens.append(_Token("op", ch, i + 1))
            i += 1
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", line, i + 1)
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    # expr   := term (("+" | "-") term)*
    # term   := unary (("*" | "/") unary)*
    # unary  := ("-" | "+") unary | power
    # power  := atom ("^" unary)?
    # atom   := number | variable | func "(" expr ")" | "(" expr ")"

    def __init__(self, text: str, n_vars: int, line: Optional[int]):
        self.tokens = _tokenize(text, line)
        self.pos = 0
        self.n_vars = n_vars
        self.line = line
        self.depth = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: _Token, cls=ExpressionSyntaxError):
        return cls(message, self.line, tok.column)

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            found = tok.text or "end of expression"
            raise self.error(f"expected {text!r}, found {found!r}", tok)
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise self.error(f"unexpected {tok.text!r}", tok)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error(f"expression nested more than {MAX_NESTING} levels deep", tok)
        try:
            if tok.kind == "op" and tok.text == "-":
                self.advance()
                return Neg(self.unary())
            if tok.kind == "op" and tok.text == "+":
                self.advance()
                return self.unary()
            return self.power()
        finally:
            self.depth -= 1

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            m = _VAR_RE.fullmatch(tok.text)
            if m:
                index = int(m.group(1)) - 1
                if index >= self.n_vars:
                    raise self.error(
                        f"variable {tok.text} exceeds the {self.n_vars} declared variables",
                        tok, VariableIndexOutOfRange,
                    )
                return Var(index)
            raise self.error(f"unknown identifier {tok.text!r}", tok, UnknownIdentifier)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of expression"
        raise self.error(f"unexpected {found!r}", tok)


def _tree_depth(node: Node) -> int:
    depth = 0
    stack = [(node, 1)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if isinstance(node, BinOp):
            stack += [(node.left, d + 1), (node.right, d + 1)]
        elif isinstance(node, Neg):
            stack.append((node.operand, d + 1))
        elif isinstance(node, Call):
            stack.append((node.arg, d + 1))
    return depth


def parse_expression(text: str, n_vars: int, line: Optional[int] = None) -> Node:
    ast = _Parser(text, n_vars, line).parse()
    if _tree_depth(ast) > MAX_TREE_DEPTH:
        raise ExpressionSyntaxError(f"expression tree deeper than {MAX_TREE_DEPTH} levels", line, 1)
    return ast


# --- evaluation ------------------------------------------------------------

def _div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except OverflowError:
        return math.inf
    except ValueError:
        if a == 0.0:
            return math.inf  # 0 ^ negative
        raise NonFiniteEvaluation(f"{a!r} ^ {b!r} is not real") from None


def _exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _domain(func):
    def wrapped(a: float) -> float:
        try:
            return func(a)
        except ValueError:
            raise NonFiniteEvaluation(f"{func.__name__}({a!r}) is outside the domain") from None
    return wrapped


_CALLS = {
    "exp": _exp,
    "log": _domain(math.log),
    "sin": _domain(math.sin),
    "cos": _domain(math.cos),
    "tan": _domain(math.tan),
    "sqrt": _domain(math.sqrt),
    "abs": abs,
}

_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


def _eval(node: Node, x) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, BinOp):
        value = _BINARY[node.op](_eval(node.left, x), _eval(node.right, x))
        if value != value:
            raise NonFiniteEvaluation(f"'{node.op}' produced NaN")
        return value
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    return _CALLS[node.func](_eval(node.arg, x))


def evaluate_ast(ast: Node, x) -> float:
    """Evaluate in IEEE double precision.

    Infinities may appear in intermediate results (1/0, overflow) but a
    non-finite final value, a NaN anywhere, or a real-domain error such as
    log(-1) raises NonFiniteEvaluation.
    """
    value = _eval(ast, x)
    if not math.isfinite(value):
        raise NonFiniteEvaluation(f"expression evaluates to {value!r}")
    return value


def max_variable_index(ast: Node) -> int:
    """Largest 0-based variable index used, -1 for constant expressions."""
    if isinstance(ast, Var):
        return ast.index
    if isinstance(ast, BinOp):
        return max(max_variable_index(ast.left), max_variable_index(ast.right))
    if isinstance(ast, Neg):
        return max_variable_index(ast.operand)
    if isinstance(ast, Call):
        return max_variable_index(ast.arg)
    return -1


# --- problem files ---------------------------------------------------------

class _ExpressionResidual:
    """Residual built from parsed equations; picklable and stateless."""

    def __init__(self, asts: Tuple[Node, ...]):
        self.asts = asts

    def __call__(self, x) -> np.ndarray:
        return np.array([evaluate_ast(ast, x) for ast in self.asts])


def _parse_values(rest: str, n: int, lineno: int, keyword: str, allow_inf: Optional[str] = None) -> np.ndarray:
    parts = rest.split()
    if len(parts) != n:
        raise FormatError(f"'{keyword}' needs {n} values, got {len(parts)}", lineno)
    values = []
    for part in parts:
        low = part.lower()
        if allow_inf == "lower" and low == "-inf":
            values.append(-math.inf)
        elif allow_inf == "upper" and low in ("inf", "+inf"):
            values.append(math.inf)
        elif _LITERAL_RE.fullmatch(part):
            values.append(float(part))
        else:
            raise FormatError(f"invalid number {part!r} in '{keyword}'", lineno)
    return np.array(values)


def parse_problem_file(text: str) -> ProblemDefinition:
    """Parse ``.nls`` text into a ProblemDefinition (Jacobian by finite differences)."""
    single = {}  # keyword -> (lineno, rest)
    eq_lines: List[Tuple[int, str]] = []
    start_lines: List[Tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *tail = line.split(None, 1)
        rest = tail[0].strip() if tail else ""
        if keyword == "eq":
            eq_lines.append((lineno, rest))
        elif keyword == "start":
            start_lines.append((lineno, rest))
        elif keyword in ("name", "vars", "lower", "upper", "solution"):
            if keyword in single:
                raise FormatError(f"duplicate '{keyword}' line (first on line {single[keyword][0]})", lineno)
            single[keyword] = (lineno, rest)
        else:
            raise FormatError(f"unknown keyword {keyword!r}", lineno, 1)

    for keyword in ("name", "vars"):
        if keyword not in single:
            raise FormatError(f"missing '{keyword}' line")
    name_line, name = single["name"]
    if not _NAME_RE.fullmatch(name):
        raise FormatError(f"invalid problem name {name!r}", name_line)
    vars_line, vars_text = single["vars"]
    if not re.fullmatch(r"[1-9][0-9]*", vars_text):
        raise FormatError(f"'vars' needs a positive integer, got {vars_text!r}", vars_line)
    n = int(vars_text)
    if len(eq_lines) != n:
        where = eq_lines[-1][0] if eq_lines else vars_line
        raise FormatError(f"expected {n} 'eq' lines, found {len(eq_lines)}", where)
    if not start_lines:
        raise FormatError("missing 'start' line")

    asts = tuple(parse_expression(expr, n, line=lineno) for lineno, expr in eq_lines)

    lower = np.full(n, -math.inf)
    upper = np.full(n, math.inf)
    if "lower" in single:
        lineno, rest = single["lower"]
        lower = _parse_values(rest, n, lineno, "lower", allow_inf="lower")
    if "upper" in single:
        lineno, rest = single["upper"]
        upper = _parse_values(rest, n, lineno, "upper", allow_inf="upper")
    if not np.all(lower < upper):
        bad = int(np.flatnonzero(~(lower < upper))[0])
        lineno = single.get("upper", single.get("lower"))[0]
        raise FormatError(f"lower bound not below upper bound for x{bad + 1}", lineno)
    try:
        bounds = Bounds(lower, upper)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc

    starts = []
    for lineno, rest in start_lines:
        x0 = _parse_values(rest, n, lineno, "start")
        if not bounds.is_interior(x0):
            raise FormatError("starting point is not strictly inside the bounds", lineno)
        starts.append(x0)

    solution = None
    if "solution" in single:
        lineno, rest = single["solution"]
        solution = _parse_values(rest, n, lineno, "solution")

    try:
        return ProblemDefinition(
            name=name,
            dimension=n,
            residual=_ExpressionResidual(asts),
            bounds=bounds,
            starting_points=tuple(starts),
            known_solution=solution,
            equations=tuple(expr for _, expr in eq_lines),
        )
    except (ValueError, DSLError) as exc:
        raise FormatError(str(exc)) from exc


def load_problem_file(path) -> ProblemDefinition:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"file is not valid UTF-8 (byte offset {exc.start})") from exc
    return parse_problem_file(text)


def _format_value(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def serialize_problem(problem: ProblemDefinition) -> str:
    """Render a problem that carries equation sources as ``.nls`` text."""
    if problem.equations is None:
        raise ValueError(f"problem {problem.name!r} has no expression form and cannot be exported")
    lines = []
    if problem.description:
        lines += [f"# {row}" for row in problem.description.splitlines()]
    lines.append(f"name {problem.name}")
    lines.append(f"vars {problem.dimension}")
    lines += [f"eq {eq}" for eq in problem.equations]
    lines.append("lower " + " ".join(_format_value(v) for v in problem.bounds.lower))
    lines.append("upper " + " ".join(_format_value(v) for v in problem.bounds.upper))
    for x0 in problem.starting_points:
        lines.append("start " + " ".join(_format_value(v) for v in x0))
    if problem.known_solution is not None:
        lines.append("solution " + " ".join(_format_value(v) for v in problem.known_solution))
    return "\n".join(lines) + "\n"
