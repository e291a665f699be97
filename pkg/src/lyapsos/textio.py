"""ASCII text format for polynomials and vector fields.

Expressions use variables ``x1 .. xn`` (for planar systems ``x``/``y`` are also
accepted), integer, decimal and rational literals, and ``+ - * / ^`` with
parentheses.  Decimal literals are read exactly, so ``0.15`` is ``3/20``.
Division is allowed only by constants.

A vector-field file has one equation per state variable::

    # comments start with '#'
    dx1 = -x1 + x1*x2
    dx2 = -x2

A polynomial file holds one expression, optionally written as ``p = ...``.
"""

from __future__ import annotations

import ast
import re
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .polycore import Polynomial, VectorField

_VAR_RE = re.compile(r"^x(\d+)$")
_ALIASES = {"x": 1, "y": 2, "z": 3}


class ParseError(ValueError):
    """Malformed polynomial text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _var_index(name: str) -> Optional[int]:
    m = _VAR_RE.match(name)
    if m:
        idx = int(m.group(1))
        return idx if idx >= 1 else None
    return _ALIASES.get(name)


def _scan_nvars(source: str) -> int:
    best = 0
    for tok in re.findall(r"[A-Za-z_][A-Za-z_0-9]*", source):
        idx = _var_index(tok)
        if idx:
            best = max(best, idx)
    return best


class _Builder:
    def __init__(self, nvars: int, line: int, colmap: List[int]):
        self.nvars = nvars
        self.line = line
        self.colmap = colmap  # rewritten-source offset -> 1-based input column

    def fail(self, node: ast.AST, message: str):
        raise ParseError(message, self.line, _column(self.colmap, getattr(node, "col_offset", 0)))

    def build(self, node: ast.AST):
        if isinstance(node, ast.Expression):
            return self.build(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                self.fail(node, f"unsupported literal {node.value!r}")
            return Fraction(repr(node.value)) if isinstance(node.value, float) else Fraction(node.value)
        if isinstance(node, ast.Name):
            idx = _var_index(node.id)
            if idx is None or idx > self.nvars:
                self.fail(node, f"unknown variable {node.id!r}")
            return Polynomial.variable(self.nvars, idx - 1)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = self.build(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp):
            left = self.build(node.left)
            right = self.build(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                if isinstance(right, Polynomial):
                    if right.degree > 0:
                        self.fail(node, "division by a non-constant polynomial")
                    right = right.coefficient((0,) * self.nvars)
                if right == 0:
                    self.fail(node, "division by zero")
                return left / right
            if isinstance(node.op, ast.Pow):
                exp = right
                if isinstance(exp, Polynomial):
                    if exp.degree > 0:
                        self.fail(node, "exponent must be a constant")
                    exp = exp.coefficient((0,) * self.nvars)
                if exp.denominator != 1 or exp < 0:
                    self.fail(node, "exponent must be a nonnegative integer")
                if isinstance(left, Fraction):
                    return left ** int(exp)
                return left ** int(exp)
        self.fail(node, f"unsupported syntax {type(node).__name__}")


def _to_poly(value, nvars: int) -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    return Polynomial.constant(nvars, value)


def _rewrite(text: str, col_offset: int) -> Tuple[str, List[int]]:
    """Replace ^ by ** and remember where each output character came from."""
    out, cols = [], []
    for k, ch in enumerate(text):
        piece = "**" if ch == "^" else ch
        out.append(piece)
        cols.extend([col_offset + k + 1] * len(piece))
    return "".join(out), cols


def _column(colmap: List[int], offset: int) -> int:
    if not colmap:
        return 1
    return colmap[min(max(offset, 0), len(colmap) - 1)]


def parse_expression(text: str, nvars: Optional[int] = None, line: int = 1, col_offset: int = 0) -> Polynomial:
    """Parse one polynomial expression."""
    if nvars is None:
        nvars = max(_scan_nvars(text), 1)
    src, cols = _rewrite(text, col_offset)
    if not src.strip():
        raise ParseError("empty expression", line, col_offset + 1)
    lead = len(src) - len(src.lstrip())
    colmap = cols[lead:]
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"syntax error: {exc.msg}", line, _column(colmap, (exc.offset or 1) - 1)) from None
    value = _Builder(nvars, line, colmap).build(tree)
    return _to_poly(value, nvars)


def _content_lines(text: str) -> List[Tuple[int, str]]:
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if body.strip():
            out.append((no, body))
    return out


def parse_polynomial(text: str, nvars: Optional[int] = None) -> Polynomial:
    """Parse a polynomial file (one expression, optional ``name =`` prefix).

    Expressions may continue over several lines.
    """
    lines = _content_lines(text)
    if not lines:
        raise ParseError("no expression found")
    first_no, first = lines[0]
    joined = " ".join(body for _, body in lines)
    offset = 0
    if "=" in first:
        lhs, rest = first.split("=", 1)
        if not re.fullmatch(r"\s*[A-Za-z_][A-Za-z_0-9]*\s*", lhs):
            raise ParseError("malformed left-hand side", first_no, 1)
        offset = len(lhs) + 1
        joined = " ".join([rest] + [body for _, body in lines[1:]])
    if nvars is None:
        nvars = max(_scan_nvars(joined), 1)
    return parse_expression(joined, nvars, line=first_no, col_offset=offset)


def parse_vector_field(text: str) -> VectorField:
    """Parse ``dxi = expr`` lines into a vector field.

    The dimension is the number of equations; every xi with i <= n must have an
    equation.  A line without ``=`` continues the previous equation.
    """
    equations: Dict[int, Tuple[int, int, str]] = {}
    order: List[int] = []
    for no, body in _content_lines(text):
        m = re.match(r"\s*d([A-Za-z_][A-Za-z_0-9]*)\s*(?:/\s*dt\s*)?=", body)
        if m:
            idx = _var_index(m.group(1))
            if idx is None:
                raise ParseError(f"unknown state variable {m.group(1)!r}", no, m.start(1) + 1)
            if idx in equations:
                raise ParseError(f"duplicate equation for x{idx}", no, 1)
            equations[idx] = (no, m.end(), body[m.end():])
            order.append(idx)
        elif order:
            line, col, prev = equations[order[-1]]
            equations[order[-1]] = (line, col, prev + " " + body)
        else:
            raise ParseError("expected an equation 'dxi = ...'", no, 1)
    if not equations:
        raise ParseError("no equations found")
    n = len(equations)
    if sorted(equations) != list(range(1, n + 1)):
        raise ParseError(f"equations must cover x1..x{n} exactly once")
    comps = []
    for i in range(1, n + 1):
        no, col, expr = equations[i]
        try:
            comps.append(parse_expression(expr, n, line=no, col_offset=col))
        except ParseError:
            raise
    return VectorField(comps)


def read_polynomial(path: str, nvars: Optional[int] = None) -> Polynomial:
    with open(path, encoding="utf-8") as fh:
        return parse_polynomial(fh.read(), nvars)


def read_vector_field(path: str) -> VectorField:
    with open(path, encoding="utf-8") as fh:
        return parse_vector_field(fh.read())
