"""Parser for system-definition documents.

Document layout::

    # Lorenz system
    [system]
    n = 3
    [params]
    sigma = 10
    rho = 28
    beta = 8/3
    [drift]
    dy1 = sigma*(y2 - y1)
    dy2 = y1*(rho - y3) - y2
    dy3 = y1*y2 - beta*y3
    [sigma]
    scalar = 1

The ``[sigma]`` section holds one of

* ``scalar = <expr>``: diffusion ``nu * I`` (constant expression);
* ``n`` rows of ``n`` whitespace-separated numbers: a constant matrix;
* lines ``sIJ = <expr>`` (1-based ``I``, ``J``; written ``sI_J`` when
  n >= 10): state-dependent entries. A missing ``sJI`` mirrors ``sIJ``;
  entries missing in both places are 0.

Expressions use ``+ - * / ^`` (``^`` and ``**`` right-associative, binding
tighter than unary minus), parentheses, state variables ``y1..yn``,
parameters, and the functions ``sin cos tan exp log sqrt tanh abs sign``.
Unicode ``−``, ``×``, ``·`` and ``÷`` are accepted as operators. If
``[sigma]`` is omitted, the diffusion defaults to the identity.
"""

from __future__ import annotations

import re

from ..errors import ParseError, SemanticError
from . import expr as E

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_OPS = {"+": "+", "-": "-", "−": "-", "*": "*", "×": "*", "·": "*", "/": "/", "÷": "/", "^": "^"}


class _Tok:
    __slots__ = ("kind", "text", "col")

    def __init__(self, kind, text, col):
        self.kind = kind
        self.text = text
        self.col = col


def _tokenize(text, line, col0):
    toks = []
    i = 0
    stack = []
    while i < len(text):
        c = text[i]
        col = col0 + i
        if c.isspace():
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            toks.append(_Tok("num", m.group(0), col))
            i = m.end()
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("ident", text[i:j], col))
            i = j
            continue
        if text.startswith("**", i):
            toks.append(_Tok("op", "^", col))
            i += 2
            continue
        if c in _OPS:
            toks.append(_Tok("op", _OPS[c], col))
            i += 1
            continue
        if c == ",":
            toks.append(_Tok(",", c, col))
            i += 1
            continue
        if c == "(":
            stack.append(col)
            toks.append(_Tok("(", c, col))
            i += 1
            continue
        if c == ")":
            if not stack:
                raise ParseError("unmatched ')'", line, col)
            stack.pop()
            toks.append(_Tok(")", c, col))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    if stack:
        raise ParseError("unclosed parenthesis", line, stack[-1], expected=(")",))
    toks.append(_Tok("end", "", col0 + len(text)))
    return toks


class _ExprParser:
    def __init__(self, text, line, col0, n, params):
        self.toks = _tokenize(text, line, col0)
        self.pos = 0
        self.line = line
        self.n = n
        self.params = params
        self.depth = 0

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, tok, expected):
        what = "end of expression" if tok.kind == "end" else repr(tok.text)
        raise ParseError(f"unexpected {what}", self.line, tok.col, expected)

    def enter(self, tok):
        self.depth += 1
        if self.depth > E.MAX_DEPTH:
            raise ParseError(f"expression nested deeper than {E.MAX_DEPTH}", self.line, tok.col)

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            self.fail(t, ("operator", "end of expression"))
        return e

    def expr(self):
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            e = E.Bin(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            e = E.Bin(op, e, self.unary())
        return e

    def unary(self):
        t = self.peek()
        if t.kind == "op" and t.text in "+-":
            self.take()
            self.enter(t)
            arg = self.unary()
            self.depth -= 1
            return E.Neg(arg) if t.text == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.take()
            self.enter(t)
            exponent = self.unary()
            self.depth -= 1
            return E.Bin("^", base, exponent)
        return base

    def atom(self):
        t = self.take()
        if t.kind == "num":
            return E.Num(float(t.text))
        if t.kind == "(":
            self.enter(t)
            e = self.expr()
            self.depth -= 1
            close = self.take()
            if close.kind != ")":
                self.fail(close, (")",))
            return e
        if t.kind == "ident":
            if self.peek().kind == "(":
                if t.text not in E.FUNCTIONS:
                    raise SemanticError(f"unknown function {t.text!r}", self.line, t.col)
                self.take()
                self.enter(t)
                arg = self.expr()
                self.depth -= 1
                close = self.take()
                if close.kind != ")":
                    if close.kind == "op" or close.kind == "end":
                        self.fail(close, (")",))
                    raise SemanticError(
                        f"function {t.text!r} takes exactly one argument", self.line, close.col
                    )
                return E.Call(t.text, arg)
            return self.resolve(t)
        self.fail(t, ("number", "identifier", "("))

    def resolve(self, t):
        name = t.text
        if name in E.FUNCTIONS:
            raise SemanticError(f"function {name!r} used without an argument", self.line, t.col)
        if name in self.params:
            return E.Param(name)
        m = re.fullmatch(r"y([1-9]\d*)", name)
        if m:
            k = int(m.group(1))
            if self.n is None or k > self.n:
                raise SemanticError(f"state variable {name} out of range (n={self.n})", self.line, t.col)
            return E.Var(k - 1)
        raise SemanticError(f"undefined identifier {name!r}", self.line, t.col)


def parse_expression(text, n=None, params=(), line=1, col=1):
    """Parse one expression. ``params`` is the set of known parameter names."""
    e = _ExprParser(text, line, col, n, set(params)).parse()
    if E.depth(e) > E.MAX_DEPTH:
        raise ParseError(f"expression deeper than {E.MAX_DEPTH}", line, col)
    return e


def _split_assign(raw, line):
    if "=" not in raw:
        raise ParseError("expected 'name = value'", line, 1, expected=("=",))
    k = raw.index("=")
    name = raw[:k].strip()
    rhs = raw[k + 1 :]
    col = k + 2 + (len(rhs) - len(rhs.lstrip()))
    return name, rhs.strip(), col


def parse_document(text):
    """Split a document into sections and parse their contents.

    Returns a dict with keys ``n``, ``params`` (ordered name -> value),
    ``drift`` (list of Expr) and ``sigma`` (``("scalar", value)``,
    ``("matrix", rows)`` or ``("expr", n x n Expr grid)``).
    """
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        stripped = body.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("malformed section header", lineno, 1, expected=("]",))
            current = stripped[1:-1].strip().lower()
            if current not in ("system", "params", "drift", "sigma"):
                raise ParseError(f"unknown section [{current}]", lineno, 1)
            if current in sections:
                raise ParseError(f"duplicate section [{current}]", lineno, 1)
            sections[current] = []
            continue
        if current is None:
            raise ParseError("content before first section header", lineno, 1, expected=("[section]",))
        sections[current].append((lineno, body))

    if "system" not in sections:
        raise ParseError("missing [system] section", 0, 0)
    n = None
    for lineno, body in sections["system"]:
        name, rhs, col = _split_assign(body, lineno)
        if name != "n":
            raise SemanticError(f"unknown [system] key {name!r}", lineno, 1)
        try:
            n = int(rhs)
        except ValueError:
            raise ParseError("n must be an integer", lineno, col) from None
    if n is None or n < 1:
        raise SemanticError("[system] must define n >= 1")

    params = {}
    for lineno, body in sections.get("params", []):
        name, rhs, col = _split_assign(body, lineno)
        if not name.isidentifier() or name in E.FUNCTIONS or re.fullmatch(r"y\d+", name):
            raise SemanticError(f"invalid parameter name {name!r}", lineno, 1)
        if name in params:
            raise SemanticError(f"parameter {name!r} defined twice", lineno, 1)
        e = parse_expression(rhs, n=0, params=params, line=lineno, col=col)
        e = E.substitute_params(e, params)
        if not isinstance(e, E.Num):
            raise SemanticError(f"parameter {name!r} is not a constant", lineno, col)
        params[name] = e.value

    if "drift" not in sections:
        raise SemanticError("missing [drift] section")
    drift = [None] * n
    for lineno, body in sections["drift"]:
        name, rhs, col = _split_assign(body, lineno)
        m = re.fullmatch(r"dy([1-9]\d*)", name)
        if not m:
            raise SemanticError(f"expected 'dyK = ...', got {name!r}", lineno, 1)
        k = int(m.group(1))
        if k > n:
            raise SemanticError(f"{name} exceeds dimension n={n}", lineno, 1)
        if drift[k - 1] is not None:
            raise SemanticError(f"{name} defined twice", lineno, 1)
        drift[k - 1] = parse_expression(rhs, n=n, params=params, line=lineno, col=col)
    missing = [f"dy{k + 1}" for k, d in enumerate(drift) if d is None]
    if missing:
        raise SemanticError(f"missing drift equations: {', '.join(missing)}")

    sigma = _parse_sigma(sections.get("sigma"), n, params)
    return {"n": n, "params": params, "drift": drift, "sigma": sigma}


def _parse_sigma(lines, n, params):
    if not lines:
        return ("scalar", 1.0)
    first = lines[0][1].strip()
    if first.startswith("scalar"):
        if len(lines) != 1:
            raise SemanticError("scalar diffusion takes a single line", lines[1][0], 1)
        lineno, body = lines[0]
        name, rhs, col = _split_assign(body, lineno)
        if name != "scalar":
            raise SemanticError(f"unexpected key {name!r}", lineno, 1)
        e = E.substitute_params(parse_expression(rhs, n=0, params=params, line=lineno, col=col), params)
        if not isinstance(e, E.Num):
            raise SemanticError("scalar diffusion must be constant", lineno, col)
        return ("scalar", e.value)
    if "=" not in first:
        rows = []
        for lineno, body in lines:
            try:
                rows.append([float(x) for x in body.split()])
            except ValueError:
                raise ParseError("matrix rows must hold numbers", lineno, 1, expected=("number",)) from None
            if len(rows[-1]) != n:
                raise SemanticError(f"matrix row has {len(rows[-1])} entries, expected {n}", lineno, 1)
        if len(rows) != n:
            raise SemanticError(f"diffusion matrix has {len(rows)} rows, expected {n}", lines[-1][0], 1)
        return ("matrix", rows)
    grid = [[None] * n for _ in range(n)]
    for lineno, body in lines:
        name, rhs, col = _split_assign(body, lineno)
        m = re.fullmatch(r"s([1-9])([1-9])", name) if n < 10 else re.fullmatch(r"s(\d+)_(\d+)", name)
        if not m:
            raise SemanticError(f"expected 'sIJ = ...', got {name!r}", lineno, 1)
        i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
        if i >= n or j >= n:
            raise SemanticError(f"{name} out of range for n={n}", lineno, 1)
        if grid[i][j] is not None:
            raise SemanticError(f"{name} defined twice", lineno, 1)
        grid[i][j] = parse_expression(rhs, n=n, params=params, line=lineno, col=col)
    for i in range(n):
        for j in range(n):
            if grid[i][j] is None:
                grid[i][j] = grid[j][i] if grid[j][i] is not None else E.ZERO
    return ("expr", grid)
