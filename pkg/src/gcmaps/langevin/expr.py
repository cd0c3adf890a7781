"""Expression trees for drift and diffusion definitions.

Nodes are immutable. The smart constructors (``add``, ``mul``, ...) fold
constants and drop identities (``0*x``, ``1*x``, ``x+0``); no other
algebraic simplification is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

MAX_DEPTH = 64

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "abs", "sign")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based; printed as y{index+1}


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Param, Neg, Bin, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Bin("+", a, b)


def sub(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return Bin("-", a, b)


def mul(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return Bin("*", a, b)


def div(a, b):
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if _is(b, 1):
        return a
    return Bin("/", a, b)


def power(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        try:
            return Num(math.pow(a.value, b.value))
        except (ValueError, OverflowError):
            return Bin("^", a, b)
    if _is(b, 1):
        return a
    if _is(b, 0):
        return ONE
    return Bin("^", a, b)


def call(func, a):
    if isinstance(a, Num):
        try:
            return Num(float(_FUNC_IMPL[func](a.value)))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Call(func, a)


def _sign(x):
    return (x > 0) - (x < 0)


_FUNC_IMPL = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "tanh": math.tanh,
    "abs": abs,
    "sign": _sign,
}

_BUILD = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


def depth(e):
    if isinstance(e, (Num, Var, Param)):
        return 1
    if isinstance(e, (Neg, Call)):
        return 1 + depth(e.arg)
    return 1 + max(depth(e.left), depth(e.right))


def depends_on(e, index):
    if isinstance(e, Var):
        return e.index == index
    if isinstance(e, (Num, Param)):
        return False
    if isinstance(e, (Neg, Call)):
        return depends_on(e.arg, index)
    return depends_on(e.left, index) or depends_on(e.right, index)


def differentiate(e, wrt):
    """Partial derivative of ``e`` with respect to state variable ``wrt`` (0-based).

    ``d|u|/du`` is taken as ``sign(u)``, which is 0 at ``u = 0``.
    """
    if isinstance(e, Num) or isinstance(e, Param):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == wrt else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, wrt))
    if isinstance(e, Call):
        u = e.arg
        du = differentiate(u, wrt)
        if _is(du, 0):
            return ZERO
        return mul(_outer_derivative(e.func, u, e), du)
    a, b = e.left, e.right
    if e.op in "+-":
        da, db = differentiate(a, wrt), differentiate(b, wrt)
        return add(da, db) if e.op == "+" else sub(da, db)
    if e.op == "*":
        return add(mul(differentiate(a, wrt), b), mul(a, differentiate(b, wrt)))
    if e.op == "/":
        da, db = differentiate(a, wrt), differentiate(b, wrt)
        if _is(db, 0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
    # power
    if not depends_on(b, wrt):
        da = differentiate(a, wrt)
        return mul(mul(b, power(a, sub(b, ONE))), da)
    # general u^v = exp(v log u)
    da, db = differentiate(a, wrt), differentiate(b, wrt)
    return mul(e, add(mul(db, call("log", a)), div(mul(b, da), a)))


def _outer_derivative(func, u, whole):
    if func == "sin":
        return call("cos", u)
    if func == "cos":
        return neg(call("sin", u))
    if func == "tan":
        return add(ONE, power(call("tan", u), Num(2.0)))
    if func == "exp":
        return whole
    if func == "log":
        return div(ONE, u)
    if func == "sqrt":
        return div(ONE, mul(Num(2.0), whole))
    if func == "tanh":
        return sub(ONE, power(call("tanh", u), Num(2.0)))
    if func == "abs":
        return call("sign", u)
    if func == "sign":
        return ZERO
    raise ValueError(f"unknown function {func!r}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_string(e, prec=0):
    """Infix rendering that re-parses to the same tree."""
    if isinstance(e, Num):
        s = repr(e.value)
        return f"({s})" if e.value < 0 or "e" in s or "inf" in s else s
    if isinstance(e, Var):
        return f"y{e.index + 1}"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Neg):
        s = "-" + to_string(e.arg, 3)
        return f"({s})" if prec > 1 else s
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    p = _PREC[e.op]
    if e.op == "^":
        s = f"{to_string(e.left, p + 1)}^{to_string(e.right, p)}"
    else:
        s = f"{to_string(e.left, p)} {e.op} {to_string(e.right, p + 1)}"
    return f"({s})" if p < prec else s


def _py(e, pindex):
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"y[{e.index}]"
    if isinstance(e, Param):
        return f"p[{pindex[e.name]}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg, pindex)})"
    if isinstance(e, Call):
        return f"_f_{e.func}({_py(e.arg, pindex)})"
    a, b = _py(e.left, pindex), _py(e.right, pindex)
    if e.op == "^":
        return f"_pow({a}, {b})"
    return f"({a} {e.op} {b})"


def compile_exprs(exprs, param_names):
    """Compile expressions into ``f(y, p) -> tuple of float``.

    ``p`` is a sequence of parameter values ordered as ``param_names``.
    Domain errors surface as ``ValueError``/``ZeroDivisionError``/
    ``OverflowError`` from the ``math`` module.
    """
    pindex = {name: k for k, name in enumerate(param_names)}
    body = ", ".join(_py(e, pindex) for e in exprs)
    src = f"lambda y, p: ({body},)"
    env = {f"_f_{k}": v for k, v in _FUNC_IMPL.items()}
    env["_pow"] = math.pow
    return eval(src, env)  # source is generated from a validated tree only


def substitute_params(e, values):
    """Replace parameters by numeric literals and fold constants."""
    if isinstance(e, Param):
        return Num(float(values[e.name]))
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        return neg(substitute_params(e.arg, values))
    if isinstance(e, Call):
        return call(e.func, substitute_params(e.arg, values))
    return _BUILD[e.op](substitute_params(e.left, values), substitute_params(e.right, values))
