"""Closed-form scalar expressions: parsing, printing, differentiation, Taylor jets.

Grammar::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := atom ("^" integer)? | "-" factor
    atom   := number | ident | ident "(" expr ")" | "(" expr ")"

Variables are x1..xn, functions sin, cos, exp, sqrt.
"""
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .jets import Jet, jet_inv, jet_mul, jet_pow, series
from .scalars import FLOAT, RATIONAL, Q, check_mode

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ExprError(ValueError):
    """Malformed expression; ``offset`` is the byte offset of the problem."""

    def __init__(self, msg, offset=None):
        super().__init__(msg if offset is None else f"{msg} at offset {offset}")
        self.offset = offset


class EvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    text: str

    @property
    def value(self):
        return Q(self.text)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Div:
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(src):
    pos, out = 0, []
    data = src.encode()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            break
        start = len(src[:m.start(0)].encode()) + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group(1) is not None:
            out.append(("num", m.group(1) + (m.group(2) or ""), start))
        elif m.group(3) is not None:
            out.append(("id", m.group(3), start))
        elif m.group(4) is not None:
            if m.group(4) not in "+-*/^(),":
                raise ExprError(f"unexpected character {m.group(4)!r}", start)
            out.append(("op", m.group(4), start))
        pos = m.end()
    out.append(("end", "", len(data)))
    return out


class _Parser:
    def __init__(self, src, n):
        self.toks = _tokenize(src)
        self.i = 0
        self.n = n

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val):
        t = self.take()
        if t[1] != val or t[0] not in ("op",):
            raise ExprError(f"expected {val!r}", t[2])
        return t

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self):
        t = self.peek()
        if t[0] == "op" and t[1] == "-":
            self.take()
            return Neg(self.factor())
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.exponent())
        return base

    def exponent(self):
        sign = 1
        t = self.take()
        if t[0] == "op" and t[1] == "-":
            sign = -1
            t = self.take()
        if t[0] != "num" or not t[1].isdigit():
            raise ExprError("exponent must be an integer", t[2])
        e = sign * int(t[1])
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            rest = self.exponent()
            if rest < 0:
                raise ExprError("negative nested exponent", self.peek()[2])
            e = e ** rest
        return e

    def atom(self):
        t = self.take()
        if t[0] == "num":
            return Num(t[1])
        if t[0] == "id":
            name = t[1]
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if name not in FUNCTIONS:
                    raise ExprError(f"unknown function {name!r}", t[2])
                self.take()
                arg = self.expr()
                nxt = self.peek()
                if nxt[0] != "op" or nxt[1] != ")":
                    if nxt[0] == "end":
                        raise ExprError("missing ')'", nxt[2])
                    raise ExprError(f"function {name!r} takes exactly one argument", nxt[2])
                self.take()
                return Call(name, arg)
            if name in FUNCTIONS:
                raise ExprError(f"function {name!r} needs an argument", t[2])
            m = re.fullmatch(r"x([1-9]\d*)", name)
            if m is None:
                raise ExprError(f"unknown identifier {name!r}", t[2])
            k = int(m.group(1))
            if self.n is not None and k > self.n:
                raise ExprError(f"unknown variable {name!r} for n={self.n}", t[2])
            return Var(k)
        if t[0] == "op" and t[1] == "(":
            node = self.expr()
            nxt = self.take()
            if nxt[0] != "op" or nxt[1] != ")":
                raise ExprError("missing ')'", nxt[2])
            return node
        if t[0] == "end":
            raise ExprError("unexpected end of input", t[2])
        raise ExprError(f"unexpected token {t[1]!r}", t[2])


def parse(src, n=None):
    """Parse text into an expression tree; ``n`` bounds variable indices."""
    p = _Parser(src, n)
    node = p.expr()
    t = p.peek()
    if t[0] != "end":
        raise ExprError(f"unexpected token {t[1]!r}", t[2])
    return node


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def to_source(e):
    """Text that parses back to the same tree."""
    if isinstance(e, Num):
        return e.text
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if type(e.arg) in (Add, Sub, Mul, Div):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_source(e.base)
        if not isinstance(e.base, (Num, Var, Call)) or (isinstance(e.base, Num) and not e.base.text.isdigit()):
            base = f"({base})"
        return f"{base}^{e.exp}"
    op = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(e)]
    p = _PREC[type(e)]
    left, right = to_source(e.left), to_source(e.right)
    if _PREC.get(type(e.left), 5) < p:
        left = f"({left})"
    # left associativity: an equal-precedence right operand keeps its parentheses
    if _PREC.get(type(e.right), 5) <= p:
        right = f"({right})"
    return left + op + right


# ---------------------------------------------------------------------------
# symbolic differentiation with light folding

_ZERO, _ONE = Num("0"), Num("1")


def _is(e, v):
    return isinstance(e, Num) and Q(e.text) == v


def _add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    if _is(a, 0):
        return _ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return _ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return Mul(a, b)


def _div(a, b):
    if _is(a, 0):
        return _ZERO
    if _is(b, 1):
        return a
    return Div(a, b)


def _pow(a, k):
    if k == 0:
        return _ONE
    if k == 1:
        return a
    return Pow(a, k)


def differentiate(e, var):
    """Exact derivative with respect to x_var (1-based)."""
    d = lambda x: differentiate(x, var)
    if isinstance(e, Num):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.index == var else _ZERO
    if isinstance(e, Neg):
        return _neg(d(e.arg))
    if isinstance(e, Add):
        return _add(d(e.left), d(e.right))
    if isinstance(e, Sub):
        return _sub(d(e.left), d(e.right))
    if isinstance(e, Mul):
        return _add(_mul(d(e.left), e.right), _mul(e.left, d(e.right)))
    if isinstance(e, Div):
        num = _sub(_mul(d(e.left), e.right), _mul(e.left, d(e.right)))
        return _div(num, _pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exp == 0:
            return _ZERO
        return _mul(_mul(Num(str(e.exp)) if e.exp > 0 else Neg(Num(str(-e.exp))), _pow(e.base, e.exp - 1)),
                    d(e.base))
    if isinstance(e, Call):
        inner = d(e.arg)
        if _is(inner, 0):
            return _ZERO
        if e.fn == "sin":
            outer = Call("cos", e.arg)
        elif e.fn == "cos":
            outer = Neg(Call("sin", e.arg))
        elif e.fn == "exp":
            outer = e
        else:
            outer = Div(Num("1"), Mul(Num("2"), e))
        return _mul(outer, inner)
    raise TypeError(f"not an expression node: {e!r}")


def variables(e):
    """Set of 1-based variable indices occurring in the tree."""
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.left) | variables(e.right)


def is_polynomial(e):
    if isinstance(e, (Num, Var)):
        return True
    if isinstance(e, Call):
        return False
    if isinstance(e, Neg):
        return is_polynomial(e.arg)
    if isinstance(e, Pow):
        return e.exp >= 0 and is_polynomial(e.base)
    if isinstance(e, Div):
        return is_polynomial(e.left) and not variables(e.right) and is_polynomial(e.right)
    return is_polynomial(e.left) and is_polynomial(e.right)


# ---------------------------------------------------------------------------
# evaluation

def evaluate(e, point, mode=FLOAT):
    """Value at a point; ``point`` entries may be arrays (broadcast)."""
    return taylor_jet(e, point, 0, mode).coeffs[0, 0]


def taylor_jet(e, point, K, mode=FLOAT, n=None):
    """Taylor jet of order K at ``point`` in shifted variables.

    ``point`` is a sequence of n scalars or of n arrays of a common length
    (a batch of points).  Computed by forward propagation through the tree.
    """
    check_mode(mode)
    n = len(point) if n is None else n
    cols = [np.atleast_1d(np.asarray(p, dtype=object if mode == RATIONAL else np.float64)) for p in point]
    batch = max((len(c) for c in cols), default=1)
    if mode == RATIONAL:
        cols = [np.array([Q(v) if not isinstance(v, mpq().__class__) else v for v in c], dtype=object)
                for c in cols]
        if batch != 1:
            raise ValueError("rational mode evaluates a single point")
    cols = [np.broadcast_to(c, (batch,)).copy() for c in cols]
    memo = {}
    return _jet(e, cols, n, K, mode, batch, memo)


def _const(value, n, K, mode, batch):
    return Jet.const(n, K, value, batch, mode)


def _jet(e, pt, n, K, mode, batch, memo):
    key = id(e)
    hit = memo.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    out = _jet_eval(e, pt, n, K, mode, batch, memo)
    memo[key] = (e, out)
    return out


def _jet_eval(e, pt, n, K, mode, batch, memo):
    rec = lambda x: _jet(x, pt, n, K, mode, batch, memo)
    if isinstance(e, Num):
        v = Q(e.text) if mode == RATIONAL else float(Fraction(e.text))
        return _const(v, n, K, mode, batch)
    if isinstance(e, Var):
        if e.index > n:
            raise EvalError(f"variable x{e.index} outside dimension {n}")
        c = _const(0, n, K, mode, batch)
        c.coeffs[0, 0, :] = pt[e.index - 1]
        if K >= 1:
            c = c + Jet.var(n, K, e.index - 1, batch, mode)
        return c
    if isinstance(e, Neg):
        return -rec(e.arg)
    if isinstance(e, Add):
        return rec(e.left) + rec(e.right)
    if isinstance(e, Sub):
        return rec(e.left) - rec(e.right)
    if isinstance(e, Mul):
        return jet_mul(rec(e.left), rec(e.right))
    if isinstance(e, Div):
        return jet_mul(rec(e.left), _inv(rec(e.right)))
    if isinstance(e, Pow):
        b = rec(e.base)
        if e.exp < 0:
            b = _inv(b)
        return _ipow(b, abs(e.exp), n, K, mode, batch)
    if isinstance(e, Call):
        u = rec(e.arg)
        if mode == RATIONAL:
            raise EvalError(f"{e.fn} is not available in rational mode")
        return _call(e.fn, u)
    raise TypeError(f"not an expression node: {e!r}")


def _inv(u):
    c0 = u.scalar_part_array()[0]
    if np.any(c0 == 0):
        raise EvalError("division by zero")
    return jet_inv(u)


def _ipow(b, k, n, K, mode, batch):
    out = _const(1, n, K, mode, batch)
    while k:
        if k & 1:
            out = jet_mul(out, b)
        k >>= 1
        if k:
            b = jet_mul(b, b)
    return out


def _call(fn, u):
    c0 = u.scalar_part_array()[0].astype(np.float64)
    h = u.without_constant()
    K = u.order
    if fn == "exp":
        return series(h, [1.0 / math.factorial(k) for k in range(K + 1)]).scale(np.exp(c0))
    if fn in ("sin", "cos"):
        ch = series(h, [((-1) ** (k // 2)) / math.factorial(k) if k % 2 == 0 else 0.0 for k in range(K + 1)])
        sh = series(h, [((-1) ** (k // 2)) / math.factorial(k) if k % 2 == 1 else 0.0 for k in range(K + 1)])
        s, c = np.sin(c0), np.cos(c0)
        if fn == "sin":
            return ch.scale(s) + sh.scale(c)
        return ch.scale(c) - sh.scale(s)
    if fn == "sqrt":
        if np.any(c0 < 0) or (K > 0 and np.any(c0 == 0)):
            raise EvalError("sqrt of a non-positive value")
        if K == 0:
            return _sqrt0(u, c0)
        return jet_pow(u, 0.5)
    raise EvalError(f"unknown function {fn}")


def _sqrt0(u, c0):
    out = u.scale(0.0)
    out.coeffs[0, 0, :] = np.sqrt(c0)
    return out
