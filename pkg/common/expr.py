# -*- coding: utf-8 -*-
"""
Expression language for deformation functions
形变函数 H(b) 的表达式解析和打印；求导用 sympy.diff，求值用 lambdify
"""

import re
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np
import sympy as sp
from sympy.core.function import ArgumentIndexError

from common.errors import ErrorCode, LagfibError

logger = logging.getLogger(__name__)

Expr = sp.Expr

# exp(−u²) 在 u² 超过此值时下溢为 0
EXP_UNDERFLOW = 745.0

DISTANCE = "d"
DISTANCE_PARTIAL = re.compile(r"d_(b\d+)$")

EVAL_POLICIES = ("strict", "nan")

ZERO = sp.S.Zero


def flatbump_value(x) -> np.float64:
    """exp(−1/x²) 的数值，x=0 处取极限值 0"""
    x = np.float64(x)
    if x == 0.0:
        return np.float64(0.0)
    if not np.isfinite(x):
        return np.float64(np.nan)
    u = 1.0 / x
    if u * u > EXP_UNDERFLOW:
        return np.float64(0.0)
    return np.float64(np.exp(-u * u))


class flatbump(sp.Function):
    """
    平坦函数 exp(−1/x²)，flatbump(0) = 0

    导数 2·flatbump(x)/x³ 仍用 flatbump 表示，数值求值走 flatbump_value。
    """
    nargs = 1

    @classmethod
    def eval(cls, x):
        if x.is_zero:
            return sp.S.Zero

    def fdiff(self, argindex=1):
        if argindex != 1:
            raise ArgumentIndexError(self, argindex)
        x = self.args[0]
        return 2 * self / x ** 3


FUNCTIONS = {
    "exp": (sp.exp, 1),
    "log": (sp.log, 1),
    "sqrt": (sp.sqrt, 1),
    "sin": (sp.sin, 1),
    "cos": (sp.cos, 1),
    "atan2": (sp.atan2, 2),
    "abs": (sp.Abs, 1),
    "Abs": (sp.Abs, 1),
    "sign": (sp.sign, 1),
    "flatbump": (flatbump, 1),
}

CONSTANTS = {"pi": sp.pi, "E": sp.E}

LAMBDIFY_MODULES = [{"flatbump": flatbump_value}, "numpy"]


@lru_cache(maxsize=None)
def symbol(name: str) -> sp.Symbol:
    """所有变量都是实变量，|x| 和 sign(x) 的导数因此有实数形式"""
    return sp.Symbol(name, real=True)


def variables(expr: Expr) -> FrozenSet[str]:
    return frozenset(s.name for s in expr.free_symbols)


def depends_on(expr: Expr, var: str) -> bool:
    """d 隐式依赖所有 b_j"""
    names = variables(expr)
    return var in names or (DISTANCE in names and var.startswith("b"))


def diff(expr: Expr, var: str) -> Expr:
    """
    对 var 求偏导

    d 按链式法则展开为 ∂H/∂d · d_bj，d_bj 由调用方数值提供；
    sign 的导数 2·δ(x) 在非零处为 0，直接丢弃。

    Raises:
        LagfibError: EVAL_ERROR，对 d 求二阶导
    """
    out = sp.diff(expr, symbol(var))
    names = variables(expr)
    if var.startswith("b") and DISTANCE in names:
        if any(DISTANCE_PARTIAL.match(name) for name in names):
            raise LagfibError(ErrorCode.EVAL_ERROR, "Second derivatives of d are not available")
        out = out + sp.diff(expr, symbol(DISTANCE)) * symbol(f"d_{var}")
    return out.replace(sp.DiracDelta, lambda *args: sp.S.Zero)


def gradient_exprs(expr: Expr, names: Tuple[str, ...]) -> Dict[str, Expr]:
    """对每个变量求解析偏导"""
    return {name: diff(expr, name) for name in names}


def difference(a: Expr, b: Expr) -> Expr:
    """
    符号差 a − b

    常数都是有理数，sympy 合并同类项时公共项精确对消，
    (H+G) − (H′+G) 因此与 H − H′ 结构相同。
    """
    return a - b


@lru_cache(maxsize=512)
def compile_expr(expr: Expr) -> Tuple[Tuple[str, ...], Callable]:
    """lambdify 一次并缓存，参数按变量名排序"""
    symbols = sorted(expr.free_symbols, key=lambda s: s.name)
    fn = sp.lambdify(symbols, expr, modules=LAMBDIFY_MODULES)
    return tuple(s.name for s in symbols), fn


def evaluate(expr: Expr, env: Mapping[str, float], policy: str = "strict") -> float:
    """
    在给定变量取值下求值

    Args:
        expr: 表达式
        env: 变量名到数值的映射
        policy: 'strict' 时非有限结果抛出 EVAL_ERROR，'nan' 时返回 nan

    Returns:
        float64 结果
    """
    if policy not in EVAL_POLICIES:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown eval policy {policy!r}")
    names, fn = compile_expr(expr)
    try:
        args = [np.float64(env[name]) for name in names]
    except KeyError as e:
        raise LagfibError(ErrorCode.EVAL_ERROR, f"Unbound variable {e.args[0]!r}")
    with np.errstate(all="ignore"):
        try:
            value = complex(fn(*args))
        except (ZeroDivisionError, OverflowError, ValueError, TypeError):
            value = complex(np.nan)
    if value.imag != 0.0 or not np.isfinite(value.real):
        if policy == "strict":
            raise LagfibError(ErrorCode.EVAL_ERROR,
                              f"Expression {to_text(expr)} is not finite at {dict(env)}")
        return float("nan")
    return float(value.real)


def to_text(expr: Expr) -> str:
    """sympy 的字符串形式，可被 parse_expr 重新解析"""
    return sp.sstr(expr)


# ============== 词法和语法分析 ==============

TOKEN_SPEC = [
    ("NUMBER", r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"),
    ("IDENT", r"[A-Za-z_][A-Za-z_0-9]*"),
    ("OP", r"\*\*|[-+*/^(),]"),
    ("SPACE", r"\s+"),
]
TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in TOKEN_SPEC))

ATOM_START = frozenset(("number", "identifier", "'('"))
UNARY_START = ATOM_START | {"'-'", "'+'"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    """词法分析，末尾附加 END；** 与 ^ 同义"""
    tokens = []
    pos = 0
    while pos < len(text):
        match = TOKEN_RE.match(text, pos)
        if match is None:
            raise LagfibError(ErrorCode.PARSE_ERROR,
                              f"Unexpected character {text[pos]!r} at position {pos}",
                              data={"position": pos, "expected": sorted(UNARY_START)})
        kind = match.lastgroup
        if kind != "SPACE":
            value = "^" if match.group() == "**" else match.group()
            tokens.append(Token(kind, value, pos))
        pos = match.end()
    tokens.append(Token("END", "", len(text)))
    return tokens


class Parser:
    """
    递归下降解析器，直接构造 sympy 表达式

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | '+' unary | power
    power := atom ('^' unary)?
    atom  := number | ident | ident '(' args ')' | '(' expr ')'

    数字按十进制文本精确转为有理数。
    """

    def __init__(self, text: str, aliases: Optional[Mapping[str, str]] = None):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self.aliases = dict(aliases or {})

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def error(self, expected) -> LagfibError:
        token = self.current
        found = "end of input" if token.kind == "END" else repr(token.text)
        return LagfibError(ErrorCode.PARSE_ERROR,
                           f"Expected {', '.join(sorted(expected))} at position {token.pos}, "
                           f"found {found}",
                           data={"position": token.pos, "expected": sorted(expected)})

    def accept(self, text: str) -> bool:
        if self.current.kind == "OP" and self.current.text == text:
            self.index += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            raise self.error({f"'{text}'"})

    def parse(self) -> Expr:
        expr = self.expr()
        if self.current.kind != "END":
            raise self.error({"operator", "end of input"})
        return expr

    def expr(self) -> Expr:
        node = self.term()
        while self.current.kind == "OP" and self.current.text in "+-":
            op = self.current.text
            self.index += 1
            right = self.term()
            node = node + right if op == "+" else node - right
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.current.kind == "OP" and self.current.text in "*/":
            op = self.current.text
            self.index += 1
            right = self.unary()
            node = node * right if op == "*" else node / right
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return base ** self.unary()
        return base

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "NUMBER":
            self.index += 1
            value = Fraction(token.text)
            return sp.Rational(value.numerator, value.denominator)
        if token.kind == "IDENT":
            self.index += 1
            if self.accept("("):
                return self.call(token)
            name = self.aliases.get(token.text, token.text)
            if name in CONSTANTS:
                return CONSTANTS[name]
            return symbol(name)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(UNARY_START)

    def call(self, token: Token) -> Expr:
        name = token.text
        if name not in FUNCTIONS:
            raise LagfibError(ErrorCode.PARSE_ERROR,
                              f"Unknown function {name!r} at position {token.pos}",
                              data={"position": token.pos, "expected": sorted(FUNCTIONS)})
        fn, arity = FUNCTIONS[name]
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        if len(args) != arity:
            raise LagfibError(ErrorCode.PARSE_ERROR,
                              f"{name} takes {arity} argument(s), got {len(args)}",
                              data={"position": token.pos, "expected": [f"{arity} arguments"]})
        return fn(*args)


def parse_expr(text: str, aliases: Optional[Mapping[str, str]] = None) -> Expr:
    """
    解析表达式文本

    优先级 ^ > 一元负号 > *,/ > +,−，除 ^ 外左结合。

    Args:
        text: 表达式文本
        aliases: 变量别名（例如 s1 → b1）

    Returns:
        sympy 表达式

    Raises:
        LagfibError: PARSE_ERROR，data 带 position 和 expected
    """
    return Parser(text, aliases).parse()
