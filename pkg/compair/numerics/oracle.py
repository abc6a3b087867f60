"""
Referenz-Orakel: Ausdrucksbäume in binary64 und in BF16 mit identischer Operationsreihenfolge
"""

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Union

from .bf16 import Bf16, bf16_binop, sqrt_seed, HALF, ONE


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # add | sub | mul | div
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Unary:
    op: str  # exp | sqrt
    arg: 'Expr'


Expr = Union[Const, Var, BinOp, Unary]


def ieee_div(a: float, b: float) -> float:
    """Division mit IEEE-Semantik statt ZeroDivisionError"""
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


_F64 = {
    'add': lambda a, b: a + b,
    'sub': lambda a, b: a - b,
    'mul': lambda a, b: a * b,
    'div': ieee_div,
}


def _f64_unary(op: str, x: float) -> float:
    if op == 'exp':
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if op == 'sqrt':
        return math.sqrt(x) if x >= 0 else math.nan
    raise ValueError(f"Unbekannte Funktion: {op}")


def oracle_eval(expr: Expr, inputs: Mapping[str, float] = None) -> float:
    """Wertet einen Ausdrucksbaum (+,-,*,/,exp,sqrt) in binary64 aus"""
    inputs = inputs or {}
    if isinstance(expr, Const):
        return float(expr.value)
    if isinstance(expr, Var):
        return float(inputs[expr.name])
    if isinstance(expr, BinOp):
        return _F64[expr.op](oracle_eval(expr.left, inputs), oracle_eval(expr.right, inputs))
    if isinstance(expr, Unary):
        return _f64_unary(expr.op, oracle_eval(expr.arg, inputs))
    raise TypeError(f"Kein Ausdruck: {expr!r}")


def bf16_eval(expr: Expr, inputs: Mapping[str, float] = None) -> Bf16:
    """
    Derselbe Baum in BF16: jede Binäroperation wird einzeln gerundet.
    exp/sqrt werden in binary64 berechnet und auf BF16 gerundet.
    """
    inputs = inputs or {}
    if isinstance(expr, Const):
        return Bf16.from_float(expr.value)
    if isinstance(expr, Var):
        value = inputs[expr.name]
        return value if isinstance(value, Bf16) else Bf16.from_float(value)
    if isinstance(expr, BinOp):
        return bf16_binop(expr.op, bf16_eval(expr.left, inputs), bf16_eval(expr.right, inputs))
    if isinstance(expr, Unary):
        return Bf16.from_float(_f64_unary(expr.op, bf16_eval(expr.arg, inputs).to_float()))
    raise TypeError(f"Kein Ausdruck: {expr!r}")


def taylor_exp_expr(x: Expr, order: int = 6) -> Expr:
    """Horner-Form von sum_{k=0..order} x^k/k!, von innen nach außen"""
    acc: Expr = Const(1.0)
    for r in range(order, 0, -1):
        acc = BinOp('add', BinOp('div', BinOp('mul', acc, x), Const(float(r))), Const(1.0))
    return acc


def taylor_exp_reference(x: float, order: int = 6) -> float:
    """binary64-Horner der Iteration *=X, /=IterRound, +=1"""
    acc = 1.0
    for r in range(order, 0, -1):
        acc = acc * x
        acc = acc / r
        acc = acc + 1.0
    return acc


def taylor_exp_bf16(x: Bf16, order: int = 6) -> Bf16:
    """Gleiche Rekursion in BF16, Schritt für Schritt gerundet"""
    acc = ONE
    for r in range(order, 0, -1):
        acc = bf16_binop('mul', acc, x)
        acc = bf16_binop('div', acc, Bf16.from_float(r))
        acc = bf16_binop('add', acc, ONE)
    return acc


def newton_sqrt_reference(x: float, rounds: int = 4) -> float:
    """binary64-Newton y <- (x/y + y) * 0.5 mit dem BF16-Startwert"""
    if x == 0.0:
        return 0.0
    if x < 0.0:
        return math.nan
    y = sqrt_seed(Bf16.from_float(x)).to_float()
    for _ in range(rounds):
        y = (x / y + y) * 0.5
    return y


def newton_sqrt_bf16(x: Bf16, rounds: int = 4) -> Bf16:
    if x.is_zero:
        return x
    if x.bits & 0x8000:
        return Bf16(0x7FC0)
    y = sqrt_seed(x)
    for _ in range(rounds):
        t = bf16_binop('div', x, y)
        t = bf16_binop('add', t, y)
        y = bf16_binop('mul', t, HALF)
    return y


def count_ops(expr: Expr) -> Dict[str, int]:
    """Anzahl der Operationen je Art (für Kostenabschätzungen)"""
    counts: Dict[str, int] = {}

    def visit(node):
        if isinstance(node, BinOp):
            counts[node.op] = counts.get(node.op, 0) + 1
            visit(node.left)
            visit(node.right)
        elif isinstance(node, Unary):
            counts[node.op] = counts.get(node.op, 0) + 1
            visit(node.arg)

    visit(expr)
    return counts
