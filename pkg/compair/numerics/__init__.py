"""
Numerics package: BF16 arithmetic and binary64 oracles
"""

from .bf16 import (
    Bf16, NumericEvents, OPS, OP_SYMBOLS, SYMBOL_OF, ZERO, ONE, HALF, bf16_binop, bf16_max, binop_bits,
    bits_to_f32, f32_to_bits, sqrt_seed, ulp_distance,
)
from .oracle import (
    Const, Var, BinOp, Unary, oracle_eval, bf16_eval, taylor_exp_expr, taylor_exp_reference,
    taylor_exp_bf16, newton_sqrt_reference, newton_sqrt_bf16, ieee_div,
)

__all__ = [
    'Bf16', 'NumericEvents', 'OPS', 'OP_SYMBOLS', 'SYMBOL_OF', 'ZERO', 'ONE', 'HALF', 'bf16_binop', 'bf16_max',
    'binop_bits', 'bits_to_f32', 'f32_to_bits', 'sqrt_seed', 'ulp_distance',
    'Const', 'Var', 'BinOp', 'Unary', 'oracle_eval', 'bf16_eval', 'taylor_exp_expr',
    'taylor_exp_reference', 'taylor_exp_bf16', 'newton_sqrt_reference', 'newton_sqrt_bf16',
    'ieee_div',
]
