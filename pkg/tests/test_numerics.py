import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compair.numerics import (
    BinOp, Bf16, Const, HALF, NumericEvents, ONE, Unary, Var, ZERO, bf16_binop, bf16_eval, bf16_max,
    binop_bits, ieee_div, newton_sqrt_bf16, newton_sqrt_reference, oracle_eval, sqrt_seed, taylor_exp_bf16,
    taylor_exp_expr, taylor_exp_reference, ulp_distance,
)

finite_bits = st.integers(min_value=0, max_value=0xFFFF).filter(lambda b: (b & 0x7F80) != 0x7F80)


def test_add_one_plus_one():
    assert bf16_binop('add', ONE, ONE).to_float() == 2.0


def test_add_exact_sum():
    out = bf16_binop('add', Bf16.from_float(0.2578125), HALF)
    assert out.to_float() == 0.7578125


def test_assembler_symbols_map_to_ops():
    assert bf16_binop('+=', ONE, ONE) == bf16_binop('add', ONE, ONE)
    assert bf16_binop('/=', ONE, HALF).to_float() == 2.0


def test_unknown_op_rejected():
    with pytest.raises(ValueError):
        bf16_binop('pow', ONE, ONE)


def test_round_to_nearest_even():
    # genau zwischen 1.0 und 1+2^-7 -> gerade Mantisse
    assert Bf16.from_float(1.0 + 2 ** -8).bits == 0x3F80
    assert Bf16.from_float(1.0 + 3 * 2 ** -8).bits == 0x3F82


def test_no_double_rounding_near_tie():
    # knapp über dem Halbpunkt: binary32 allein fiele genau auf den Halbpunkt
    assert Bf16.from_float(1.0 + 2 ** -8 + 2 ** -30).bits == 0x3F81
    assert Bf16.from_float(-(1.0 + 2 ** -8 + 2 ** -30)).bits == 0xBF81
    assert Bf16.from_float(1.0 + 2 ** -8 - 2 ** -30).bits == 0x3F80


@given(st.integers(min_value=0, max_value=0x7F7E))
def test_rounds_binary64_neighbours_of_midpoint(bits):
    lo, hi = Bf16(bits).to_float(), Bf16(bits + 1).to_float()
    mid = (lo + hi) / 2
    assert Bf16.from_float(float(np.nextafter(mid, math.inf))).bits == bits + 1
    assert Bf16.from_float(float(np.nextafter(mid, -math.inf))).bits == bits


def test_bits_out_of_range():
    with pytest.raises(ValueError):
        Bf16(0x10000)


def test_nan_propagates():
    nan = Bf16.from_float(math.nan)
    assert nan.is_nan
    assert bf16_binop('add', nan, ONE).is_nan
    assert bf16_max(ONE, nan).is_nan


def test_division_by_zero_gives_signed_inf():
    assert bf16_binop('div', ONE, ZERO).is_inf
    assert bf16_binop('div', -ONE, ZERO).to_float() == -math.inf
    assert bf16_binop('div', ZERO, ZERO).is_nan


@given(finite_bits)
def test_mul_by_one_is_identity(bits):
    x = Bf16(bits)
    assert bf16_binop('mul', x, ONE) == x


@given(finite_bits, finite_bits)
def test_add_commutes(a, b):
    assert bf16_binop('add', Bf16(a), Bf16(b)) == bf16_binop('add', Bf16(b), Bf16(a))


@given(st.lists(finite_bits, min_size=1, max_size=32), st.lists(finite_bits, min_size=1, max_size=32))
def test_vectorized_matches_scalar(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    vec = binop_bits('mul', np.array(a, dtype=np.uint16), np.array(b, dtype=np.uint16))
    for x, y, out in zip(a, b, vec):
        assert bf16_binop('mul', Bf16(x), Bf16(y)).bits == int(out)


def test_ulp_distance():
    assert ulp_distance(ONE, Bf16(0x3F81)) == 1
    assert ulp_distance(Bf16(0x8001), Bf16(0x0001)) == 2


def test_sqrt_seed():
    assert sqrt_seed(Bf16.from_float(4.0)).to_float() == 2.0
    assert sqrt_seed(ONE) == ONE
    assert sqrt_seed(ZERO) == ZERO


def test_numeric_events():
    events = NumericEvents()
    events.observe('div', ONE, ZERO, bf16_binop('div', ONE, ZERO))
    big = Bf16.from_float(3e38)
    events.observe('mul', big, big, bf16_binop('mul', big, big))
    events.observe('div', ZERO, ZERO, bf16_binop('div', ZERO, ZERO))
    assert events.to_dict() == {'div_by_zero': 2, 'overflow': 1, 'nan': 1}
    other = NumericEvents(nan=2)
    events.merge(other)
    assert events.nan == 3


class TestOracle:
    def test_exp_and_sqrt(self):
        assert oracle_eval(Unary('exp', Const(0.0))) == 1.0
        assert oracle_eval(Unary('sqrt', Const(4.0))) == 2.0

    def test_ieee_div(self):
        assert ieee_div(1.0, 0.0) == math.inf
        assert ieee_div(-1.0, 0.0) == -math.inf
        assert math.isnan(ieee_div(0.0, 0.0))

    def test_taylor_exp_at_one(self):
        assert taylor_exp_reference(1.0) == pytest.approx(2.7180555555, abs=1e-9)
        assert taylor_exp_reference(0.0) == 1.0

    def test_taylor_expression_matches_recurrence(self):
        expr = taylor_exp_expr(Var('x'))
        assert oracle_eval(expr, {'x': 1.0}) == pytest.approx(taylor_exp_reference(1.0))

    @given(st.floats(min_value=-4.0, max_value=4.0))
    def test_bf16_eval_same_order_as_kernel(self, x):
        xb = Bf16.from_float(x)
        assert bf16_eval(taylor_exp_expr(Var('x')), {'x': xb}) == taylor_exp_bf16(xb)

    def test_bf16_eval_binop(self):
        expr = BinOp('add', Var('a'), Const(0.5))
        assert bf16_eval(expr, {'a': 0.2578125}).to_float() == 0.7578125

    def test_unknown_expression(self):
        with pytest.raises(TypeError):
            oracle_eval('x')

    def test_newton_sqrt(self):
        assert newton_sqrt_bf16(Bf16.from_float(4.0)).to_float() == 2.0
        assert newton_sqrt_bf16(ONE) == ONE
        assert newton_sqrt_bf16(ZERO) == ZERO
        assert newton_sqrt_bf16(-ONE).is_nan
        assert newton_sqrt_reference(0.0) == 0.0

    @given(st.floats(min_value=0.25, max_value=64.0))
    def test_newton_sqrt_close_to_reference(self, x):
        got = newton_sqrt_bf16(Bf16.from_float(x)).to_float()
        ref = newton_sqrt_reference(Bf16.from_float(x).to_float())
        assert abs(got - ref) <= 2 ** -6 * ref
