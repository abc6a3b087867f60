import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from config.hardware import HardwareConfig
from compair.isa import RowAddr
from compair.kernels import (
    KERNEL_CHECKS, ROPE_CYCLE_BOUND, KernelCheck, check_kernel, exp_kernel, exp_program, exp_reference, kernel_costs,
    lane_mask, rel_error, rmsnorm_kernel, rope_kernel, rope_program, silu_kernel, softmax_kernel,
    softmax_reference, sqrt_kernel, trace_exp,
)
from compair.numerics import Bf16, ONE


class TestExp:
    def test_exp_of_zero(self):
        assert exp_kernel([0.0]).values == [ONE]

    def test_empty_input(self):
        result = exp_kernel([])
        assert result.values == [] and result.cycles == 0

    def test_close_to_reference(self):
        xs = [0.0, 0.5, 1.0, 2.0]
        got = exp_kernel(xs).floats()
        assert rel_error(got, [exp_reference(x) for x in xs]) <= 2 ** -5

    def test_fused_and_unfused_agree(self):
        xs = [0.25 * i for i in range(16)]
        fused = exp_kernel(xs, fused=True)
        unfused = exp_kernel(xs, fused=False)
        assert fused.values == unfused.values
        assert fused.cycles < unfused.cycles

    def test_mesh_matches_interpreter(self):
        xs = [-1.0, 0.3, 1.7, 3.0]
        assert exp_kernel(xs).values == exp_kernel(xs, interpret=True).values

    def test_two_positions_share_the_mesh(self):
        one = exp_kernel([0.5] * 16)
        two = exp_kernel([0.5] * 32)
        assert two.floats() == one.floats() * 2
        assert two.cycles < 1.5 * one.cycles

    def test_paired_flows_match_interpreter(self):
        xs = [0.1 * i - 1.5 for i in range(48)]
        assert exp_kernel(xs).values == exp_kernel(xs, interpret=True).values

    def test_program_arguments(self):
        with pytest.raises(ValueError):
            exp_program(RowAddr(0), RowAddr(1), flow=2)
        with pytest.raises(ValueError):
            exp_program(RowAddr(0), RowAddr(1), order=16)


class TestRope:
    def test_pair_rotation(self):
        result = rope_kernel([1.5, 2.0], sin=[1.0, 1.0], cos=[0.0, 0.0])
        assert result.floats() == [-2.0, 1.5]

    def test_rearrangement_within_cycle_bound(self):
        head = 128
        result = rope_kernel([0.5] * head, [0.5] * head, [0.5] * head)
        assert 0 < result.noc_cycles <= ROPE_CYCLE_BOUND
        assert result.cycles > result.noc_cycles

    def test_odd_head_dim(self):
        with pytest.raises(ValueError):
            rope_program(3, RowAddr(0), RowAddr(1))


class TestSqrt:
    def test_sqrt_of_four(self):
        assert sqrt_kernel(4.0).floats() == [2.0]

    def test_special_values(self):
        assert sqrt_kernel(0.0).floats() == [0.0]
        assert sqrt_kernel(-1.0).values[0].is_nan

    @settings(max_examples=10)
    @given(st.floats(min_value=0.25, max_value=64.0))
    def test_close_to_math_sqrt(self, x):
        got = sqrt_kernel(x).floats()[0]
        assert got == pytest.approx(math.sqrt(Bf16.from_float(x).to_float()), rel=2 ** -6)


class TestComposite:
    def test_softmax_uniform(self):
        assert softmax_kernel([0.5] * 16).floats() == [1 / 16] * 16

    def test_softmax_single_element(self):
        assert softmax_kernel([3.0]).floats() == [1.0]

    def test_softmax_sums_to_one(self):
        out = softmax_kernel([0.1 * i - 0.8 for i in range(16)]).floats()
        assert sum(out) == pytest.approx(1.0, rel=2 ** -5)
        assert out == sorted(out)

    @pytest.mark.parametrize('n', [16, 12])
    def test_softmax_max_found_across_banks(self, n):
        scores = [-3.0] * (n - 1) + [-0.5]
        result = softmax_kernel(scores)
        shift = [p for p in result.programs if p.startswith('NoC_Access Wr, -, -,') and ', -0.5\n' in p]
        assert shift
        labels = {label for label, _ in result.phase_cycles}
        assert 'exchange' in labels
        assert rel_error(result.floats(), softmax_reference(scores)) <= 2 ** -4

    def test_softmax_mesh_matches_interpreter(self):
        scores = [0.3 * math.sin(i) - 0.2 for i in range(32)]
        assert softmax_kernel(scores).values == softmax_kernel(scores, interpret=True).values

    def test_softmax_empty(self):
        with pytest.raises(ValueError):
            softmax_kernel([])

    def test_softmax_uneven_banks(self):
        with pytest.raises(ValueError):
            softmax_kernel([1.0] * 10, banks=4)

    def test_rmsnorm_of_ones(self):
        assert rmsnorm_kernel([1.0] * 16).floats() == [1.0] * 16

    def test_rmsnorm_zero_vector(self):
        with pytest.raises(ValueError):
            rmsnorm_kernel([0.0] * 4)

    def test_silu_of_zero(self):
        assert silu_kernel([0.0] * 4).floats() == [0.0] * 4


class TestChecks:
    @pytest.mark.parametrize('name', sorted(KERNEL_CHECKS))
    def test_kernel_passes(self, name):
        check = check_kernel(name)
        assert check.passed, check.to_dict()

    def test_exp_reports_full_range_and_gates_positive(self):
        check = check_kernel('exp')
        inputs = [x for x, _, _ in check.rows]
        assert inputs[0] == -4.0 and inputs[-1] == 4.0
        assert check.gate == (0.0, 4.0)
        assert check.max_rel_err >= check.gated_rel_err
        assert check.gated_rel_err <= check.tolerance
        assert check.passed
        d = check.to_dict()
        assert d['gate'] == [0.0, 4.0]
        assert d['gated_rel_err'] == check.gated_rel_err

    def test_gate_decides_pass(self):
        check = KernelCheck('x', max_rel_err=0.5, tolerance=0.1, cycles=1, gate=(0.0, 1.0), gated_rel_err=0.05)
        assert check.passed
        assert not replace(check, gated_rel_err=None).passed

    def test_unknown_kernel(self):
        with pytest.raises(KeyError) as exc:
            check_kernel('gelu')
        assert 'softmax' in str(exc.value)

    def test_rel_error(self):
        assert rel_error([1.0, 2.2], [1.0, 2.0]) == pytest.approx(0.1)
        assert rel_error([0.1], [0.0]) == pytest.approx(0.1)
        assert rel_error([0.0, 1.1], [0.0, 1.0], normalize=True) == pytest.approx(0.1)

    def test_lane_mask(self):
        assert lane_mask([0], banks=[0, 1]) == 0x11
        assert lane_mask(range(4), banks=[15]) == 0xF << 60


class TestCosts:
    def test_fusion_gain(self):
        costs = kernel_costs(HardwareConfig())
        assert 0.33 <= costs.fusion_gain <= 0.50
        assert costs.softmax_per_elem < costs.softmax_unfused_per_elem
        assert costs.rope_noc <= ROPE_CYCLE_BOUND
        assert 'fusion_gain' in costs.to_dict()

    def test_cached_per_hardware(self):
        hw = HardwareConfig()
        assert kernel_costs(hw) is kernel_costs(hw)


class TestTrace:
    def test_trace_exp(self):
        trace = trace_exp([0.5, 1.0])
        assert trace.result.floats() == exp_kernel([0.5, 1.0]).floats()
        events = {event for _, _, _, event in trace.flits}
        assert {'inject', 'eject'} <= events
        assert trace.schedules and trace.schedules[0].dump(0)

    def test_trace_needs_input(self):
        with pytest.raises(ValueError):
            trace_exp([])
