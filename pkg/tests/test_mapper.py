from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from config.hardware import HardwareConfig, MappingPolicy, RunConfig
from config.models import builtin_model
from compair.mapper import (
    CapacityError, dram_tile_cost, estimate_utilization, fc_shapes, pad_rows, plan_attention, plan_layer,
    reference_gemv, simulate_gemv, split_weight, sram_tile_cost, stage_layers,
)


def two_devices():
    hw = HardwareConfig()
    return replace(hw, interconnect=replace(hw.interconnect, devices=2))


def run_config(**kwargs):
    mapping = MappingPolicy(**kwargs.pop('mapping', {}))
    return RunConfig(mapping=mapping, **kwargs)


class TestSplit:
    def test_output_split_13b(self):
        assert split_weight(5120, 5120, 32 * 16, 'output_split') == ({(5120, 10): 512}, 1)

    def test_input_split_13b(self):
        assert split_weight(5120, 5120, 32 * 16, 'input_split') == ({(2560, 20): 512}, 2)

    def test_single_bank_holds_everything(self):
        assert split_weight(4096, 4096, 1, 'output_split') == ({(4096, 4096): 1}, 1)
        assert split_weight(4096, 4096, 1, 'input_split') == ({(4096, 4096): 1}, 1)

    def test_uneven_columns(self):
        assert split_weight(10, 5, 4, 'output_split') == ({(10, 2): 1, (10, 1): 3}, 1)

    def test_more_banks_than_columns(self):
        tiles, _ = split_weight(64, 3, 8, 'output_split')
        assert tiles == {(64, 1): 3}

    def test_unknown_split(self):
        with pytest.raises(ValueError):
            split_weight(8, 8, 2, 'diagonal')

    @given(rows=st.integers(1, 20000), cols=st.integers(1, 20000), banks=st.integers(1, 1024),
           split=st.sampled_from(['output_split', 'input_split']))
    def test_tiles_cover_weight(self, rows, cols, banks, split):
        tiles, _ = split_weight(rows, cols, banks, split)
        assert sum(r * c * n for (r, c), n in tiles.items()) == rows * cols
        assert sum(tiles.values()) <= banks


class TestShapes:
    def test_fc_shapes_7b(self):
        shapes = fc_shapes(builtin_model('llama2-7b'))
        assert shapes['q'] == (4096, 4096)
        assert shapes['down'] == (11008, 4096)
        assert set(shapes) == {'q', 'k', 'v', 'o', 'up', 'gate', 'down'}

    def test_gqa_kv_projection(self):
        shapes = fc_shapes(builtin_model('llama2-70b'))
        assert shapes['k'] == (8192, 1024)

    def test_stage_layers(self):
        assert stage_layers(32, 3) == [11, 11, 10]
        assert stage_layers(2, 1) == [2]
        with pytest.raises(ValueError):
            stage_layers(4, 0)

    def test_pad_rows(self):
        assert pad_rows(0) == 0
        assert pad_rows(17) == 32
        assert pad_rows(5120) == 5120


class TestPlan:
    def test_input_split_builds_reduce_tree(self):
        plan = plan_layer(builtin_model('llama2-13b', num_layers=2), run_config(mapping={'fc_split': 'input_split'}),
                          HardwareConfig())
        q = plan.fc['q'].to_dict()
        assert q['tiles'] == [{'rows': 2560, 'cols': 20, 'banks': 512}]
        assert q['reduce_tree'] == {'group': 2, 'levels': 1}
        assert q['input_broadcast'] == 2

    def test_output_split_has_no_reduction(self):
        plan = plan_layer(builtin_model('llama2-13b', num_layers=2), run_config(), HardwareConfig())
        assert plan.fc['q'].to_dict()['reduce_tree'] is None
        assert plan.fc['q'].max_tile == (5120, 10)
        assert plan.required_bytes <= plan.capacity_bytes

    def test_decode_batch_one_stays_in_dram(self):
        plan = plan_layer(builtin_model('llama2-7b'), run_config(arch_variant='HYBRID_BASE'), HardwareConfig())
        assert {op.target for op in plan.fc.values()} == {'dram'}

    def test_prefill_moves_to_sram(self):
        plan = plan_layer(builtin_model('llama2-7b'), run_config(arch_variant='HYBRID_BASE'), HardwareConfig(),
                          phase='prefill')
        assert plan.batch == 128
        assert plan.fc['q'].target == 'sram'

    def test_dram_only_uses_nlu(self):
        plan = plan_layer(builtin_model('llama2-7b'), run_config(arch_variant='DRAM_ONLY'), HardwareConfig())
        assert {op.target for op in plan.fc.values()} == {'dram'}
        assert {op.target for op in plan.nonlinear.values()} == {'nlu'}

    def test_hybrid_uses_noc_kernels(self):
        plan = plan_layer(builtin_model('llama2-7b'), run_config(), HardwareConfig())
        assert plan.nonlinear['softmax'].target == 'noc'
        assert plan.nonlinear['softmax'].per_position

    def test_input_split_needs_noc(self):
        with pytest.raises(ValueError):
            plan_layer(builtin_model('llama2-7b'),
                       run_config(arch_variant='DRAM_ONLY', mapping={'fc_split': 'input_split'}), HardwareConfig())

    def test_capacity_error(self):
        with pytest.raises(CapacityError) as exc:
            plan_layer(builtin_model('llama2-70b'), run_config(), HardwareConfig())
        shortfall = exc.value.shortfall
        assert shortfall['shortfall_bytes'] == shortfall['required_bytes'] - shortfall['capacity_bytes'] > 0
        assert shortfall['layers'] == 80

    def test_plan_serializes(self):
        d = plan_layer(builtin_model('llama2-7b'), run_config(), HardwareConfig()).to_dict()
        assert d['banks'] == 512
        assert d['attention']['head_assignment'] == 'round-robin'
        assert set(d['fc']) == {'q', 'k', 'v', 'o', 'up', 'gate', 'down'}


class TestAttention:
    def test_kv_slots_round_robin(self):
        plan = plan_attention(builtin_model('llama2-7b'), run_config(), HardwareConfig(), 512, 144)
        assert plan.kv_slots_per_bank == 9
        assert plan.kv_bytes_per_bank == 2 * 9 * 128 * 2
        assert plan.kv_rows_per_bank == 5

    def test_kv_scales_with_batch(self):
        one = plan_attention(builtin_model('llama2-7b'), run_config(), HardwareConfig(), 512, 144)
        four = plan_attention(builtin_model('llama2-7b'), run_config(batch=4), HardwareConfig(), 512, 144)
        assert four.kv_bytes_per_bank == 4 * one.kv_bytes_per_bank

    def test_sram_gqa_shares_kv_loads(self):
        plan = plan_attention(builtin_model('llama2-70b'), run_config(mapping={'attention_target': 'sram_gqa'}),
                              HardwareConfig(), 512, 2048)
        assert plan.sram_loads > 0
        assert plan.mha_sram_loads == 8 * plan.sram_loads

    def test_sram_gqa_rejected_for_mha(self):
        with pytest.raises(ValueError):
            plan_attention(builtin_model('llama2-7b'), run_config(mapping={'attention_target': 'sram_gqa'}),
                           HardwareConfig(), 512, 128)


class TestUtilization:
    def test_tp_one_is_full(self):
        plan = plan_layer(builtin_model('llama2-13b', num_layers=2), run_config(), HardwareConfig())
        assert estimate_utilization(plan).utilization == pytest.approx(1.0)

    def test_decreases_with_tp(self):
        model = builtin_model('llama2-13b', num_layers=2)
        one = estimate_utilization(plan_layer(model, run_config(), two_devices()))
        two = estimate_utilization(plan_layer(model, run_config(tp_degree=2), two_devices()))
        assert two.banks == 2 * one.banks
        assert two.utilization < one.utilization
        assert two.busy_ns < one.busy_ns

    def test_per_bank_vector(self):
        model = builtin_model('llama2-13b', num_layers=2)
        usage = estimate_utilization(plan_layer(model, run_config(tp_degree=2), two_devices()))
        per_bank = usage.per_bank
        assert len(per_bank) == usage.banks
        assert max(per_bank) == pytest.approx(1.0)
        assert np.mean(per_bank) == pytest.approx(usage.busy_fraction)
        assert per_bank == sorted(per_bank, reverse=True)
        assert usage.to_dict()['per_bank'] == per_bank


class TestCosts:
    def test_dram_cost_scales_with_batch(self):
        hw = HardwareConfig()
        assert dram_tile_cost(hw, 512, 8, 4).ns == pytest.approx(4 * dram_tile_cost(hw, 512, 8, 1).ns)
        assert dram_tile_cost(hw, 0, 8, 4).ns == 0.0

    def test_sram_amortizes_load(self):
        hw = HardwareConfig()
        small = sram_tile_cost(hw, 512, 8, 1, 'IN512_OUT8')
        large = sram_tile_cost(hw, 512, 8, 64, 'IN512_OUT8')
        assert large.ns < 64 * small.ns
        assert large.loads == small.loads == 1


class TestFunctional:
    def test_output_split_is_bit_exact(self):
        rng = np.random.RandomState(0)
        w = rng.uniform(-1.0, 1.0, (64, 32)).astype(np.float32)
        x = rng.uniform(-1.0, 1.0, 64).astype(np.float32)
        np.testing.assert_array_equal(simulate_gemv(w, x, 8, 'output_split'), reference_gemv(w, x))

    def test_input_split_close_to_reference(self):
        rng = np.random.RandomState(1)
        w = rng.uniform(-1.0, 1.0, (128, 16)).astype(np.float32)
        x = rng.uniform(-1.0, 1.0, 128).astype(np.float32)
        got = simulate_gemv(w, x, 8, 'input_split')
        ref = reference_gemv(w, x)
        assert np.max(np.abs(got - ref)) <= 2 ** -5 * np.max(np.abs(ref))

    def test_unknown_split(self):
        with pytest.raises(ValueError):
            simulate_gemv(np.ones((2, 2)), np.ones(2), 2, 'diagonal')
