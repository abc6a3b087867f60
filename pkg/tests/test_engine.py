import json
from dataclasses import replace

import pytest

from config.hardware import DramPimSpec, HardwareConfig, InterconnectSpec, MappingPolicy, RunConfig
from config.models import builtin_model
from compair.engine import (
    CausalityError, ENERGY_COMPONENTS, EventQueue, OpCost, PHASES, REPORT_FIELDS, SimulationError, Simulator,
    check_report, cxl_collective, expand_grid, link_energy_pj, reports_to_csv, run, sweep,
)

GOLDEN_HEADER = (
    'model,arch_variant,phase,batch,prompt_len,gen_len,tp_degree,pp_degree,fc_split,sram_layout,'
    'total_cycles,prefill_cycles,decode_cycles,fc_cycles,attention_cycles,nonlinear_cycles,collective_cycles,'
    'overlap_cycles,'
    'tokens_per_second,energy_dram_pj,energy_sram_pj,energy_bond_pj,energy_noc_pj,energy_link_pj,'
    'energy_total_pj,energy_per_token_pj,bank_utilization,fc_bottleneck,kv_rows_per_bank,simulated_tokens,status'
)


def desk_hw(channels=2, devices=1):
    return HardwareConfig(dram=DramPimSpec(channels_per_device=channels),
                          interconnect=InterconnectSpec(devices=devices))


def desk_run(**kwargs):
    kwargs.setdefault('prompt_len', 16)
    kwargs.setdefault('gen_len', 4)
    mapping = kwargs.pop('mapping', {})
    tp, pp = kwargs.get('tp_degree', 1), kwargs.get('pp_degree', 1)
    return RunConfig(mapping=MappingPolicy(tp_degree=tp, pp_degree=pp, **mapping), **kwargs)


def tiny_model(layers=1):
    return builtin_model('llama2-7b', num_layers=layers)


@pytest.fixture(scope='module')
def decode_report():
    return run(tiny_model(), desk_run(), desk_hw())


class TestReport:
    def test_fields(self, decode_report):
        d = decode_report.to_dict()
        assert set(REPORT_FIELDS) <= set(d)
        assert d['status'] == 'ok'
        assert d['model'] == 'llama2-7b'
        assert d['simulated_tokens'] == 4

    def test_phases_sum_to_total(self, decode_report):
        busy = sum(decode_report.phase_cycles().values())
        assert busy - decode_report.overlap_cycles == decode_report.total_cycles
        assert decode_report.total_cycles == decode_report.prefill_cycles + decode_report.decode_cycles
        assert decode_report.prefill_cycles == 0

    def test_energy_sums(self, decode_report):
        energy = decode_report.energy()
        assert set(energy) == set(ENERGY_COMPONENTS)
        assert sum(energy.values()) == decode_report.energy_total_pj
        assert all(v >= 0 for v in energy.values())
        assert decode_report.energy_link_pj == 0.0

    def test_throughput(self, decode_report):
        assert decode_report.tokens_per_second > 0
        assert decode_report.energy_per_token_pj == pytest.approx(decode_report.energy_total_pj / 4)

    def test_hybrid_runs_nonlinear_on_noc(self, decode_report):
        assert decode_report.nonlinear_cycles > 0
        assert decode_report.energy_noc_pj > 0

    def test_check_report_catches_tampering(self, decode_report):
        tampered = replace(decode_report, total_cycles=decode_report.total_cycles + 1)
        with pytest.raises(SimulationError):
            check_report(tampered)
        negative = replace(decode_report, energy_dram_pj=-1.0)
        with pytest.raises(SimulationError):
            check_report(negative)

    def test_csv_golden_header(self, decode_report):
        text = reports_to_csv([decode_report.to_dict()])
        header, row = text.splitlines()
        assert header == GOLDEN_HEADER
        assert row.startswith('llama2-7b,HYBRID_OPT,decode,1,16,4,')

    def test_per_bank_utilization_outside_csv(self, decode_report):
        d = decode_report.to_dict()
        per_bank = d['bank_utilization_per_bank']
        assert per_bank and all(0.0 <= u <= 1.0 for u in per_bank)
        assert max(per_bank) == pytest.approx(1.0)
        assert 'bank_utilization_per_bank' not in REPORT_FIELDS
        assert json.loads(json.dumps(d))['bank_utilization_per_bank'] == per_bank


class TestSimulator:
    def test_qkv_scope_is_fc_only(self):
        report = run(tiny_model(), desk_run(), desk_hw(), scope='qkv')
        assert report.fc_cycles == report.total_cycles > 0
        assert report.attention_cycles == report.nonlinear_cycles == report.collective_cycles == 0
        assert set(report.fc_ops) == {'q', 'k', 'v'}

    def test_unknown_scope(self):
        with pytest.raises(ValueError):
            Simulator(tiny_model(), desk_run(), desk_hw(), scope='ffn')

    def test_prefill_phase(self):
        report = run(tiny_model(), desk_run(phase='prefill'), desk_hw())
        assert report.prefill_cycles > 0
        assert report.decode_cycles > 0

    def test_dram_only_has_no_noc_energy(self):
        report = run(tiny_model(), desk_run(arch_variant='DRAM_ONLY'), desk_hw())
        assert report.energy_noc_pj == 0.0
        assert report.energy_sram_pj == 0.0
        assert report.nonlinear_cycles > 0

    def test_layers_scale_latency(self):
        one = run(tiny_model(1), desk_run(), desk_hw())
        two = run(tiny_model(2), desk_run(), desk_hw())
        assert two.total_cycles == pytest.approx(2 * one.total_cycles, rel=0.01)

    def test_tensor_parallel_adds_collectives(self):
        report = run(tiny_model(), desk_run(tp_degree=2), desk_hw(devices=2))
        assert report.collective_cycles > 0
        assert report.energy_link_pj > 0

    def test_pipeline_boundary(self):
        report = run(tiny_model(2), desk_run(pp_degree=2), desk_hw(devices=2))
        assert report.collective_cycles > 0

    def test_collectives_per_layer(self):
        sim = Simulator(tiny_model(), desk_run(tp_degree=2), desk_hw(devices=2))
        names = [op.name for op in sim.layer_ops('decode', 17)]
        assert names.count('cxl_allreduce') == 2

    def test_hybrid_layer_overlaps_units(self, decode_report):
        # RoPE auf dem NoC läuft neben der V-Projektion
        assert decode_report.overlap_cycles > 0
        assert decode_report.total_cycles < sum(decode_report.phase_cycles().values())

    def test_graph_dependencies(self):
        sim = Simulator(tiny_model(), desk_run(tp_degree=2), desk_hw(devices=2))
        graph = {node.key: node for node in sim.layer_graph('decode', 17)}
        assert graph['q'].deps == graph['k'].deps == graph['v'].deps == ('rmsnorm_attn',)
        assert graph['rope'].deps == ('q', 'k')
        assert graph['sv'].deps == ('softmax', 'v')
        assert graph['down'].deps == ('silu', 'up')
        assert graph['rmsnorm_ffn'].deps == ('allreduce_attn',)
        assert graph['rope'].op.resource == 'noc'
        assert graph['allreduce_ffn'].op.resource == 'cxl'

    def test_causality_check(self):
        report = run(tiny_model(), desk_run(), desk_hw(), check_causality=True)
        assert report.total_cycles > 0

    def test_decode_extrapolation(self):
        exact = run(tiny_model(), desk_run(gen_len=12, decode_window=12), desk_hw())
        short = run(tiny_model(), desk_run(gen_len=12, decode_window=3), desk_hw())
        assert short.simulated_tokens == 3
        assert short.decode_cycles == pytest.approx(exact.decode_cycles, rel=0.02)

    def test_capacity_error(self):
        with pytest.raises(SimulationError) as exc:
            run(tiny_model(), desk_run(batch=64, prompt_len=8192), desk_hw())
        assert exc.value.diagnostic['shortfall_bytes'] > 0


class TestSchedule:
    def sim(self):
        return Simulator(tiny_model(), desk_run(), desk_hw(), check_causality=True)

    def test_independent_units_overlap(self):
        ops = [OpCost('a', 'fc', 100, resource='dram'), OpCost('b', 'nonlinear', 40, resource='noc')]
        result = self.sim().schedule(ops, [[], []])
        assert result.cycles == 100
        assert result.overlap == 40

    def test_shared_unit_serializes(self):
        ops = [OpCost('a', 'fc', 100, resource='sram'), OpCost('b', 'fc', 40, resource='sram')]
        result = self.sim().schedule(ops, [[], []])
        assert result.cycles == 140
        assert result.overlap == 0

    def test_dependency_waits(self):
        ops = [OpCost('a', 'fc', 100, resource='dram'), OpCost('b', 'nonlinear', 40, resource='noc')]
        result = self.sim().schedule(ops, [[], [0]])
        assert result.cycles == 140
        assert result.phases == {'fc': 100, 'attention': 0, 'nonlinear': 40, 'collective': 0}

    def test_join_starts_after_last_input(self):
        ops = [OpCost('q', 'fc', 30, resource='dram'), OpCost('k', 'fc', 30, resource='dram'),
               OpCost('rope', 'nonlinear', 10, resource='noc'), OpCost('v', 'fc', 30, resource='dram')]
        result = self.sim().schedule(ops, [[], [], [0, 1], []])
        # q, k, v seriell auf dram; rope ab 60 neben v
        assert result.cycles == 90
        assert result.overlap == 10

    def test_empty(self):
        assert self.sim().schedule([], []).cycles == 0


class TestCollectives:
    def test_reduce_formula(self):
        spec = InterconnectSpec()
        assert cxl_collective(1000, 'reduce', 4, spec) == pytest.approx(1000 / 29.44e9 * 1e9 + 600.0)

    def test_flat_over_device_count(self):
        flat = (1 << 20) / 29.44e9 * 1e9 + 600.0
        for devices in (1, 2, 8, 32):
            assert cxl_collective(1 << 20, 'reduce', devices) == pytest.approx(flat)
            assert cxl_collective(1 << 20, 'broadcast', devices) == pytest.approx(flat)

    def test_p2p(self):
        assert cxl_collective(535, 'p2p', 2) == pytest.approx(10.0 + 600.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            cxl_collective(8, 'gather', 2)
        with pytest.raises(ValueError):
            cxl_collective(8, 'reduce', 0)

    def test_link_energy(self):
        spec = InterconnectSpec()
        assert link_energy_pj(10, 'p2p', 8, spec) == 10 * 8 * 5.0
        assert link_energy_pj(10, 'reduce', 3, spec) == 10 * 8 * 2 * 5.0


class TestEventQueue:
    def test_time_then_insertion_order(self):
        queue = EventQueue()
        queue.push(5, 'b')
        queue.push(1, 'a')
        queue.push(5, 'c')
        assert [queue.pop().kind for _ in range(3)] == ['a', 'b', 'c']
        assert queue.processed == 3
        assert len(queue) == 0

    def test_time_going_backwards(self):
        queue = EventQueue(check_causality=True)
        queue.push(5, 'late')
        queue.pop()
        queue.push(3, 'early')
        with pytest.raises(CausalityError):
            queue.pop()

    def test_data_from_the_future(self):
        queue = EventQueue(check_causality=True)
        queue.push(2, 'op', ready=7)
        with pytest.raises(CausalityError):
            queue.pop()


class TestSweep:
    def test_expand_grid(self):
        points = expand_grid(RunConfig(), {'batch': [1, 2], 'mapping.fc_split': ['output_split', 'input_split']})
        assert [(p.batch, p.mapping.fc_split) for p in points] == [
            (1, 'output_split'), (1, 'input_split'), (2, 'output_split'), (2, 'input_split')]

    def test_expand_grid_syncs_parallelism(self):
        [point] = expand_grid(RunConfig(), {'tp_degree': [4]})
        assert point.tp_degree == point.mapping.tp_degree == 4

    def test_failed_point_does_not_stop_sweep(self):
        runs = expand_grid(desk_run(), {'batch': [1, 64], 'prompt_len': [16, 8192]})
        results = sweep(tiny_model(), desk_hw(), runs, max_workers=2, scope='qkv')
        assert [r['index'] for r in results] == [0, 1, 2, 3]
        statuses = [r['status'] for r in results]
        assert statuses[:3] == ['ok', 'ok', 'ok']
        assert statuses[3] == 'error'
        assert 'Kapazität' in results[3]['error']
        assert results[3]['batch'] == 64

    def test_phase_names(self):
        assert PHASES == ('fc', 'attention', 'nonlinear', 'collective')
