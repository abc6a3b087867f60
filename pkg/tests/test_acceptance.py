"""
Modulübergreifende Abnahme auf Desk-Scale

Figuren laufen mit reduzierten Kanal-, Geräte- und Schichtzahlen; geprüft
werden Trends und Schranken, keine absoluten Durchsatzwerte.
"""

import pytest

from config.hardware import DramPimSpec, HardwareConfig, InterconnectSpec, MappingPolicy, RunConfig
from config.models import builtin_model
from compair.engine import ENERGY_COMPONENTS, PHASES, expand_grid, run, sweep
from compair.engine.figures import ABLATION, reproduce, scaled_hardware


def figure(name):
    result = reproduce(name, workers=2)
    assert result.failed == 0, result.to_dict()
    return result


class TestFigures:
    def test_qkv_speedup_at_batch_32(self):
        rows = {r['batch']: r for r in figure('fig5').rows}
        assert rows[32]['speedup'] == pytest.approx(6.3, rel=0.3)
        assert rows[1]['speedup'] < 1.0
        speedups = [rows[b]['speedup'] for b in sorted(rows)]
        assert speedups == sorted(speedups)

    def test_auto_target_keeps_batch_one_in_dram(self):
        hw = HardwareConfig(dram=DramPimSpec(channels_per_device=2), interconnect=InterconnectSpec(devices=1))
        run_cfg = RunConfig(gen_len=1, arch_variant='HYBRID_BASE')
        report = run(builtin_model('llama2-7b', num_layers=1), run_cfg, hw, scope='qkv')
        assert report.energy_sram_pj == 0.0

    def test_column_decoder_speedup(self):
        result = figure('fig8')
        assert result.rows
        assert all(1.0 <= r['speedup'] <= 2.0 for r in result.rows)

    def test_tp_lowers_bank_utilization(self):
        rows = figure('fig15').rows
        utilization = [r['bank_utilization'] for r in sorted(rows, key=lambda r: r['tp_degree'])]
        assert utilization == sorted(utilization, reverse=True)

    def test_wide_output_layout_wins(self):
        rows = figure('fig16').rows
        base = next(r for r in rows if (r['sram_layout'], r['fc_split']) == ('IN512_OUT8', 'output_split'))
        wide = [r['fc_cycles'] for r in rows if r['sram_layout'] == 'IN256_OUT16']
        assert min(wide) < base['fc_cycles']

    def test_path_fusion_gain(self):
        rows = {r['kernel']: r for r in figure('fig19').rows}
        assert 0.33 <= rows['exp']['reduction'] <= 0.50
        assert rows['softmax']['fused_cycles'] < rows['softmax']['unfused_cycles']


class TestDeterminism:
    def desk(self):
        hw = HardwareConfig(dram=DramPimSpec(channels_per_device=2), interconnect=InterconnectSpec(devices=2))
        base = RunConfig(prompt_len=32, gen_len=3, seed=7, mapping=MappingPolicy())
        runs = expand_grid(base, {'batch': [1, 8], 'tp_degree': [1, 2]})
        return builtin_model('llama2-7b', num_layers=2), hw, runs

    def test_repeated_sweep_is_identical(self):
        model, hw, runs = self.desk()
        first = sweep(model, hw, runs, max_workers=2)
        second = sweep(model, hw, runs, max_workers=1)
        assert first == second

    def test_invariants_hold_on_every_point(self):
        model, hw, runs = self.desk()
        for row in sweep(model, hw, runs, max_workers=2):
            assert row['status'] == 'ok'
            busy = sum(row[f'{p}_cycles'] for p in PHASES)
            assert busy - row['overlap_cycles'] == row['total_cycles']
            assert 0 <= row['overlap_cycles'] <= busy
            energy = [row[f'energy_{c}_pj'] for c in ENERGY_COMPONENTS]
            assert all(e >= 0 for e in energy)
            assert sum(energy) == pytest.approx(row['energy_total_pj'])


class TestEndToEnd:
    BATCHES = [1, 4, 8, 16, 32]

    @pytest.fixture(scope='class')
    def batch_rows(self):
        hw = scaled_hardware(channels=2, devices=1)
        base = RunConfig(gen_len=2, mapping=MappingPolicy())
        runs = expand_grid(base, {'arch_variant': ['DRAM_ONLY', 'HYBRID_BASE'], 'batch': self.BATCHES})
        rows = sweep(builtin_model('llama2-7b', num_layers=1), hw, runs, max_workers=2)
        assert all(r['status'] == 'ok' for r in rows), rows
        return {(r['arch_variant'], r['batch']): r['total_cycles'] for r in rows}

    def speedups(self, rows):
        return [rows[('DRAM_ONLY', b)] / rows[('HYBRID_BASE', b)] for b in self.BATCHES]

    def test_batch_one_is_a_wash(self, batch_rows):
        # FC bleibt bei batch 1 im DRAM, der Spaltendecoder bleibt schmal
        assert self.speedups(batch_rows)[0] == pytest.approx(1.0, abs=0.15)

    def test_batch_32_at_least_double(self, batch_rows):
        assert self.speedups(batch_rows)[-1] >= 2.0

    def test_speedup_monotone_in_batch(self, batch_rows):
        speedups = self.speedups(batch_rows)
        assert speedups == sorted(speedups)

    def test_ablation_ordering(self):
        hw = scaled_hardware(channels=16, devices=1)
        base = RunConfig(batch=32, prompt_len=4096, gen_len=2, mapping=MappingPolicy())
        runs = expand_grid(base, {'arch_variant': list(ABLATION)})
        rows = sweep(builtin_model('llama2-7b', num_layers=1), hw, runs, max_workers=2)
        assert all(r['status'] == 'ok' for r in rows), rows
        cycles = {r['arch_variant']: r['total_cycles'] for r in rows}
        ordered = [cycles[arch] for arch in ABLATION]
        assert ordered == sorted(ordered, reverse=True)
        assert ordered[0] > ordered[-1]
