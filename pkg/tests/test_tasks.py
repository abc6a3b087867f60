import os

from config.hardware import DramPimSpec, HardwareConfig, InterconnectSpec, RunConfig
from config.loader import serialize_config
from config.models import builtin_model
from compair.data import ReportWriter
from compair.engine import REPORT_FIELDS, run
from compair.tasks import run_point, run_sweep, simulate_point


def desk_point(batch=1, prompt_len=16):
    hw = HardwareConfig(dram=DramPimSpec(channels_per_device=2), interconnect=InterconnectSpec(devices=1))
    return builtin_model('llama2-7b', num_layers=1), RunConfig(batch=batch, prompt_len=prompt_len, gen_len=2), hw


class TestSweepTasks:
    def test_run_point_adds_index(self):
        result = run_point(3, *desk_point(), scope='qkv')
        assert result['index'] == 3
        assert result['status'] == 'ok'

    def test_run_point_records_failure(self):
        result = run_point(0, *desk_point(batch=64, prompt_len=8192))
        assert result['status'] == 'error'
        assert result['diagnostic']['shortfall_bytes'] > 0
        assert (result['model'], result['batch']) == ('llama2-7b', 64)

    def test_document_point_matches_direct_run(self):
        model, run_cfg, hw = desk_point()
        result = simulate_point(serialize_config(hw, model, run_cfg), index=1, scope='qkv')
        direct = run(model, run_cfg, hw, scope='qkv').to_dict()
        assert result.pop('index') == 1
        assert result == direct

    def test_empty_sweep(self):
        assert run_sweep([]) == []

    def test_local_threads(self):
        points = [desk_point(batch=b) for b in (4, 1, 2)]
        results = run_sweep(points, max_workers=3, scope='qkv', use_celery=False)
        assert [(r['index'], r['batch']) for r in results] == [(0, 4), (1, 1), (2, 2)]


class TestReportWriter:
    def test_json_roundtrip(self, tmp_path):
        writer = ReportWriter(str(tmp_path))
        path = writer.write_json('plan.json', {'banks': 512, 'name': 'Bänke'})
        assert writer.read_json('plan.json') == {'banks': 512, 'name': 'Bänke'}
        assert not os.path.exists(f'{path}.tmp')

    def test_report_files(self, tmp_path):
        writer = ReportWriter(str(tmp_path))
        report = run_point(0, *desk_point(), scope='qkv')
        paths = writer.write_report(report)
        assert [os.path.basename(p) for p in paths] == ['report.json', 'report.csv']
        header = (tmp_path / 'report.csv').read_text().splitlines()[0]
        assert header == ','.join(REPORT_FIELDS)

    def test_out_dir_from_environment(self, out_dir):
        writer = ReportWriter()
        assert writer.out_dir == str(out_dir)
        assert writer.path('x.csv') == os.path.join(str(out_dir), 'x.csv')
