import csv
import json

import pytest

from compair_cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, UsageError, main, parse_axes

DESK = ['--model', 'llama2-7b', '--layers', '1', '--channels', '2', '--seq', '16', '--gen', '2']


def cli(tmp_path, *argv):
    return main([*argv, '--out-dir', str(tmp_path)])


class TestRun:
    def test_writes_report(self, tmp_path, capsys):
        assert cli(tmp_path, 'run', *DESK, '--scope', 'qkv') == EXIT_OK
        report = json.loads((tmp_path / 'report.json').read_text())
        assert report['status'] == 'ok'
        assert report['fc_cycles'] == report['total_cycles'] > 0
        with open(tmp_path / 'report.csv', newline='') as f:
            [row] = list(csv.DictReader(f))
        assert row['model'] == 'llama2-7b'
        assert 'Zyklen gesamt' in capsys.readouterr().out

    def test_json_output(self, tmp_path, capsys):
        assert cli(tmp_path, 'run', *DESK, '--scope', 'qkv', '--json-output') == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data['report']['batch'] == 1
        assert len(data['files']) == 2

    def test_missing_config_file(self, tmp_path, capsys):
        missing = tmp_path / 'nope.json'
        assert cli(tmp_path, 'run', '--config', str(missing)) == EXIT_USAGE
        assert str(missing) in capsys.readouterr().err

    def test_broken_config_file(self, tmp_path, capsys):
        doc = tmp_path / 'run.json'
        doc.write_text('{"hardware": ')
        assert cli(tmp_path, 'run', '--config', str(doc), '--json-output') == EXIT_USAGE
        assert 'Parse-Fehler' in json.loads(capsys.readouterr().out)['error']

    def test_unknown_model(self, tmp_path):
        assert cli(tmp_path, 'run', '--model', 'gpt-9') == EXIT_USAGE

    def test_capacity_failure(self, tmp_path, capsys):
        argv = ['--model', 'llama2-7b', '--layers', '1', '--channels', '2',
                '--batch', '64', '--seq', '8192', '--gen', '2']
        assert cli(tmp_path, 'run', *argv) == EXIT_FAILURE
        assert 'Kapazität' in capsys.readouterr().err

    def test_devices_follow_parallelism(self, tmp_path, capsys):
        assert cli(tmp_path, 'run', *DESK, '--tp', '2', '--json-output') == EXIT_OK
        report = json.loads(capsys.readouterr().out)['report']
        assert report['tp_degree'] == 2
        assert report['collective_cycles'] > 0

    def test_no_command(self, capsys):
        assert main([]) == EXIT_USAGE


class TestReproduce:
    def test_unknown_figure(self, tmp_path, capsys):
        assert cli(tmp_path, 'reproduce', 'fig99') == EXIT_USAGE
        assert 'fig5' in capsys.readouterr().err

    def test_fusion_figure(self, tmp_path):
        assert cli(tmp_path, 'reproduce', 'fig19') == EXIT_OK
        data = json.loads((tmp_path / 'fig19.json').read_text())
        assert [r['kernel'] for r in data['rows']] == ['exp', 'softmax']
        assert (tmp_path / 'fig19.csv').exists()


class TestKernelTest:
    def test_exp(self, tmp_path, capsys):
        assert cli(tmp_path, 'kernel-test', 'exp', '--json-output') == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data['passed']
        assert data['rows']

    def test_unknown_kernel(self, tmp_path):
        assert cli(tmp_path, 'kernel-test', 'gelu') == EXIT_USAGE


class TestTrace:
    def test_writes_trace_and_schedule(self, tmp_path):
        assert cli(tmp_path, 'trace', '--elements', '4') == EXIT_OK
        with open(tmp_path / 'flit_trace.csv', newline='') as f:
            rows = list(csv.DictReader(f))
        assert rows and set(rows[0]) == {'cycle', 'flit', 'x', 'y', 'event'}
        dump = (tmp_path / 'schedule_bank0.bin').read_bytes()
        assert dump and len(dump) % 12 == 0

    def test_needs_elements(self, tmp_path):
        assert cli(tmp_path, 'trace', '--elements', '0') == EXIT_USAGE


class TestSweep:
    def test_grid(self, tmp_path, capsys):
        argv = ['sweep', *DESK, '--scope', 'qkv', '--axis', 'batch=1,2', '--workers', '1', '--json-output']
        assert cli(tmp_path, *argv) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert [r['batch'] for r in data['results']] == [1, 2]
        assert data['failed'] == 0
        with open(tmp_path / 'sweep.csv', newline='') as f:
            assert len(list(csv.DictReader(f))) == 2

    def test_bad_axis(self, tmp_path):
        assert cli(tmp_path, 'sweep', *DESK, '--axis', 'batch') == EXIT_USAGE


class TestParseAxes:
    def test_values_are_coerced(self):
        assert parse_axes(['batch=1,8', 'mapping.fc_split=output_split', 'x=0.5']) == {
            'batch': [1, 8], 'mapping.fc_split': ['output_split'], 'x': [0.5]}

    @pytest.mark.parametrize('spec', ['batch', '=1,2', 'batch='])
    def test_rejects(self, spec):
        with pytest.raises(UsageError):
            parse_axes([spec])
