#!/usr/bin/env python3
"""
CLI für den CompAir-Simulator
Einzelläufe, Figuren-Sweeps, Kernel-Prüfung und Traces ohne weitere Infrastruktur
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config.config import Config
from config.hardware import HardwareConfig, ModelConfig, RunConfig
from config.loader import ConfigError, load_config, load_config_file, validate
from config.models import builtin_model
from compair.data import ReportWriter
from compair.engine import REPORT_FIELDS, SimulationError, expand_grid, run as simulate, sweep
from compair.engine.figures import FIGURES, reproduce
from compair.kernels import KERNEL_CHECKS, check_kernel, trace_exp

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

TRACE_FIELDS = ['cycle', 'flit', 'x', 'y', 'event']


class UsageError(Exception):
    """Falsche Argumente oder Pfade (Exit-Code 2)"""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out-dir', help='Ausgabeverzeichnis (Standard: COMPAIR_OUT_DIR)')
    common.add_argument('--seed', type=int, help='Seed (Standard: COMPAIR_SEED)')
    common.add_argument('--verbose', '-v', action='store_true', help='Ausführliche Ausgabe')
    common.add_argument('--json-output', action='store_true', help='Ausgabe als JSON für Automatisierung')

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument('--config', help='JSON-Dokument mit hardware/model/run')
    sim.add_argument('--model', help='Eingebautes Modell, z.B. llama2-13b')
    sim.add_argument('--layers', type=int, help='Schichtzahl überschreiben (Desk-Scale)')
    sim.add_argument('--batch', type=int)
    sim.add_argument('--seq', type=int, help='Prompt-Länge')
    sim.add_argument('--gen', type=int, help='Zu erzeugende Tokens')
    sim.add_argument('--phase', choices=['prefill', 'decode'])
    sim.add_argument('--tp', type=int)
    sim.add_argument('--pp', type=int)
    sim.add_argument('--arch-variant', choices=['DRAM_ONLY', 'DRAM_PLUS_CURRY', 'HYBRID_BASE', 'HYBRID_OPT'])
    sim.add_argument('--mapping', choices=['output_split', 'input_split'], help='FC-Split')
    sim.add_argument('--layout', choices=['IN512_OUT8', 'IN256_OUT16'], help='SRAM-Layout')
    sim.add_argument('--fc-target', choices=['dram', 'sram', 'auto'])
    sim.add_argument('--attention-target', choices=['dram', 'sram_gqa'])
    sim.add_argument('--channels', type=int, help='Kanäle pro Gerät')
    sim.add_argument('--devices', type=int, help='Geräte (Standard: tp × pp, falls nötig)')
    sim.add_argument('--scope', choices=['full', 'qkv'], default='full', help='Nur Q/K/V oder ganze Schicht')

    parser = argparse.ArgumentParser(
        description='CompAir Simulator CLI',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Beispiele:
  %(prog)s run --model llama2-7b --batch 32 --layers 2 --channels 2     # Einzellauf
  %(prog)s run --config run.json --arch-variant DRAM_ONLY                # Dokument + Override
  %(prog)s reproduce fig8                                                # Desk-Scale-Sweep
  %(prog)s reproduce fig14 --full --workers 8                            # Veröffentlichte Konfiguration
  %(prog)s kernel-test rope                                              # Kernel gegen Referenz
  %(prog)s trace --out-dir out/trace                                     # Flit-Trace + Paket-Dump
  %(prog)s sweep --model llama2-7b --layers 1 --axis batch=1,8,32        # Eigenes Gitter
        '''
    )
    sub = parser.add_subparsers(dest='command')

    p_run = sub.add_parser('run', parents=[common, sim], help='Einzelnes Experiment')
    p_run.add_argument('--trace', action='store_true', help='DRAM-, SRAM- und Flit-Trace im Debug-Log')

    p_rep = sub.add_parser('reproduce', parents=[common], help='Sweep einer Auswertungsfigur')
    p_rep.add_argument('figure', help=f"Figur: {', '.join(FIGURES)}")
    p_rep.add_argument('--full', action='store_true', help='Veröffentlichte Geräte- und Kanalzahlen')
    p_rep.add_argument('--layers', type=int, help='Schichtzahl überschreiben')
    p_rep.add_argument('--workers', type=int, help='Parallele Simulationen')

    p_kt = sub.add_parser('kernel-test', parents=[common], help='Kernel gegen binary64-Referenz')
    p_kt.add_argument('kernel', help=f"Kernel: {', '.join(sorted(KERNEL_CHECKS))}")

    p_tr = sub.add_parser('trace', parents=[common], help='Flit-Trace und Paketplan des Exponenten')
    p_tr.add_argument('--elements', type=int, default=16, help='Anzahl Eingabewerte')
    p_tr.add_argument('--bank', type=int, default=0, help='Bank für den Paket-Dump')

    p_sw = sub.add_parser('sweep', parents=[common, sim], help='Kartesisches Gitter über Run-Felder')
    p_sw.add_argument('--axis', action='append', default=[], metavar='FELD=W1,W2',
                      help="z.B. batch=1,8,32 oder mapping.fc_split=output_split,input_split")
    p_sw.add_argument('--workers', type=int, help='Parallele Simulationen')
    return parser


def setup_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, Config.LOG_LEVEL, logging.INFO)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


# ---------------------------------------------------------------------------
# Konfiguration aus Dokument + Flags
# ---------------------------------------------------------------------------

def _coerce(raw: str) -> Any:
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_axes(specs: Sequence[str]) -> Dict[str, List[Any]]:
    axes: Dict[str, List[Any]] = {}
    for spec in specs:
        name, sep, values = spec.partition('=')
        if not sep or not name or not values:
            raise UsageError(f"Ungültige Achse '{spec}', erwartet FELD=W1,W2")
        axes[name.strip()] = [_coerce(v.strip()) for v in values.split(',') if v.strip()]
    return axes


def resolve_config(args) -> Tuple[HardwareConfig, ModelConfig, RunConfig]:
    """Dokument laden, Flags anwenden, erneut validieren"""
    if args.config:
        if not os.path.isfile(args.config):
            raise UsageError(f"Konfigurationsdatei nicht gefunden: {args.config}")
        hw, model, run = load_config_file(args.config)
    else:
        hw, model, run = load_config('')

    if args.model:
        try:
            model = builtin_model(args.model)
        except KeyError as e:
            raise UsageError(str(e.args[0]))
    if args.layers is not None:
        model = replace(model, num_layers=args.layers)

    fields = {
        'batch': args.batch, 'prompt_len': args.seq, 'gen_len': args.gen, 'phase': args.phase,
        'tp_degree': args.tp, 'pp_degree': args.pp, 'arch_variant': args.arch_variant,
        'seed': args.seed,
    }
    run = replace(run, **{k: v for k, v in fields.items() if v is not None})
    mapping = {
        'fc_split': args.mapping, 'sram_layout': args.layout, 'fc_target': args.fc_target,
        'attention_target': args.attention_target,
    }
    mapping = {k: v for k, v in mapping.items() if v is not None}
    run = replace(run, mapping=replace(run.mapping, tp_degree=run.tp_degree, pp_degree=run.pp_degree, **mapping))

    if args.channels is not None:
        hw = replace(hw, dram=replace(hw.dram, channels_per_device=args.channels))
    devices = args.devices
    if devices is None and run.tp_degree * run.pp_degree > hw.interconnect.devices:
        devices = run.tp_degree * run.pp_degree
    if devices is not None:
        hw = replace(hw, interconnect=replace(hw.interconnect, devices=devices))

    validate(hw, model, run)
    return hw, model, run


# ---------------------------------------------------------------------------
# Ausgabe
# ---------------------------------------------------------------------------

def print_report(report: Dict[str, Any], verbose: bool = False) -> None:
    print(f"\n📊 {report['model']} · {report['arch_variant']} · {report['phase']} · batch {report['batch']}")
    print("=" * 60)
    print(f"⏱️  Zyklen gesamt:   {report['total_cycles']:,}")
    print(f"   Prefill/Decode:  {report['prefill_cycles']:,} / {report['decode_cycles']:,}")
    print(f"   FC/Attn/NL/Koll: {report['fc_cycles']:,} / {report['attention_cycles']:,} / "
          f"{report['nonlinear_cycles']:,} / {report['collective_cycles']:,}")
    print(f"   Überlappung:     {report['overlap_cycles']:,}")
    print(f"🚀 Tokens/s:        {report['tokens_per_second']:.2f}")
    print(f"⚡ Energie/Token:   {report['energy_per_token_pj'] / 1e6:.3f} µJ")
    print(f"🏦 Auslastung:      {report['bank_utilization']:.1%}")
    print(f"🔍 FC-Engpass:      {report['fc_bottleneck']}")
    if verbose:
        for op, info in sorted(report.get('fc_ops', {}).items()):
            print(f"   {op:<8} {info}")


def print_rows(fields: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
    widths = [max(len(f), 12) for f in fields]
    print("  ".join(f.ljust(w) for f, w in zip(fields, widths)))
    print("-" * (sum(widths) + 2 * len(widths)))
    for row in rows:
        cells = []
        for f, w in zip(fields, widths):
            value = row.get(f, '')
            text = f"{value:.4g}" if isinstance(value, float) else str(value)
            cells.append(text.ljust(w))
        print("  ".join(cells))


def print_kernel_check(check: Dict[str, Any], rows: Sequence, verbose: bool) -> None:
    status = '✅ PASS' if check['passed'] else '❌ FAIL'
    print(f"\n🧮 Kernel {check['name']}: {status}")
    print(f"   max. rel. Fehler: {check['max_rel_err']:.3e} (Toleranz {check['tolerance']:.3e})")
    if check.get('gate'):
        lo, hi = check['gate']
        print(f"   Fehler auf [{lo:g}, {hi:g}]: {check['gated_rel_err']:.3e}")
    bound = f" (Grenze {check['cycle_bound']})" if check['cycle_bound'] is not None else ''
    print(f"   Zyklen: {check['cycles']}, NoC: {check['noc_cycles']}{bound}")
    if verbose:
        print(f"   {'Eingabe':>12} {'Kernel':>12} {'Referenz':>12}")
        for x, got, ref in rows:
            print(f"   {x:>12.5g} {got:>12.5g} {ref:>12.5g}")


# ---------------------------------------------------------------------------
# Kommandos
# ---------------------------------------------------------------------------

def cmd_run(args, writer: ReportWriter) -> int:
    hw, model, run = resolve_config(args)
    if args.trace:
        logging.getLogger('compair').setLevel(logging.DEBUG)
    report = simulate(model, run, hw, scope=args.scope).to_dict()
    paths = writer.write_report(report)
    if args.json_output:
        print(json.dumps({'report': report, 'files': paths}, indent=2, ensure_ascii=False))
    else:
        print_report(report, args.verbose)
        print(f"\n💾 Geschrieben: {', '.join(paths)}")
    return EXIT_OK


def cmd_reproduce(args, writer: ReportWriter) -> int:
    seed = Config.SEED if args.seed is None else args.seed
    try:
        result = reproduce(args.figure, full=args.full, layers=args.layers, workers=args.workers, seed=seed)
    except KeyError as e:
        raise UsageError(str(e.args[0]))
    csv_path = writer.write_csv(f'{result.figure}.csv', result.rows, result.fields)
    writer.write_json(f'{result.figure}.json', result.to_dict())
    if args.json_output:
        print(json.dumps({**result.to_dict(), 'file': csv_path}, indent=2, ensure_ascii=False))
    else:
        print(f"\n📈 {result.figure}: {FIGURES[result.figure].__doc__}")
        print(f"   Erwartet: {result.expected}\n")
        print_rows(result.fields, result.rows)
        if result.meta:
            print(f"\n   {result.meta}")
        print(f"\n💾 Geschrieben: {csv_path}")
    if result.failed:
        if not args.json_output:
            print(f"❌ {result.failed} Gitterpunkte fehlgeschlagen")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_kernel_test(args, writer: ReportWriter) -> int:
    seed = Config.SEED if args.seed is None else args.seed
    try:
        check = check_kernel(args.kernel, seed=seed)
    except KeyError as e:
        raise UsageError(str(e.args[0]))
    data = check.to_dict()
    if args.json_output:
        print(json.dumps({**data, 'rows': check.rows}, indent=2))
    else:
        print_kernel_check(data, check.rows, args.verbose)
    return EXIT_OK if check.passed else EXIT_FAILURE


def cmd_trace(args, writer: ReportWriter) -> int:
    if args.elements < 1:
        raise UsageError("--elements muss mindestens 1 sein")
    xs = [4.0 * i / args.elements for i in range(args.elements)]
    traced = trace_exp(xs)
    rows = [{'cycle': c, 'flit': fid, 'x': coord[0], 'y': coord[1], 'event': event}
            for c, fid, coord, event in traced.flits]
    trace_path = writer.write_csv('flit_trace.csv', rows, TRACE_FIELDS)
    dump = b''.join(s.dump(args.bank) for s in traced.schedules)
    dump_path = writer.path(f'schedule_bank{args.bank}.bin')
    tmp = f'{dump_path}.tmp'
    with open(tmp, 'wb') as f:
        f.write(dump)
    os.replace(tmp, dump_path)
    summary = {'flits': len(rows), 'cycles': traced.result.cycles, 'packet_bytes': len(dump),
               'files': [trace_path, dump_path]}
    if args.json_output:
        print(json.dumps(summary, indent=2))
    else:
        print(f"\n🔬 Exponent über {args.elements} Werte: {traced.result.cycles} Zyklen, {len(rows)} Trace-Einträge")
        print(f"📦 Paketplan Bank {args.bank}: {len(dump)} Bytes")
        print(f"💾 Geschrieben: {trace_path}, {dump_path}")
    return EXIT_OK


def cmd_sweep(args, writer: ReportWriter) -> int:
    hw, model, base = resolve_config(args)
    axes = parse_axes(args.axis)
    runs = expand_grid(base, axes) if axes else [base]
    for run in runs:
        needed = run.tp_degree * run.pp_degree
        if needed > hw.interconnect.devices:
            hw = replace(hw, interconnect=replace(hw.interconnect, devices=needed))
    results = sweep(model, hw, runs, max_workers=args.workers, scope=args.scope)
    fields = list(REPORT_FIELDS) + ['error']
    path = writer.write_csv('sweep.csv', results, fields)
    failed = sum(1 for r in results if r.get('status') != 'ok')
    if args.json_output:
        print(json.dumps({'results': results, 'file': path, 'failed': failed}, indent=2, ensure_ascii=False))
    else:
        print(f"\n🔄 Sweep über {len(runs)} Punkte ({', '.join(axes) or 'keine Achsen'})\n")
        print_rows(['batch', 'arch_variant', 'tp_degree', 'total_cycles', 'tokens_per_second', 'status'], results)
        print(f"\n💾 Geschrieben: {path}")
        if failed:
            print(f"❌ {failed} Punkte fehlgeschlagen")
    return EXIT_FAILURE if failed else EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'reproduce': cmd_reproduce,
    'kernel-test': cmd_kernel_test,
    'trace': cmd_trace,
    'sweep': cmd_sweep,
}


def _fail(args, message: str, code: int) -> int:
    if getattr(args, 'json_output', False):
        print(json.dumps({'error': message}))
    else:
        print(f"❌ Fehler: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    setup_logging(args.verbose)
    writer = ReportWriter(args.out_dir or Config.OUT_DIR)

    try:
        return COMMANDS[args.command](args, writer)
    except (UsageError, ConfigError) as e:
        return _fail(args, str(e), EXIT_USAGE)
    except OSError as e:
        path = e.filename or ''
        return _fail(args, f"{path}: {e.strerror or e}" if path else str(e), EXIT_USAGE)
    except SimulationError as e:
        return _fail(args, str(e), EXIT_FAILURE)
    except Exception as e:
        if args.verbose:
            logging.getLogger(__name__).exception("Unerwarteter Fehler")
        return _fail(args, str(e), EXIT_FAILURE)


if __name__ == '__main__':
    sys.exit(main())
