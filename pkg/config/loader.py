"""
Laden, Validieren und Serialisieren von Simulationsdokumenten

Ein Dokument ist ein JSON-Baum mit den optionalen Abschnitten
``hardware``, ``model`` und ``run``. Fehlende Felder werden mit den
Standardwerten der Referenz-Hardware gefüllt. Jeder skalare Wert kann per
Umgebungsvariable ``COMPAIR_<ABSCHNITT>_<PFAD>`` überschrieben werden.
"""

import dataclasses
import json
import logging
import os
import typing
from typing import Any, Dict, Mapping, Optional, Tuple

from jsonschema import Draft7Validator

from .hardware import (
    VOLTAGE_POINTS, HardwareConfig, ModelConfig, RunConfig,
)
from .models import BUILTIN_MODELS
from .schema import DOCUMENT_SCHEMA

logger = logging.getLogger(__name__)

ENV_PREFIX = 'COMPAIR_'
SECTIONS = ('hardware', 'model', 'run')


class ConfigError(ValueError):
    """Fehler beim Laden einer Konfiguration (Parse- oder Bereichsfehler)"""

    def __init__(self, message: str, field: Optional[str] = None, bound: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.bound = bound
        self.line = line
        self.column = column


# Geschlossene Wertebereiche: Pfad -> (min, max); None = offen
RANGES: Dict[str, Tuple[Optional[float], Optional[float]]] = {
    'hardware.dram.timings.t_rcdwr': (1e-9, None),
    'hardware.dram.timings.t_rcdrd': (1e-9, None),
    'hardware.dram.timings.t_ras': (1e-9, None),
    'hardware.dram.timings.t_cl': (1e-9, None),
    'hardware.dram.timings.t_rp': (1e-9, None),
    'hardware.dram.timings.clock_period': (1e-9, None),
    'hardware.dram.timings.t_ccd': (1e-9, None),
    'hardware.dram.channels_per_device': (1, None),
    'hardware.dram.banks_per_channel': (1, 64),
    'hardware.dram.bank_capacity': (1, None),
    'hardware.dram.macs_per_bank': (1, None),
    'hardware.dram.row_width': (32, None),
    'hardware.dram.internal_bandwidth_per_bank': (1e-9, None),
    'hardware.dram.global_buffer_bytes_per_cycle': (1, None),
    'hardware.dram.e_act_pj': (0, None),
    'hardware.dram.e_pre_pj': (0, None),
    'hardware.dram.e_rd_pj': (0, None),
    'hardware.dram.e_wr_pj': (0, None),
    'hardware.dram.e_mac_pj': (0, None),
    'hardware.dram.e_gb_pj_per_byte': (0, None),
    'hardware.sram.macros_per_bank': (4, 4),
    'hardware.sram.macro_inputs': (1, None),
    'hardware.sram.macro_outputs': (1, None),
    'hardware.sram.macro_capacity': (1, None),
    'hardware.sram.access_time': (6.8, 14.1),
    'hardware.sram.tops_per_watt': (14.4, 31.6),
    'hardware.bond.bonds_per_bank': (1, None),
    'hardware.bond.bits_per_second_per_bond': (1e-9, None),
    'hardware.bond.energy_per_bit': (0.05, 0.88),
    'hardware.noc.mesh_x': (1, 16),
    'hardware.noc.mesh_y': (1, 16),
    'hardware.noc.alus_per_router': (1, 2),
    'hardware.noc.flit_bits': (72, 72),
    'hardware.noc.router_delay_cycles': (1, 2),
    'hardware.noc.clock_period': (1e-9, None),
    'hardware.noc.queue_depth': (1, None),
    'hardware.noc.io_cycles': (0, None),
    'hardware.noc.energy_pj_per_bit': (0, None),
    'hardware.interconnect.devices': (1, None),
    'hardware.interconnect.collective_bandwidth': (1e-9, None),
    'hardware.interconnect.p2p_bandwidth': (1e-9, None),
    'hardware.interconnect.link_latency': (0, None),
    'hardware.interconnect.energy_pj_per_bit': (0, None),
    'hardware.nlu.cycles_per_element': (1e-9, None),
    'hardware.nlu.softmax_passes': (1, None),
    'model.hidden_size': (1, None),
    'model.num_layers': (1, None),
    'model.num_heads': (1, None),
    'model.kv_heads': (1, None),
    'model.head_dim': (2, None),
    'model.ffn_intermediate': (1, None),
    'run.batch': (1, None),
    'run.prompt_len': (1, None),
    'run.gen_len': (0, None),
    'run.tp_degree': (1, None),
    'run.pp_degree': (1, None),
    'run.seed': (0, None),
    'run.decode_window': (1, None),
}

_VALIDATOR = Draft7Validator(DOCUMENT_SCHEMA)


def _parse_document(text: str) -> Dict[str, Any]:
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Parse-Fehler in Zeile {e.lineno}, Spalte {e.colno}: {e.msg}",
                          line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ConfigError("Dokument muss ein Objekt mit den Abschnitten hardware/model/run sein")
    return data


def _coerce_env_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _scalar_paths(cls, prefix: Tuple[str, ...] = ()) -> Dict[str, Tuple[str, ...]]:
    """ENV-Suffix -> Feldpfad für alle skalaren Felder einer Dataclass"""
    hints = typing.get_type_hints(cls)
    paths = {}
    for f in dataclasses.fields(cls):
        path = prefix + (f.name,)
        if dataclasses.is_dataclass(hints[f.name]):
            paths.update(_scalar_paths(hints[f.name], path))
        else:
            paths['_'.join(path).upper()] = path
    return paths


_ENV_PATHS = {
    section: _scalar_paths(cls)
    for section, cls in (('hardware', HardwareConfig), ('model', ModelConfig), ('run', RunConfig))
}


def apply_env_overrides(data: Dict[str, Any], env: Mapping[str, str]) -> Dict[str, Any]:
    """Übernimmt COMPAIR_<ABSCHNITT>_<PFAD>-Variablen in das Dokument"""
    for section, paths in _ENV_PATHS.items():
        for suffix, path in paths.items():
            key = f"{ENV_PREFIX}{section.upper()}_{suffix}"
            if key not in env:
                continue
            node = data.setdefault(section, {})
            for part in path[:-1]:
                node = node.setdefault(part, {})
            node[path[-1]] = _coerce_env_value(env[key])
            logger.debug(f"ENV-Override {key}={env[key]}")
    return data


def _build(cls, values: Mapping[str, Any], base=None):
    """Baut eine (verschachtelte) Dataclass aus einem Dict, fehlende Felder = Default"""
    hints = typing.get_type_hints(cls)
    base = base if base is not None else cls()
    kwargs = {}
    for f in dataclasses.fields(cls):
        current = getattr(base, f.name)
        if f.name not in values:
            kwargs[f.name] = current
            continue
        ftype = hints[f.name]
        raw = values[f.name]
        if dataclasses.is_dataclass(ftype):
            kwargs[f.name] = _build(ftype, raw, current)
        elif ftype is int:
            kwargs[f.name] = int(raw)
        elif ftype is float:
            kwargs[f.name] = float(raw)
        else:
            kwargs[f.name] = raw
    return cls(**kwargs)


def _get_path(obj, path: str):
    for part in path.split('.')[1:]:
        obj = getattr(obj, part)
    return obj


def _check_ranges(hw: HardwareConfig, model: ModelConfig, run: RunConfig):
    roots = {'hardware': hw, 'model': model, 'run': run}
    for path, (lo, hi) in RANGES.items():
        value = _get_path(roots[path.split('.')[0]], path)
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            bound = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
            raise ConfigError(f"{path}={value} liegt außerhalb von {bound}", field=path, bound=bound)


def validate(hw: HardwareConfig, model: ModelConfig, run: RunConfig):
    """Prüft alle Invarianten; wirft ConfigError mit Feldname und Grenze"""
    _check_ranges(hw, model, run)

    if hw.dram.readout_bytes_per_access not in (32, 128):
        raise ConfigError("hardware.dram.readout_bytes_per_access muss 32 oder 128 sein",
                          field='hardware.dram.readout_bytes_per_access', bound='{32, 128}')
    if hw.dram.row_width % hw.dram.column_access_bytes:
        raise ConfigError("hardware.dram.row_width muss ein Vielfaches der Spaltenbreite sein",
                          field='hardware.dram.row_width',
                          bound=f"multiple of {hw.dram.column_access_bytes}")
    if hw.noc.routers != 64:
        raise ConfigError(f"mesh_x × mesh_y = {hw.noc.routers}, erwartet 64 Router pro Kanal",
                          field='hardware.noc.mesh_x', bound='mesh_x*mesh_y == 64')
    if hw.noc.routers % hw.dram.banks_per_channel:
        raise ConfigError("Router pro Kanal müssen sich gleichmäßig auf die Banks verteilen",
                          field='hardware.dram.banks_per_channel', bound='divides 64')
    if model.hidden_size != model.num_heads * model.head_dim:
        raise ConfigError("model.hidden_size muss num_heads × head_dim sein",
                          field='model.hidden_size', bound=f"== {model.num_heads * model.head_dim}")
    if model.num_heads % model.kv_heads:
        raise ConfigError("model.kv_heads muss num_heads teilen",
                          field='model.kv_heads', bound=f"divides {model.num_heads}")
    if model.attention_kind == 'MHA' and model.kv_heads != model.num_heads:
        raise ConfigError("MHA verlangt kv_heads == num_heads",
                          field='model.kv_heads', bound=f"== {model.num_heads}")
    if run.tp_degree * run.pp_degree > hw.interconnect.devices:
        raise ConfigError(
            f"tp_degree × pp_degree = {run.tp_degree * run.pp_degree} > devices "
            f"{hw.interconnect.devices}",
            field='run.tp_degree', bound=f"tp*pp <= {hw.interconnect.devices}")
    if (run.mapping.tp_degree, run.mapping.pp_degree) != (run.tp_degree, run.pp_degree):
        raise ConfigError("run.mapping tp/pp müssen run.tp_degree/pp_degree entsprechen",
                          field='run.mapping.tp_degree', bound=f"== {run.tp_degree}")
    if run.mapping.attention_target == 'sram_gqa' and model.attention_kind != 'GQA':
        raise ConfigError("attention_target 'sram_gqa' nur für GQA-Modelle",
                          field='run.mapping.attention_target', bound="attention_kind == GQA")
    if run.mapping.fc_split == 'input_split' and run.arch_variant == 'DRAM_ONLY':
        raise ConfigError("input_split benötigt NoC-Reduce (nicht in DRAM_ONLY)",
                          field='run.mapping.fc_split', bound="arch_variant != DRAM_ONLY")
    if run.mapping.fc_target == 'sram' and run.arch_variant in ('DRAM_ONLY', 'DRAM_PLUS_CURRY'):
        raise ConfigError(f"fc_target 'sram' ohne SRAM-PIM ({run.arch_variant})",
                          field='run.mapping.fc_target', bound="arch_variant in HYBRID_*")


def _model_from_section(section: Mapping[str, Any]) -> ModelConfig:
    name = section.get('name', 'llama2-7b')
    base = BUILTIN_MODELS.get(str(name).lower(), ModelConfig(name=name))
    return _build(ModelConfig, section, base)


def _hardware_from_section(section: Mapping[str, Any]) -> HardwareConfig:
    sram = section.get('sram', {})
    if sram.get('voltage_mode') == 'low':
        # Endpunkte der Spannung füllen, sofern nicht explizit gesetzt
        access, tops = VOLTAGE_POINTS['low']
        section = dict(section)
        section['sram'] = {'access_time': access, 'tops_per_watt': tops, **sram}
    return _build(HardwareConfig, section)


def _run_from_section(section: Mapping[str, Any]) -> RunConfig:
    section = dict(section)
    mapping = dict(section.get('mapping', {}))
    mapping.setdefault('tp_degree', section.get('tp_degree', 1))
    mapping.setdefault('pp_degree', section.get('pp_degree', 1))
    section['mapping'] = mapping
    return _build(RunConfig, section)


def load_config(text: str, env: Optional[Mapping[str, str]] = None
                ) -> Tuple[HardwareConfig, ModelConfig, RunConfig]:
    """
    Parst ein Konfigurationsdokument

    Args:
        text: JSON-Dokument (leer = alle Standardwerte)
        env: Umgebung für Overrides (Standard: os.environ)

    Returns:
        (HardwareConfig, ModelConfig, RunConfig)
    """
    data = _parse_document(text)
    data = apply_env_overrides(data, os.environ if env is None else env)

    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        path = '.'.join(str(p) for p in err.path) or '<root>'
        raise ConfigError(f"Ungültiges Feld '{path}': {err.message}", field=path,
                          bound=str(err.validator_value) if err.validator != 'additionalProperties'
                          else 'known keys only')

    hw = _hardware_from_section(data.get('hardware', {}))
    model = _model_from_section(data.get('model', {}))
    run = _run_from_section(data.get('run', {}))
    validate(hw, model, run)
    logger.debug(f"Konfiguration geladen: {model.name}, {run.arch_variant}, batch={run.batch}")
    return hw, model, run


def load_config_file(path: str, env: Optional[Mapping[str, str]] = None
                     ) -> Tuple[HardwareConfig, ModelConfig, RunConfig]:
    with open(path, 'r', encoding='utf-8') as f:
        return load_config(f.read(), env)


def to_document(hw: HardwareConfig, model: ModelConfig, run: RunConfig) -> Dict[str, Any]:
    return {
        'hardware': dataclasses.asdict(hw),
        'model': dataclasses.asdict(model),
        'run': dataclasses.asdict(run),
    }


def serialize_config(hw: HardwareConfig, model: ModelConfig, run: RunConfig) -> str:
    """Inverse von load_config: ergibt ein Dokument, das zu gleichen Strukturen parst"""
    return json.dumps(to_document(hw, model, run), indent=2, ensure_ascii=False)
