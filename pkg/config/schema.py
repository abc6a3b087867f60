"""
JSON-Schema für Konfigurationsdokumente, abgeleitet aus den Deskriptor-Dataclasses
"""

import dataclasses
import typing
from typing import Any, Dict

from .hardware import (
    ARCH_VARIANTS, SRAM_LAYOUTS, HardwareConfig, ModelConfig, RunConfig,
)

# Aufzählungsfelder: Feldname -> erlaubte Werte
ENUMS: Dict[str, tuple] = {
    'voltage_mode': ('high', 'low'),
    'layout': SRAM_LAYOUTS,
    'sram_layout': SRAM_LAYOUTS,
    'routing': ('DOR',),
    'attention_kind': ('MHA', 'GQA'),
    'precision': ('BF16',),
    'phase': ('prefill', 'decode'),
    'arch_variant': ARCH_VARIANTS,
    'fc_split': ('output_split', 'input_split'),
    'fc_target': ('dram', 'sram', 'auto'),
    'attention_target': ('dram', 'sram_gqa'),
    'accumulate': ('binary32', 'bf16'),
}

_JSON_TYPES = {
    bool: {'type': 'boolean'},
    int: {'type': 'integer'},
    float: {'type': 'number'},
    str: {'type': 'string'},
}


def dataclass_schema(cls) -> Dict[str, Any]:
    """Erzeugt ein geschlossenes Objekt-Schema (unbekannte Schlüssel verboten)"""
    hints = typing.get_type_hints(cls)
    properties = {}
    for f in dataclasses.fields(cls):
        ftype = hints[f.name]
        if dataclasses.is_dataclass(ftype):
            properties[f.name] = dataclass_schema(ftype)
        elif f.name in ENUMS:
            properties[f.name] = {'type': 'string', 'enum': list(ENUMS[f.name])}
        else:
            properties[f.name] = dict(_JSON_TYPES[ftype])
    return {
        'type': 'object',
        'properties': properties,
        'additionalProperties': False,
    }


def document_schema() -> Dict[str, Any]:
    return {
        '$schema': 'http://json-schema.org/draft-07/schema#',
        'type': 'object',
        'properties': {
            'hardware': dataclass_schema(HardwareConfig),
            'model': dataclass_schema(ModelConfig),
            'run': dataclass_schema(RunConfig),
        },
        'additionalProperties': False,
    }


DOCUMENT_SCHEMA = document_schema()
