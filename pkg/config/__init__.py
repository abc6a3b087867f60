# Config package
from .config import get_config
from .hardware import (
    HardwareConfig, ModelConfig, RunConfig, MappingPolicy, DramTimings, DramPimSpec,
    SramPimSpec, BondSpec, NocSpec, InterconnectSpec, NluSpec,
)
from .loader import ConfigError, load_config, load_config_file, serialize_config
from .models import builtin_model, BUILTIN_MODELS

__all__ = [
    'get_config', 'HardwareConfig', 'ModelConfig', 'RunConfig', 'MappingPolicy',
    'DramTimings', 'DramPimSpec', 'SramPimSpec', 'BondSpec', 'NocSpec', 'InterconnectSpec',
    'NluSpec', 'ConfigError', 'load_config', 'load_config_file', 'serialize_config',
    'builtin_model', 'BUILTIN_MODELS',
]
