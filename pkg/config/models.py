"""
Eingebaute LLM-Formen (nur Shapes, keine Gewichte)
"""

from dataclasses import replace
from typing import Dict

from .hardware import ModelConfig

BUILTIN_MODELS: Dict[str, ModelConfig] = {
    'llama2-7b': ModelConfig(
        name='llama2-7b', hidden_size=4096, num_layers=32, num_heads=32, kv_heads=32,
        head_dim=128, ffn_intermediate=11008, attention_kind='MHA'),
    'llama2-13b': ModelConfig(
        name='llama2-13b', hidden_size=5120, num_layers=40, num_heads=40, kv_heads=40,
        head_dim=128, ffn_intermediate=13824, attention_kind='MHA'),
    'llama2-70b': ModelConfig(
        name='llama2-70b', hidden_size=8192, num_layers=80, num_heads=64, kv_heads=8,
        head_dim=128, ffn_intermediate=28672, attention_kind='GQA'),
    'qwen-72b': ModelConfig(
        name='qwen-72b', hidden_size=8192, num_layers=80, num_heads=64, kv_heads=64,
        head_dim=128, ffn_intermediate=24576, attention_kind='MHA'),
    'gpt3-175b': ModelConfig(
        name='gpt3-175b', hidden_size=12288, num_layers=96, num_heads=96, kv_heads=96,
        head_dim=128, ffn_intermediate=49152, attention_kind='MHA', gated_ffn=False),
}


def builtin_model(name: str, **overrides) -> ModelConfig:
    """
    Liefert die veröffentlichte Form eines Modells

    Args:
        name: Modellname, z.B. 'llama2-13b'
        overrides: einzelne Felder überschreiben (z.B. num_layers=1 für Desk-Scale)
    """
    key = name.lower()
    if key not in BUILTIN_MODELS:
        available = ', '.join(sorted(BUILTIN_MODELS))
        raise KeyError(f"Unbekanntes Modell '{name}'. Verfügbar: {available}")
    model = BUILTIN_MODELS[key]
    return replace(model, **overrides) if overrides else model
