"""
SimReport mit stabilen Feldnamen für JSON und CSV
"""

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

# Reihenfolge = CSV-Spaltenreihenfolge; Änderungen brechen Golden-Header-Tests
REPORT_FIELDS = (
    'model', 'arch_variant', 'phase', 'batch', 'prompt_len', 'gen_len', 'tp_degree', 'pp_degree',
    'fc_split', 'sram_layout',
    'total_cycles', 'prefill_cycles', 'decode_cycles',
    'fc_cycles', 'attention_cycles', 'nonlinear_cycles', 'collective_cycles', 'overlap_cycles',
    'tokens_per_second',
    'energy_dram_pj', 'energy_sram_pj', 'energy_bond_pj', 'energy_noc_pj', 'energy_link_pj',
    'energy_total_pj', 'energy_per_token_pj',
    'bank_utilization', 'fc_bottleneck', 'kv_rows_per_bank', 'simulated_tokens', 'status',
)

ENERGY_COMPONENTS = ('dram', 'sram', 'bond', 'noc', 'link')
PHASES = ('fc', 'attention', 'nonlinear', 'collective')


@dataclass
class SimReport:
    model: str
    arch_variant: str
    phase: str
    batch: int
    prompt_len: int
    gen_len: int
    tp_degree: int = 1
    pp_degree: int = 1
    fc_split: str = 'output_split'
    sram_layout: str = 'IN512_OUT8'
    total_cycles: int = 0
    prefill_cycles: int = 0
    decode_cycles: int = 0
    fc_cycles: int = 0
    attention_cycles: int = 0
    nonlinear_cycles: int = 0
    collective_cycles: int = 0
    # gleichzeitig belegte Zyklen; Summe der Phasen minus overlap = total
    overlap_cycles: int = 0
    tokens_per_second: float = 0.0
    energy_dram_pj: float = 0.0
    energy_sram_pj: float = 0.0
    energy_bond_pj: float = 0.0
    energy_noc_pj: float = 0.0
    energy_link_pj: float = 0.0
    energy_total_pj: float = 0.0
    energy_per_token_pj: float = 0.0
    bank_utilization: float = 1.0
    fc_bottleneck: str = ''
    kv_rows_per_bank: int = 0
    simulated_tokens: int = 0
    status: str = 'ok'
    # Details außerhalb des CSV-Schemas
    fc_ops: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    bank_utilization_per_bank: List[float] = field(default_factory=list)

    def phase_cycles(self) -> Dict[str, int]:
        return {p: getattr(self, f'{p}_cycles') for p in PHASES}

    def energy(self) -> Dict[str, float]:
        return {c: getattr(self, f'energy_{c}_pj') for c in ENERGY_COMPONENTS}

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_csv_row(self) -> List[Any]:
        return [getattr(self, name) for name in REPORT_FIELDS]


def reports_to_csv(reports: List[Dict[str, Any]], fields=REPORT_FIELDS) -> str:
    """Reports (oder Fehlerzeilen) als CSV-Text; fehlende Felder bleiben leer"""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), extrasaction='ignore', lineterminator='\n')
    writer.writeheader()
    for row in reports:
        writer.writerow(row)
    return buf.getvalue()
