"""
Abbildung einer Decoder-Schicht auf Geräte, Kanäle und Bänke

Verteilt die FC-Gewichte (Output- oder Input-Split) über alle Bänke der
TP-Gruppe, legt den KV-Cache sequenzgeteilt ab und ordnet die
Nichtlinear-Operatoren den NoC-Kernels bzw. der zentralen NLU zu.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

from config.hardware import HardwareConfig, ModelConfig, RunConfig, variant_hardware
from .costs import (
    TileCost, dram_tile_cost, pad_rows, sram_tile_cost, sram_tile_count,
)

logger = logging.getLogger(__name__)

BYTES_PER_ELEM = 2
INPUT_SPLIT_FACTOR = 2

# Varianten ohne SRAM-PIM bzw. ohne Curry-ALU
DRAM_VARIANTS = ('DRAM_ONLY', 'DRAM_PLUS_CURRY')
NLU_VARIANTS = ('DRAM_ONLY',)

TileHistogram = Dict[Tuple[int, int], int]


class CapacityError(ValueError):
    """Gewichte + KV-Cache passen nicht in die Bänke"""

    def __init__(self, message: str, shortfall: Dict[str, Any]):
        super().__init__(message)
        self.shortfall = shortfall


def _parts(n: int, k: int) -> Dict[int, int]:
    """n in k möglichst gleich große Teile; {Größe: Anzahl}, leere Teile entfallen"""
    q, r = divmod(n, k)
    parts = {}
    if r:
        parts[q + 1] = r
    if q:
        parts[q] = parts.get(q, 0) + (k - r)
    return parts


def split_weight(rows: int, cols: int, banks: int, split: str,
                 factor: int = INPUT_SPLIT_FACTOR) -> Tuple[TileHistogram, int]:
    """
    Kachelt eine Gewichtsmatrix rows x cols über ``banks`` Bänke

    Returns:
        ({(Zeilen, Spalten): Anzahl Bänke}, Bänke pro Reduktionsgruppe)
    """
    if split == 'output_split':
        return {(rows, c): n for c, n in _parts(cols, banks).items()}, 1
    if split != 'input_split':
        raise ValueError(f"Unbekannter Split: {split}")
    group = max(1, min(factor, banks))
    tiles: TileHistogram = {}
    for r, nr in _parts(rows, group).items():
        for c, nc in _parts(cols, banks // group).items():
            tiles[(r, c)] = tiles.get((r, c), 0) + nr * nc
    return tiles, group


def fc_shapes(model: ModelConfig) -> Dict[str, Tuple[int, int]]:
    """(Eingang, Ausgang) der FC-Gewichte einer Schicht"""
    q_dim = model.num_heads * model.head_dim
    shapes = {
        'q': (model.hidden_size, q_dim),
        'k': (model.hidden_size, model.kv_dim),
        'v': (model.hidden_size, model.kv_dim),
        'o': (q_dim, model.hidden_size),
        'up': (model.hidden_size, model.ffn_intermediate),
    }
    if model.gated_ffn:
        shapes['gate'] = (model.hidden_size, model.ffn_intermediate)
    shapes['down'] = (model.ffn_intermediate, model.hidden_size)
    return shapes


def stage_layers(num_layers: int, pp: int) -> List[int]:
    """Zusammenhängende, möglichst gleich große PP-Stufen"""
    if pp < 1:
        raise ValueError("pp_degree muss >= 1 sein")
    base, extra = divmod(num_layers, pp)
    return [base + (1 if i < extra else 0) for i in range(pp)]


def group_banks(hw: HardwareConfig, tp: int) -> int:
    return tp * hw.dram.channels_per_device * hw.dram.banks_per_channel


@dataclass
class FcPlan:
    name: str
    rows: int
    cols: int
    split: str
    tiles: TileHistogram
    reduce_group: int = 1
    target: str = 'dram'
    cost: Optional[TileCost] = None

    @property
    def reduction(self) -> bool:
        return self.split == 'input_split'

    @property
    def reduce_levels(self) -> int:
        return math.ceil(math.log2(self.reduce_group)) if self.reduce_group > 1 else 0

    @property
    def covered(self) -> int:
        return sum(r * c * n for (r, c), n in self.tiles.items())

    @property
    def max_tile(self) -> Tuple[int, int]:
        return max(self.tiles, key=lambda rc: rc[0] * rc[1])

    @property
    def busy_banks(self) -> int:
        return sum(self.tiles.values())

    def bank_tiles(self) -> Iterator[Tuple[int, int]]:
        """Kachel jeder belegten Bank, größte zuerst"""
        for shape in sorted(self.tiles, key=lambda rc: -rc[0] * rc[1]):
            for _ in range(self.tiles[shape]):
                yield shape

    def bytes_per_bank(self) -> int:
        r, c = self.max_tile
        return pad_rows(r) * c * BYTES_PER_ELEM

    def to_dict(self) -> Dict[str, Any]:
        d = {
            'name': self.name,
            'shape': [self.rows, self.cols],
            'split': self.split,
            'target': self.target,
            'tiles': [{'rows': r, 'cols': c, 'banks': n} for (r, c), n in sorted(self.tiles.items())],
            'bytes_per_bank': self.bytes_per_bank(),
            'input_broadcast': self.reduce_group if self.reduction else self.busy_banks,
            'reduce_tree': {'group': self.reduce_group, 'levels': self.reduce_levels} if self.reduction else None,
        }
        if self.cost is not None:
            d['ns'] = self.cost.ns
            d['bottleneck'] = f"{self.cost.bottleneck}/{self.cost.detail}"
        return d


@dataclass
class AttentionPlan:
    """KV-Cache sequenzgeteilt über die Bänke, Köpfe reihum"""
    target: str
    seq_len: int
    kv_slots_per_bank: int
    kv_bytes_per_bank: int
    kv_rows_per_bank: int
    group_size: int
    sram_loads: int = 0
    mha_sram_loads: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'target': self.target,
            'seq_len': self.seq_len,
            'head_assignment': 'round-robin',
            'kv_slots_per_bank': self.kv_slots_per_bank,
            'kv_bytes_per_bank': self.kv_bytes_per_bank,
            'kv_rows_per_bank': self.kv_rows_per_bank,
            'group_size': self.group_size,
            'sram_loads': self.sram_loads,
            'mha_sram_loads': self.mha_sram_loads,
        }


@dataclass
class NonlinearPlan:
    name: str
    target: str
    # Elemente pro Token und Batch-Element; Softmax zusätzlich pro Sequenzposition
    elements: int
    per_position: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'target': self.target, 'elements': self.elements,
                'per_position': self.per_position}


@dataclass
class TilePlan:
    model: str
    arch_variant: str
    phase: str
    batch: int
    banks: int
    tp_degree: int
    pp_degree: int
    layers_per_stage: List[int]
    fc: Dict[str, FcPlan]
    attention: AttentionPlan
    nonlinear: Dict[str, NonlinearPlan]
    weight_bytes_per_bank: int
    capacity_bytes: int
    hw: HardwareConfig = field(repr=False, default=None)
    model_config: ModelConfig = field(repr=False, default=None)

    @property
    def required_bytes(self) -> int:
        return (self.weight_bytes_per_bank + self.attention.kv_bytes_per_bank) * max(self.layers_per_stage)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'model': self.model,
            'arch_variant': self.arch_variant,
            'phase': self.phase,
            'batch': self.batch,
            'banks': self.banks,
            'tp_degree': self.tp_degree,
            'pp_degree': self.pp_degree,
            'layers_per_stage': list(self.layers_per_stage),
            'fc': {name: op.to_dict() for name, op in self.fc.items()},
            'attention': self.attention.to_dict(),
            'nonlinear': {name: op.to_dict() for name, op in self.nonlinear.items()},
            'weight_bytes_per_bank': self.weight_bytes_per_bank,
            'required_bytes': self.required_bytes,
            'capacity_bytes': self.capacity_bytes,
        }


def fc_op_cost(hw: HardwareConfig, tiles: TileHistogram, batch: int, target: str, layout: str) -> TileCost:
    """
    Kosten eines FC-Operators: alle Bänke parallel, Latenz der langsamsten Kachel

    Energie summiert über alle belegten Bänke.
    """
    worst: Optional[TileCost] = None
    energy: Dict[str, float] = {}
    loads = 0
    for (r, c), n in tiles.items():
        if target == 'sram':
            cost = sram_tile_cost(hw, r, c, batch, layout)
        else:
            cost = dram_tile_cost(hw, r, c, batch)
        for key, value in cost.energy.items():
            energy[key] = energy.get(key, 0.0) + value * n
        loads += cost.loads * n
        if worst is None or cost.ns > worst.ns:
            worst = cost
    if worst is None:
        return TileCost(0.0, target, energy={})
    return TileCost(worst.ns, target, worst.bottleneck, worst.detail, energy, loads)


def _choose_target(hw: HardwareConfig, run: RunConfig, tiles: TileHistogram, batch: int) -> str:
    if run.arch_variant in DRAM_VARIANTS:
        return 'dram'
    policy = run.mapping.fc_target
    if policy != 'auto':
        return policy
    dram = fc_op_cost(hw, tiles, batch, 'dram', run.mapping.sram_layout)
    sram = fc_op_cost(hw, tiles, batch, 'sram', run.mapping.sram_layout)
    return 'sram' if sram.ns < dram.ns else 'dram'


def plan_attention(model: ModelConfig, run: RunConfig, hw: HardwareConfig, banks: int,
                   seq_len: int) -> AttentionPlan:
    """KV-Cache pro Kopf sequenzmajor, (Kopf, Position)-Paare reihum über die Bänke"""
    target = run.mapping.attention_target
    if target == 'sram_gqa' and model.attention_kind != 'GQA':
        raise ValueError("attention_target 'sram_gqa' nur für GQA-Modelle")
    slots = math.ceil(model.kv_heads * seq_len / banks)
    kv_bytes = 2 * slots * model.head_dim * BYTES_PER_ELEM * run.batch
    plan = AttentionPlan(
        target=target,
        seq_len=seq_len,
        kv_slots_per_bank=slots,
        kv_bytes_per_bank=kv_bytes,
        kv_rows_per_bank=math.ceil(kv_bytes / hw.dram.row_width),
        group_size=model.group_size,
    )
    if target == 'sram_gqa':
        per_head = (sram_tile_count(hw, model.head_dim, seq_len, run.mapping.sram_layout)
                    + sram_tile_count(hw, seq_len, model.head_dim, run.mapping.sram_layout))
        plan.sram_loads = model.kv_heads * per_head
        plan.mha_sram_loads = model.num_heads * per_head
    return plan


def plan_nonlinear(model: ModelConfig, run: RunConfig) -> Dict[str, NonlinearPlan]:
    target = 'nlu' if run.arch_variant in NLU_VARIANTS else 'noc'
    ops = {
        'rmsnorm_attn': NonlinearPlan('rmsnorm_attn', target, model.hidden_size),
        'rope': NonlinearPlan('rope', target, (model.num_heads + model.kv_heads) * model.head_dim),
        'softmax': NonlinearPlan('softmax', target, model.num_heads, per_position=True),
        'rmsnorm_ffn': NonlinearPlan('rmsnorm_ffn', target, model.hidden_size),
        'silu': NonlinearPlan('silu', target, model.ffn_intermediate),
    }
    return ops


def plan_layer(model: ModelConfig, run: RunConfig, hw: HardwareConfig,
               phase: Optional[str] = None) -> TilePlan:
    """
    Plant eine Decoder-Schicht für die TP-Gruppe

    Args:
        phase: 'prefill' oder 'decode'; bestimmt den effektiven Batch der FC-Operatoren

    Raises:
        CapacityError: Gewichte + KV-Cache überschreiten die Bankkapazität
        ValueError: unzulässige Kombination aus Split und Architekturvariante
    """
    phase = phase or run.phase
    hw = variant_hardware(hw, run.arch_variant)
    split = run.mapping.fc_split
    if split == 'input_split' and run.arch_variant in NLU_VARIANTS:
        raise ValueError("input_split braucht Reduktion über das NoC (nicht in DRAM_ONLY)")

    banks = group_banks(hw, run.tp_degree)
    batch = run.batch * (run.prompt_len if phase == 'prefill' else 1)

    fc: Dict[str, FcPlan] = {}
    for name, (rows, cols) in fc_shapes(model).items():
        tiles, group = split_weight(rows, cols, banks, split)
        target = _choose_target(hw, run, tiles, batch)
        op = FcPlan(name, rows, cols, split, tiles, group, target)
        op.cost = fc_op_cost(hw, tiles, batch, target, run.mapping.sram_layout)
        fc[name] = op

    seq_len = run.prompt_len + run.gen_len
    attention = plan_attention(model, run, hw, banks, seq_len)
    stages = stage_layers(model.num_layers, run.pp_degree)

    plan = TilePlan(
        model=model.name,
        arch_variant=run.arch_variant,
        phase=phase,
        batch=batch,
        banks=banks,
        tp_degree=run.tp_degree,
        pp_degree=run.pp_degree,
        layers_per_stage=stages,
        fc=fc,
        attention=attention,
        nonlinear=plan_nonlinear(model, run),
        weight_bytes_per_bank=sum(op.bytes_per_bank() for op in fc.values()),
        capacity_bytes=hw.dram.bank_capacity,
        hw=hw,
        model_config=model,
    )
    if plan.required_bytes > plan.capacity_bytes:
        shortfall = {
            'required_bytes': plan.required_bytes,
            'capacity_bytes': plan.capacity_bytes,
            'shortfall_bytes': plan.required_bytes - plan.capacity_bytes,
            'weight_bytes_per_layer': plan.weight_bytes_per_bank,
            'kv_bytes_per_layer': attention.kv_bytes_per_bank,
            'layers': max(stages),
            'banks': banks,
        }
        raise CapacityError(
            f"{model.name}: {plan.required_bytes} B pro Bank benötigt, "
            f"{plan.capacity_bytes} B verfügbar", shortfall)
    logger.debug("Plan %s %s: %d Bänke, %s", model.name, phase, banks,
                 {name: op.target for name, op in fc.items()})
    return plan


@dataclass(frozen=True)
class Utilization:
    busy_ns: float
    mean_busy_ns: float
    busy_fraction: float
    utilization: float
    banks: int
    # Belegung jeder Bank der Gruppe, größte Kacheln zuerst auf Bank 0
    bank_busy_ns: Tuple[float, ...] = ()

    @property
    def per_bank(self) -> List[float]:
        """Belegung jeder Bank relativ zur meistbelegten"""
        if not self.busy_ns:
            return [0.0] * len(self.bank_busy_ns)
        return [b / self.busy_ns for b in self.bank_busy_ns]

    def to_dict(self) -> Dict[str, Any]:
        return {'busy_ns': self.busy_ns, 'mean_busy_ns': self.mean_busy_ns,
                'busy_fraction': self.busy_fraction, 'utilization': self.utilization, 'banks': self.banks,
                'per_bank': self.per_bank}


def bank_busy(hw: HardwareConfig, model: ModelConfig, banks: int, split: str) -> List[float]:
    """Belegung jeder Bank durch die FC-Gewichte einer Schicht, je ein Vektor"""
    busy = [0.0] * banks
    for rows, cols in fc_shapes(model).values():
        tiles, _ = split_weight(rows, cols, banks, split)
        costs = sorted(((dram_tile_cost(hw, r, c, 1).ns, n) for (r, c), n in tiles.items()), reverse=True)
        bank = 0
        for ns, n in costs:
            for _ in range(n):
                busy[bank] += ns
                bank += 1
    return busy


def _busy(hw: HardwareConfig, model: ModelConfig, banks: int, split: str) -> Tuple[float, float, List[float]]:
    """(max, mittlere, je Bank) Belegung"""
    busy = bank_busy(hw, model, banks, split)
    return max(busy, default=0.0), sum(busy) / banks, busy


def estimate_utilization(plan: TilePlan) -> Utilization:
    """
    Analytischer Belegungsanteil der Bänke, normiert auf tp_degree 1

    Mehr Bänke bei gleicher Arbeit lassen die größte Kachel schrumpfen, aber
    Restbänke laufen leer; der Anteil sinkt mit dem TP-Grad.
    """
    split = next(iter(plan.fc.values())).split if plan.fc else 'output_split'
    model = plan.model_config
    busy_max, mean, per_bank = _busy(plan.hw, model, plan.banks, split)
    fraction = mean / busy_max if busy_max else 0.0
    base_banks = group_banks(plan.hw, 1)
    base_max, base_mean, _ = _busy(plan.hw, model, base_banks, split)
    base = base_mean / base_max if base_max else 1.0
    utilization = min(1.0, fraction / base) if base else 0.0
    return Utilization(busy_max, mean, fraction, utilization, plan.banks, tuple(per_bank))
