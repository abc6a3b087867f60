"""
Hardware-, Modell- und Lauf-Deskriptoren für den CompAir-Simulator

Alle Zeiten in ns, Bandbreiten in Bytes/s, Energien in pJ.
Die Logik-Die (NoC + SRAM-PIM) läuft mit 1 GHz, ein Zyklus entspricht also 1 ns.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Tuple

from .config import get_config

KIB = 1024
MIB = 1024 * 1024

ARCH_VARIANTS = ('DRAM_ONLY', 'DRAM_PLUS_CURRY', 'HYBRID_BASE', 'HYBRID_OPT')
SRAM_LAYOUTS = ('IN512_OUT8', 'IN256_OUT16')

# (Eingänge, Ausgänge) des aggregierten Makro-Verbunds pro Bank
LAYOUT_SHAPES = {
    'IN512_OUT8': (512, 8),
    'IN256_OUT16': (256, 16),
}

# Spannungs-Endpunkte des SRAM-PIM-Makros: (Zugriffszeit ns, TOPS/W)
VOLTAGE_POINTS = {
    'high': (6.8, 14.4),   # 0.9 V
    'low': (14.1, 31.6),   # 0.6 V
}


@dataclass(frozen=True)
class DramTimings:
    t_rcdwr: float = 14.0
    t_rcdrd: float = 18.0
    t_ras: float = 27.0
    t_cl: float = 25.0
    t_rp: float = 16.0
    clock_period: float = 1.0
    # Column-to-Column-Abstand aufeinanderfolgender Zugriffe
    t_ccd: float = 1.0


@dataclass(frozen=True)
class DramPimSpec:
    channels_per_device: int = 32
    banks_per_channel: int = 16
    bank_capacity: int = 32 * MIB
    macs_per_bank: int = 16
    row_width: int = 1024
    readout_bytes_per_access: int = 32
    internal_bandwidth_per_bank: float = 32e9
    timings: DramTimings = field(default_factory=DramTimings)
    global_buffer_bytes_per_cycle: int = 32
    # Energie pro Kommando, kalibriert auf 0.036-0.076 W pro Bank bei GeMV
    e_act_pj: float = 600.0
    e_pre_pj: float = 300.0
    e_rd_pj: float = 50.0
    e_wr_pj: float = 60.0
    e_mac_pj: float = 75.0
    e_gb_pj_per_byte: float = 2.0
    accumulate: str = 'binary32'

    @property
    def column_access_bytes(self) -> int:
        """Bytes, die der 16-Lane-MAC pro Spaltenzugriff verbraucht (BF16)"""
        return self.macs_per_bank * 2

    @property
    def access_ns(self) -> float:
        """Zeit pro Spaltenzugriff, gedeckelt durch die interne Bankbandbreite"""
        by_bandwidth = self.column_access_bytes / (self.internal_bandwidth_per_bank / 1e9)
        return max(self.timings.t_ccd, by_bandwidth)


@dataclass(frozen=True)
class SramPimSpec:
    macros_per_bank: int = 4
    macro_inputs: int = 128
    macro_outputs: int = 8
    macro_capacity: int = 64 * 1024
    access_time: float = 6.8
    tops_per_watt: float = 14.4
    voltage_mode: str = 'high'
    layout: str = 'IN512_OUT8'

    @property
    def bank_capacity_bytes(self) -> int:
        return self.macros_per_bank * self.macro_capacity // 8

    @property
    def macs_per_access(self) -> int:
        return self.macros_per_bank * self.macro_inputs * self.macro_outputs


@dataclass(frozen=True)
class BondSpec:
    bonds_per_bank: int = 256
    bits_per_second_per_bond: float = 6.4e9
    energy_per_bit: float = 0.5

    @property
    def bandwidth(self) -> float:
        """Bytes/s einer Bank-Verbindung"""
        return self.bonds_per_bank * self.bits_per_second_per_bond / 8


@dataclass(frozen=True)
class NocSpec:
    mesh_x: int = 4
    mesh_y: int = 16
    alus_per_router: int = 2
    flit_bits: int = 72
    routing: str = 'DOR'
    router_delay_cycles: int = 1
    clock_period: float = 1.0
    queue_depth: int = 4
    io_cycles: int = 1
    bypass: bool = True
    energy_pj_per_bit: float = 0.10

    @property
    def routers(self) -> int:
        return self.mesh_x * self.mesh_y


@dataclass(frozen=True)
class InterconnectSpec:
    devices: int = 1
    collective_bandwidth: float = 29.44e9
    p2p_bandwidth: float = 53.5e9
    link_latency: float = 600.0
    energy_pj_per_bit: float = 5.0


@dataclass(frozen=True)
class NluSpec:
    """Zentrale Nichtlinear-Einheit des reinen DRAM-PIM-Vergleichssystems"""
    cycles_per_element: float = 1.0
    softmax_passes: int = 3


@dataclass(frozen=True)
class HardwareConfig:
    dram: DramPimSpec = field(default_factory=DramPimSpec)
    sram: SramPimSpec = field(default_factory=SramPimSpec)
    bond: BondSpec = field(default_factory=BondSpec)
    noc: NocSpec = field(default_factory=NocSpec)
    interconnect: InterconnectSpec = field(default_factory=InterconnectSpec)
    nlu: NluSpec = field(default_factory=NluSpec)

    @property
    def routers_per_bank(self) -> int:
        return self.noc.routers // self.dram.banks_per_channel

    def cycles(self, ns: float) -> int:
        """ns auf ganze Logik-Zyklen aufrunden"""
        if ns <= 0:
            return 0
        return int(math.ceil(ns / self.noc.clock_period - 1e-9))


@dataclass(frozen=True)
class ModelConfig:
    name: str = 'llama2-7b'
    hidden_size: int = 4096
    num_layers: int = 32
    num_heads: int = 32
    kv_heads: int = 32
    head_dim: int = 128
    ffn_intermediate: int = 11008
    attention_kind: str = 'MHA'
    precision: str = 'BF16'
    gated_ffn: bool = True

    @property
    def group_size(self) -> int:
        return self.num_heads // self.kv_heads

    @property
    def kv_dim(self) -> int:
        return self.kv_heads * self.head_dim


@dataclass(frozen=True)
class MappingPolicy:
    fc_split: str = 'output_split'
    sram_layout: str = 'IN512_OUT8'
    # 'auto' wählt pro Operator das günstigere Ziel
    fc_target: str = 'auto'
    attention_target: str = 'dram'
    tp_degree: int = 1
    pp_degree: int = 1


@dataclass(frozen=True)
class RunConfig:
    batch: int = 1
    prompt_len: int = 128
    gen_len: int = 16
    phase: str = 'decode'
    tp_degree: int = 1
    pp_degree: int = 1
    mapping: MappingPolicy = field(default_factory=MappingPolicy)
    arch_variant: str = 'HYBRID_OPT'
    seed: int = 0
    decode_window: int = field(default_factory=lambda: get_config().DECODE_WINDOW)


def variant_hardware(hw: HardwareConfig, arch_variant: str) -> HardwareConfig:
    """Wendet die Spaltendecoder-Variante der Ablation auf die Hardware an"""
    readout = 128 if arch_variant == 'HYBRID_OPT' else 32
    if hw.dram.readout_bytes_per_access == readout:
        return hw
    return replace(hw, dram=replace(hw.dram, readout_bytes_per_access=readout))


def layout_shape(layout: str) -> Tuple[int, int]:
    return LAYOUT_SHAPES[layout]
