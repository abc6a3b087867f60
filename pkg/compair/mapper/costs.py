"""
Kostenfunktionen einzelner Kacheln, zwischengespeichert pro Hardware und Form
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict

from config.hardware import HardwareConfig
from compair.dram_pim import DramChannel
from compair.sram_pim import SramPimBank, gemm_weights, tile_shape

logger = logging.getLogger(__name__)

MAC_LANES = 16


def pad_rows(rows: int, lanes: int = MAC_LANES) -> int:
    return math.ceil(rows / lanes) * lanes if rows > 0 else 0


@dataclass(frozen=True)
class TileCost:
    """Latenz (ns) und Energie (pJ) einer Bank für eine Kachel"""
    ns: float
    target: str
    bottleneck: str = 'compute'
    detail: str = 'compute'
    energy: Dict[str, float] = field(default_factory=dict)
    loads: int = 0


@lru_cache(maxsize=4096)
def dram_tile_cost(hw: HardwareConfig, rows: int, cols: int, batch: int) -> TileCost:
    """GeMV über den 16-Lane-MAC, ein Durchlauf der Kachel pro Eingangsvektor"""
    if rows <= 0 or cols <= 0 or batch <= 0:
        return TileCost(0.0, 'dram', energy={'dram': 0.0})
    channel = DramChannel(hw.dram)
    per_vector = channel.gemv_bank(pad_rows(rows), cols)
    energy = channel.energy_report()['total'] * batch
    return TileCost(per_vector * batch, 'dram', 'dram', 'row-activation', {'dram': energy})


@lru_cache(maxsize=4096)
def sram_tile_cost(hw: HardwareConfig, rows: int, cols: int, batch: int, layout: str) -> TileCost:
    """Kachel über SRAM-PIM: Gewichte laden, dann alle Vektoren des Batches"""
    if rows <= 0 or cols <= 0 or batch <= 0:
        return TileCost(0.0, 'sram', energy={'dram': 0.0, 'sram': 0.0, 'bond': 0.0})
    channel = DramChannel(hw.dram)
    bank = SramPimBank(hw.sram, hw.bond, channel)
    res = gemm_weights(bank, rows, cols, batch, layout)
    sram = bank.energy_pj()
    energy = {'dram': channel.energy_report()['total'], 'sram': sram['sram'], 'bond': sram['bond']}
    return TileCost(res.ns, 'sram', res.bottleneck, res.detail, energy, loads=bank.stats['loads'])


def sram_tile_count(hw: HardwareConfig, rows: int, cols: int, layout: str) -> int:
    tile_rows, tile_cols = tile_shape(hw.sram, layout)
    return math.ceil(rows / tile_rows) * math.ceil(cols / tile_cols)


@lru_cache(maxsize=1024)
def stream_cost(hw: HardwareConfig, nbytes: int) -> TileCost:
    """Zeilenweises Streamen durch den MAC (Attention gegen den KV-Cache)"""
    if nbytes <= 0:
        return TileCost(0.0, 'dram', energy={'dram': 0.0})
    channel = DramChannel(hw.dram)
    ns, accesses = channel.row_stream_ns(nbytes, hw.dram.column_access_bytes, hw.dram.access_ns)
    rows = math.ceil(nbytes / hw.dram.row_width)
    energy = rows * (hw.dram.e_act_pj + hw.dram.e_pre_pj) + accesses * hw.dram.e_mac_pj
    return TileCost(ns, 'dram', 'dram', 'row-activation', {'dram': energy})
