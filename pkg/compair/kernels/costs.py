"""
Zyklenkosten der Kernels für das Engine-Modell

Die Werte werden einmal pro Hardware durch echte Kernel-Läufe auf dem Mesh
gemessen und zwischengespeichert.
"""

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict

from config.hardware import HardwareConfig
from compair.noc import collective_reduce
from compair.numerics import Bf16
from .runner import KernelResult, exp_kernel, rmsnorm_kernel, rope_kernel, silu_kernel, softmax_kernel

logger = logging.getLogger(__name__)

# Elemente pro Bank in den Messläufen
SAMPLE_PER_BANK = 4


@dataclass(frozen=True)
class KernelCosts:
    """
    Zyklen pro Bank

    exp_*: ein Exponent pro Bank (alle Bänke parallel)
    rope_head: Umordnung + EWMUL eines Kopfes
    *_per_elem: Zyklen pro Element und Bank der zusammengesetzten Kernels
    reduce_pair_per_elem: Zweier-Reduktion über das Mesh (Input-Split)
    *_pj: NoC-Energie pro Element (pJ)
    """
    exp_fused: int
    exp_unfused: int
    rope_head: int
    rope_noc: int
    softmax_per_elem: float
    softmax_unfused_per_elem: float
    rmsnorm_per_elem: float
    silu_per_elem: float
    reduce_pair_per_elem: float
    softmax_pj: float = 0.0
    rmsnorm_pj: float = 0.0
    silu_pj: float = 0.0
    rope_pj: float = 0.0
    reduce_pj: float = 0.0

    @property
    def fusion_gain(self) -> float:
        return 1.0 - self.exp_fused / self.exp_unfused

    def to_dict(self) -> Dict[str, float]:
        d = asdict(self)
        d['fusion_gain'] = self.fusion_gain
        return d


def _sample_vector(n: int):
    return [Bf16.from_float(0.25 * math.sin(i)) for i in range(n)]


def _noc_pj(result: KernelResult, hw: HardwareConfig, n: int) -> float:
    return result.stats.get('bits_moved', 0) * hw.noc.energy_pj_per_bit / n


@lru_cache(maxsize=8)
def kernel_costs(hw: HardwareConfig) -> KernelCosts:
    banks = hw.dram.banks_per_channel
    n = banks * SAMPLE_PER_BANK
    sample = _sample_vector(n)

    exp_f = exp_kernel(sample[:banks], hw, fused=True).cycles
    exp_u = exp_kernel(sample[:banks], hw, fused=False).cycles
    head = 128
    rope = rope_kernel(_sample_vector(head), [0.5] * head, [0.5] * head, hw)
    sm_f = softmax_kernel(sample, hw, banks=banks, fused=True)
    sm_u = softmax_kernel(sample, hw, banks=banks, fused=False).cycles
    rms = rmsnorm_kernel([1.0 + v.to_float() for v in sample], hw, banks=banks)
    silu = silu_kernel(sample, hw, banks=banks)

    pair = SAMPLE_PER_BANK * hw.routers_per_bank
    reduce = collective_reduce(hw.noc, [0, 1], 'add', 0, {0: sample[:pair], 1: sample[pair:2 * pair]},
                               banks_per_channel=banks)

    costs = KernelCosts(
        exp_fused=exp_f,
        exp_unfused=exp_u,
        rope_head=rope.cycles,
        rope_noc=rope.noc_cycles,
        softmax_per_elem=sm_f.cycles / SAMPLE_PER_BANK,
        softmax_unfused_per_elem=sm_u / SAMPLE_PER_BANK,
        rmsnorm_per_elem=rms.cycles / SAMPLE_PER_BANK,
        silu_per_elem=silu.cycles / SAMPLE_PER_BANK,
        reduce_pair_per_elem=reduce.cycles / pair,
        softmax_pj=_noc_pj(sm_f, hw, n),
        rmsnorm_pj=_noc_pj(rms, hw, n),
        silu_pj=_noc_pj(silu, hw, n),
        rope_pj=_noc_pj(rope, hw, 1),
        reduce_pj=reduce.hops * hw.noc.flit_bits * hw.noc.energy_pj_per_bit / pair,
    )
    logger.info("⚙️ Kernel-Kosten gemessen: exp %d/%d Zyklen (fused/unfused), RoPE %d Zyklen",
                exp_f, exp_u, rope.cycles)
    return costs
