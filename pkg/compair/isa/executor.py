"""
Ausführung von Row-Programmen

RowInterpreter wertet Row-Instruktionen direkt auf Bankebene in BF16 aus.
PacketExecutor spielt einen übersetzten Paketplan zyklengenau auf dem Mesh ab.
Beide arbeiten auf demselben RowStore-Modell, die DRAM-Inhalte sind danach
bitweise vergleichbar.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.hardware import HardwareConfig
from compair.dram_pim import DramChannel
from compair.noc.collectives import RowStore, rotate, tree_levels
from compair.noc.mesh import COMPUTE, MOVE, READ, WRITE, Flit, Hop, Mesh
from compair.noc.router import Coord, CurryAluState, alu_apply, alu_configure
from compair.numerics import Bf16, NumericEvents, ONE, bf16_binop, bits_to_f32
from compair.sram_pim import SramPimBank
from compair.numerics.bf16 import round_f32_bits
from .instructions import (
    NocAccess, NocBCast, NocExchange, NocReduce, NocScalar, RowInstruction, SramCompute, SramWrite,
)
from .packet import PacketType, encode_packet
from .translate import (
    NEG_SLOT, POS_SLOT, FusedScalar, Geometry, Schedule, ScheduledPacket, TranslationError,
    exchange_length, exchange_partner,
)

logger = logging.getLogger(__name__)

FLIT_KINDS = {
    PacketType.SCALAR: COMPUTE,
    PacketType.REDUCE: COMPUTE,
    PacketType.EXCHANGE: COMPUTE,
    PacketType.WRITE: WRITE,
    PacketType.READ: READ,
    PacketType.BROADCAST: MOVE,
}


class SramState:
    """Residente Gewichte je Bank und deren funktionale Auswertung"""

    def __init__(self, geo: Geometry):
        self.geo = geo
        self.weights: Dict[int, np.ndarray] = {}

    def write(self, store: RowStore, instr: SramWrite) -> None:
        for b in range(self.geo.banks):
            bits = [v.bits for v in store.row(b, instr.addr.row, instr.length, instr.addr.elem)]
            self.weights[b] = bits_to_f32(np.array(bits, dtype=np.uint16))

    def compute(self, store: RowStore, instr: SramCompute) -> int:
        """
        y = x · W mit binary32-Akkumulation, Ergebnis auf BF16 gerundet

        Returns:
            int: Anzahl Ausgangselemente pro Bank
        """
        n_out = 0
        for b, w in sorted(self.weights.items()):
            if len(w) % instr.length:
                raise TranslationError(
                    f"SRAM_Compute: {len(w)} Gewichte passen nicht zu Eingangslänge {instr.length}")
            n_out = len(w) // instr.length
            bits = [v.bits for v in store.row(b, instr.src.row, instr.length, instr.src.elem)]
            x = bits_to_f32(np.array(bits, dtype=np.uint16))
            y = np.zeros(n_out, dtype=np.float32)
            matrix = w.reshape(instr.length, n_out)
            with np.errstate(all='ignore'):
                for i in range(instr.length):
                    y = (y + np.float32(x[i]) * matrix[i]).astype(np.float32)
            out = round_f32_bits(y.view(np.uint32))
            store.set_row(b, instr.dst.row, [Bf16(int(v)) for v in out], instr.dst.elem)
        return n_out


class RowInterpreter:
    """
    Referenzinterpreter: führt Row-Instruktionen ohne Mesh aus

    ALU-Zustände werden mitgeführt, damit Folgeinstruktionen dieselben
    ArgRegs sehen wie auf dem Mesh.
    """

    def __init__(self, hw: HardwareConfig, store: Optional[RowStore] = None):
        self.hw = hw
        self.geo = Geometry(hw)
        self.store = store or RowStore()
        self.alus: Dict[Tuple[Coord, int], CurryAluState] = {}
        self.sram = SramState(self.geo)
        self.events = NumericEvents()

    def alu(self, coord: Coord, slot: int) -> CurryAluState:
        return self.alus.get((coord, slot), CurryAluState())

    def run(self, program: Sequence[Union[RowInstruction, FusedScalar]]) -> RowStore:
        for instr in program:
            self.execute(instr)
        return self.store

    def execute(self, instr: Union[RowInstruction, FusedScalar]) -> None:
        if isinstance(instr, FusedScalar):
            for inner in instr.original:
                self.execute(inner)
        elif isinstance(instr, NocScalar):
            self._scalar(instr)
        elif isinstance(instr, NocAccess):
            self._access(instr)
        elif isinstance(instr, NocReduce):
            self._reduce(instr)
        elif isinstance(instr, NocBCast):
            self._bcast(instr)
        elif isinstance(instr, NocExchange):
            self._exchange(instr)
        elif isinstance(instr, SramWrite):
            self.sram.write(self.store, instr)
        elif isinstance(instr, SramCompute):
            self.sram.compute(self.store, instr)
        else:
            raise TranslationError(f"Unbekannte Instruktion {type(instr).__name__}")

    def _scalar(self, instr: NocScalar) -> None:
        cfg = instr.config
        for b, lane, k in self.geo.masked(instr.mask):
            key = (self.geo.coord(b, lane), instr.slot)
            state = self.alu(*key)
            if cfg.init:
                state = alu_configure(state, cfg.arg, False, True, cfg.op, cfg.rounds)
            value = self.store.read((b, instr.src.row, instr.src.elem + k))
            state, out = alu_apply(state, instr.op, value, False, cfg.tag, self.events)
            self.alus[key] = state
            self.store.write((b, instr.dst.row, instr.dst.elem + k), out)

    def _access(self, instr: NocAccess) -> None:
        for b, lane, k in self.geo.masked(instr.mask):
            key = (self.geo.coord(b, lane), instr.slot)
            state = self.alu(*key)
            if instr.op == 'Wr':
                value = instr.const
                if instr.src is not None:
                    value = self.store.read((b, instr.src.row, instr.src.elem + k))
                self.alus[key] = replace(state, arg_reg=value)
            else:
                self.store.write((b, instr.dst.row, instr.dst.elem + k), state.arg_reg)

    def _tree(self, mask: int, root: int) -> Tuple[List[int], List[int]]:
        participants = self.geo.banks_of(mask)
        if root not in participants:
            raise TranslationError(f"Bank {root} liegt nicht in der Maske {mask:#x}")
        return rotate(participants, root), self.geo.lanes(mask, root)

    def _reduce(self, instr: NocReduce) -> None:
        order, lanes = self._tree(instr.mask, instr.dst_bank)
        src, dst = instr.src, instr.dst
        for k, lane in enumerate(lanes):
            current = {b: self.store.read((b, src.row, src.elem + k)) for b in order}
            for level, pairs in enumerate(tree_levels(order)):
                for left, right in pairs:
                    out = bf16_binop(instr.op, current[left], current[right])
                    self.events.observe(instr.op, current[left], current[right], out)
                    key = (self.geo.coord(left, lane), level % 2)
                    self.alus[key] = replace(self.alu(*key), arg_reg=out)
                    current[left] = out
                    self.store.write((left, dst.row, dst.elem + k), out)
            if len(order) == 1:
                self.store.write((order[0], dst.row, dst.elem + k), current[order[0]])

    def _bcast(self, instr: NocBCast) -> None:
        order, lanes = self._tree(instr.mask, instr.src_bank)
        for k in range(len(lanes)):
            value = self.store.read((instr.src_bank, instr.src.row, instr.src.elem + k))
            for b in order:
                self.store.write((b, instr.dst.row, instr.dst.elem + k), value)

    def _exchange(self, instr: NocExchange) -> None:
        for b in range(self.geo.banks):
            for lane in range(self.geo.rpb):
                coord = self.geo.coord(b, lane)
                self.alus[(coord, NEG_SLOT)] = replace(self.alu(coord, NEG_SLOT), arg_reg=-ONE)
                self.alus[(coord, POS_SLOT)] = replace(self.alu(coord, POS_SLOT), arg_reg=ONE)

        length = exchange_length(self.geo, instr)
        negate = instr.op.endswith('-')
        writes = []
        for b in range(self.geo.banks):
            for pos in range(length):
                value = self.store.read((b, instr.src.row, instr.src.elem + pos))
                if instr.op.startswith('T'):
                    dst_bank, dst_pos = exchange_partner(b, instr.offset, instr.group), pos
                    neg = negate and dst_bank < b
                else:
                    dst_bank, dst_pos = b, exchange_partner(pos, instr.offset, instr.group)
                    neg = negate and dst_pos < pos
                out = bf16_binop('mul', value, -ONE if neg else ONE)
                writes.append(((dst_bank, instr.dst.row, instr.dst.elem + dst_pos), out))
        for addr, out in writes:
            self.store.write(addr, out)


@dataclass
class ExecutionResult:
    cycles: int
    phase_cycles: List[Tuple[str, int]] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)
    energy_pj: float = 0.0


class PacketExecutor:
    """
    Spielt einen Paketplan auf dem Mesh ab

    Jede Phase wird zum Ende der vorigen injiziert; ausgeworfene Flits
    schreiben ihr Ergebnis an ihre DST-Adresse zurück. SRAM-Phasen laufen
    funktional über SramState und kosten die Zeit des SRAM-PIM-Modells.
    """

    def __init__(self, hw: HardwareConfig, store: Optional[RowStore] = None, mesh: Optional[Mesh] = None,
                 trace: bool = False):
        self.hw = hw
        self.geo = Geometry(hw)
        self.store = store or RowStore()
        self.mesh = mesh or Mesh(hw.noc, trace=trace)
        self.sram = SramState(self.geo)
        self.sram_bank = SramPimBank(hw.sram, hw.bond, DramChannel(hw.dram))

    def _flit(self, sp: ScheduledPacket) -> Flit:
        data = self.store.read(sp.src) if sp.src is not None else sp.packet.data
        packet = replace(sp.packet, data=data)
        steps = [Hop(s.x, s.y, s.wr_reg, s.iter_tag, s.opcode) for s in packet.active_steps()]
        return Flit(kind=FLIT_KINDS[packet.type], data=data, steps=steps, src=sp.src_router, slot=sp.slot,
                    iter_num=packet.iter_num, payload=encode_packet(packet), tag=sp.dst)

    def _sram_phase(self, instr: RowInstruction) -> int:
        if isinstance(instr, SramWrite):
            self.sram.write(self.store, instr)
            ns = self.sram_bank.load_weights(instr.length * 2)
        else:
            n_out = self.sram.compute(self.store, instr)
            ns = self.sram_bank.per_vector(instr.length, max(n_out, 1), self.hw.sram.layout).ns
        return self.hw.cycles(ns)

    def run(self, schedule: Schedule) -> ExecutionResult:
        start = self.mesh.cycle
        now = start
        result = ExecutionResult(cycles=0)
        for phase in schedule.phases:
            if phase.sram is not None:
                cost = self._sram_phase(phase.sram)
                now += cost
                self.mesh.cycle = max(self.mesh.cycle, now)
                result.phase_cycles.append((phase.label, cost))
                continue
            flits = [self.mesh.inject(self._flit(sp), at_cycle=now) for sp in phase.packets]
            self.mesh.run_until_drained()
            for flit in flits:
                if flit.tag is not None:
                    self.store.write(flit.tag, flit.data)
            end = max(f.done_cycle for f in flits)
            result.phase_cycles.append((phase.label, end - now))
            now = end
            self.mesh.cycle = max(self.mesh.cycle, now)
        result.cycles = now - start
        result.stats = self.mesh.stats.to_dict()
        result.energy_pj = self.mesh.energy_pj()
        logger.debug("Paketplan: %d Phasen in %d Zyklen", len(schedule.phases), result.cycles)
        return result
