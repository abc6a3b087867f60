"""
Übersetzer Row-Level-ISA -> Paketpläne

Jede NoC-Instruktion wird pro maskierter Bank bzw. pro maskiertem Router in
Pakete aufgelöst. Der k-te maskierte Router einer Bank bearbeitet Element
``elem + k``. Ein Plan besteht aus Phasen; eine Phase startet erst, wenn
alle Pakete der vorigen Phase ihr Ergebnis im DRAM abgelegt haben.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from config.hardware import HardwareConfig
from compair.noc.collectives import DST_ROW, SRC_ROW, Transfer, plan_broadcast, plan_reduce
from compair.noc.mesh import COMPUTE, MOVE, WRITE
from compair.noc.router import Coord
from compair.numerics import Bf16, ONE
from .instructions import (
    ITER_TAG, NO_ITER, NocAccess, NocBCast, NocExchange, NocReduce, NocScalar, RowAddr,
    RowInstruction, SramCompute, SramWrite,
)
from .packet import Packet, PacketFieldError, PacketType, PathStep, PATH_STEPS, dump_schedule

logger = logging.getLogger(__name__)

Address = Tuple[int, int, int]

MAX_ITER_NUM = 15
NEG_SLOT = 0
POS_SLOT = 1


class TranslationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Geometrie
# ---------------------------------------------------------------------------

class Geometry:
    """Zuordnung Router-Index <-> (Bank, Lane) <-> Mesh-Koordinate"""

    def __init__(self, hw: HardwareConfig):
        self.hw = hw
        self.banks = hw.dram.banks_per_channel
        self.rpb = hw.routers_per_bank
        self.routers = hw.noc.routers
        self.mesh_x = hw.noc.mesh_x
        self.row_elements = hw.dram.row_width // 2

    def coord(self, bank: int, lane: int) -> Coord:
        index = bank * self.rpb + lane % self.rpb
        return index % self.mesh_x, index // self.mesh_x

    def check_mask(self, mask: int) -> None:
        if mask.bit_length() > self.routers:
            raise TranslationError(f"Maske {mask:#x} spannt mehr als {self.routers} Router")

    def lanes(self, mask: int, bank: int) -> List[int]:
        return [lane for lane in range(self.rpb) if mask >> (bank * self.rpb + lane) & 1]

    def banks_of(self, mask: int) -> List[int]:
        return [b for b in range(self.banks) if self.lanes(mask, b)]

    def masked(self, mask: int) -> List[Tuple[int, int, int]]:
        """(Bank, Lane, k) aller maskierten Router"""
        self.check_mask(mask)
        return [(b, lane, k) for b in range(self.banks) for k, lane in enumerate(self.lanes(mask, b))]


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduledPacket:
    """Paket plus Laufzeitbindung (Quellrouter, ALU-Slot, DRAM-Adressen)"""
    packet: Packet
    bank: int
    src_router: Coord
    slot: int = 0
    src: Optional[Address] = None
    dst: Optional[Address] = None


@dataclass
class Phase:
    label: str
    packets: List[ScheduledPacket] = field(default_factory=list)
    sram: Optional[RowInstruction] = None


@dataclass
class Schedule:
    phases: List[Phase] = field(default_factory=list)

    def packets(self) -> List[ScheduledPacket]:
        return [sp for phase in self.phases for sp in phase.packets]

    def count(self, ptype: PacketType) -> int:
        return sum(1 for sp in self.packets() if sp.packet.type == ptype)

    def per_bank(self) -> Dict[int, List[Packet]]:
        """Paketliste pro Bank in Ausführungsreihenfolge"""
        banks: Dict[int, List[Packet]] = {}
        for sp in self.packets():
            banks.setdefault(sp.bank, []).append(sp.packet)
        return banks

    def dump(self, bank: int) -> bytes:
        return dump_schedule(self.per_bank().get(bank, []))


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FusedScalar:
    """
    Eine Schleife aus höchstens vier NoC_Scalar-Schritten in einem Paket

    ``original`` hält die ersetzten Instruktionen in Programmreihenfolge.
    """
    src: RowAddr
    dst: RowAddr
    body: Tuple[NocScalar, ...]
    iter_num: int
    original: Tuple[NocScalar, ...]

    def to_asm(self) -> str:
        return '\n'.join(instr.to_asm() for instr in self.original)


def _single_router_banks(geo_banks: int, rpb: int, mask: int) -> Optional[Tuple[int, ...]]:
    """Bankmenge, wenn die Maske in jeder Bank genau einen Router wählt"""
    banks = []
    for b in range(geo_banks):
        bits = (mask >> (b * rpb)) & ((1 << rpb) - 1)
        if bits == 0:
            continue
        if bits & (bits - 1):
            return None
        banks.append(b)
    return tuple(banks)


def _masks_compatible(geo: Geometry, a: int, b: int) -> bool:
    if a == b:
        return True
    sa = _single_router_banks(geo.banks, geo.rpb, a)
    sb = _single_router_banks(geo.banks, geo.rpb, b)
    return sa is not None and sa == sb


def _same_step(a: NocScalar, b: NocScalar) -> bool:
    return a.op == b.op and a.mask == b.mask and a.slot == b.slot and a.config.tag == b.config.tag


def _extends(geo: Geometry, chain: List[NocScalar], nxt: RowInstruction) -> bool:
    if not isinstance(nxt, NocScalar):
        return False
    head, prev = chain[0], chain[-1]
    if nxt.src != prev.dst or nxt.dst != nxt.src or nxt.slot != head.slot:
        return False
    if not _masks_compatible(geo, head.mask, nxt.mask):
        return False
    if nxt.config.init and any(c.mask == nxt.mask for c in chain):
        return False
    return True


def _chain_from(geo: Geometry, prog: Sequence[RowInstruction], i: int) -> List[NocScalar]:
    if not isinstance(prog[i], NocScalar):
        return []
    chain = [prog[i]]
    for nxt in prog[i + 1:]:
        if not _extends(geo, chain, nxt):
            break
        chain.append(nxt)
    return chain


def _period(chain: List[NocScalar]) -> Optional[int]:
    for p in range(1, PATH_STEPS + 1):
        if len(chain) % p or len(chain) == p:
            continue
        if all(_same_step(chain[i], chain[i - p]) and not chain[i].config.init
               for i in range(p, len(chain))):
            return p
    return None


def _strip_init(instr: NocScalar) -> NocScalar:
    return replace(instr, config=ITER_TAG if instr.config.tag else NO_ITER)


def _pack_chain(chain: List[NocScalar]) -> List[Union[NocScalar, FusedScalar]]:
    p = _period(chain)
    if p is not None:
        rounds = len(chain) // p
        out: List[Union[NocScalar, FusedScalar]] = []
        done = 0
        while done < rounds:
            n = min(MAX_ITER_NUM, rounds - done)
            part = chain[done * p:(done + n) * p]
            body = tuple(part[:p]) if done == 0 else tuple(_strip_init(s) for s in chain[:p])
            out.append(FusedScalar(part[0].src, part[-1].dst, body, n, tuple(part)))
            done += n
        return out

    out = []
    for start in range(0, len(chain), PATH_STEPS):
        part = chain[start:start + PATH_STEPS]
        if len(part) == 1:
            out.append(part[0])
        else:
            out.append(FusedScalar(part[0].src, part[-1].dst, tuple(part), 1, tuple(part)))
    return out


def fuse_paths(prog: Sequence[RowInstruction],
               hw: Optional[HardwareConfig] = None) -> List[Union[RowInstruction, FusedScalar]]:
    """
    Fasst verkettete NoC_Scalar-Läufe (DST der einen = SRC der nächsten) zu
    Pfadpaketen zusammen; periodische Läufe nutzen IterNum

    Bänke und Router pro Bank kommen aus ``hw`` (Default: HardwareConfig()).
    """
    geo = Geometry(hw or HardwareConfig())
    out: List[Union[RowInstruction, FusedScalar]] = []
    i = 0
    while i < len(prog):
        chain = _chain_from(geo, prog, i)
        if len(chain) < 2:
            out.append(prog[i])
            i += 1
            continue
        out.extend(_pack_chain(chain))
        i += len(chain)
    fused = sum(1 for instr in out if isinstance(instr, FusedScalar))
    if fused:
        logger.debug("fuse_paths: %d Instruktionen -> %d (%d Pfadpakete)", len(prog), len(out), fused)
    return out


# ---------------------------------------------------------------------------
# Übersetzung
# ---------------------------------------------------------------------------

def _addr(a: RowAddr, bank: int, k: int) -> Address:
    return bank, a.row, a.elem + k


def _step(coord: Coord, op: str = 'add', wr_reg: bool = False, iter_tag: bool = False) -> PathStep:
    return PathStep(coord[0], coord[1], wr_reg, iter_tag, op)


def _init_phase(geo: Geometry, instrs: Sequence[NocScalar]) -> Phase:
    phase = Phase('iter-init')
    for instr in instrs:
        if not instr.config.init:
            continue
        cfg = instr.config
        for b, lane, _ in geo.masked(instr.mask):
            coord = geo.coord(b, lane)
            pkt = Packet.build(PacketType.WRITE, [_step(coord, cfg.op, iter_tag=True)], cfg.arg, cfg.rounds)
            phase.packets.append(ScheduledPacket(pkt, b, coord, instr.slot))
    return phase


def _scalar(geo: Geometry, instr: NocScalar) -> List[Phase]:
    phases = [_init_phase(geo, [instr])]
    phase = Phase('scalar')
    for b, lane, k in geo.masked(instr.mask):
        coord = geo.coord(b, lane)
        pkt = Packet.build(PacketType.SCALAR, [_step(coord, instr.op, iter_tag=instr.config.tag)], iter_num=1)
        phase.packets.append(ScheduledPacket(pkt, b, coord, instr.slot,
                                             _addr(instr.src, b, k), _addr(instr.dst, b, k)))
    phases.append(phase)
    return phases


def _access(geo: Geometry, instr: NocAccess) -> List[Phase]:
    phase = Phase('access-' + instr.op.lower())
    for b, lane, k in geo.masked(instr.mask):
        coord = geo.coord(b, lane)
        if instr.op == 'Wr':
            pkt = Packet.build(PacketType.WRITE, [_step(coord, wr_reg=True)], instr.const)
            src = _addr(instr.src, b, k) if instr.src else None
            phase.packets.append(ScheduledPacket(pkt, b, coord, instr.slot, src=src))
        else:
            pkt = Packet.build(PacketType.READ, [_step(coord)])
            phase.packets.append(ScheduledPacket(pkt, b, coord, instr.slot, dst=_addr(instr.dst, b, k)))
    return [phase]


def _tree_setup(geo: Geometry, mask: int, root: int, what: str) -> Tuple[List[int], List[int]]:
    geo.check_mask(mask)
    participants = geo.banks_of(mask)
    if not participants:
        raise TranslationError(f"{what} mit leerer Maske")
    if root not in participants:
        raise TranslationError(f"{what}: Bank {root} liegt nicht in der Maske {mask:#x}")
    lanes = geo.lanes(mask, participants[0])
    for b in participants[1:]:
        if geo.lanes(mask, b) != lanes:
            raise TranslationError(f"{what}: Bänke {participants[0]} und {b} haben verschiedene Lanes")
    return participants, lanes


def _transfer_packet(t: Transfer, src: RowAddr, dst: RowAddr, reduce_type: PacketType) -> ScheduledPacket:
    """Abbildung der symbolischen Kollektiv-Rows auf die echten Row-Adressen"""
    def real(addr: Optional[Address]) -> Optional[Address]:
        if addr is None:
            return None
        bank, row, k = addr
        base = src if row == SRC_ROW else dst
        return bank, base.row, base.elem + k

    step = _step(t.node, t.op, wr_reg=t.wr_reg)
    ptype = {WRITE: PacketType.WRITE, COMPUTE: reduce_type, MOVE: PacketType.BROADCAST}[t.kind]
    return ScheduledPacket(Packet.build(ptype, [step]), t.src[0], t.src_router, t.slot, real(t.src), real(t.dst))


def _reduce(geo: Geometry, instr: NocReduce) -> List[Phase]:
    participants, lanes = _tree_setup(geo, instr.mask, instr.dst_bank, 'NoC_Reduce')
    elements = [(lane, k) for k, lane in enumerate(lanes)]
    phases = plan_reduce(participants, instr.dst_bank, instr.op, SRC_ROW, DST_ROW, elements, geo.coord)
    return [Phase('reduce', [_transfer_packet(t, instr.src, instr.dst, PacketType.REDUCE) for t in ph])
            for ph in phases]


def _bcast(geo: Geometry, instr: NocBCast) -> List[Phase]:
    participants, lanes = _tree_setup(geo, instr.mask, instr.src_bank, 'NoC_BCast')
    elements = [(lane, k) for k, lane in enumerate(lanes)]
    phases = plan_broadcast(participants, instr.src_bank, SRC_ROW, DST_ROW, elements, geo.coord)
    return [Phase('bcast', [_transfer_packet(t, instr.src, instr.dst, PacketType.BROADCAST) for t in ph])
            for ph in phases]


def exchange_partner(pos: int, offset: int, group: int) -> int:
    """Zielposition eines Elements: (x + Offset) % Group innerhalb seiner Gruppe"""
    base = pos - pos % group
    return base + (pos - base + offset) % group


def exchange_length(geo: Geometry, instr: NocExchange) -> int:
    return instr.length if instr.length is not None else geo.row_elements


def _exchange(geo: Geometry, instr: NocExchange) -> List[Phase]:
    negate = instr.op.endswith('-')
    across_banks = instr.op.startswith('T')
    length = exchange_length(geo, instr)
    span = geo.banks if across_banks else length
    if span % instr.group:
        raise TranslationError(f"Exchange-Gruppe {instr.group} teilt {span} nicht")

    config = Phase('exchange-config')
    for b in range(geo.banks):
        for lane in range(geo.rpb):
            coord = geo.coord(b, lane)
            for slot, value in ((NEG_SLOT, -ONE), (POS_SLOT, ONE)):
                pkt = Packet.build(PacketType.WRITE, [_step(coord, wr_reg=True)], value)
                config.packets.append(ScheduledPacket(pkt, b, coord, slot))

    phase = Phase('exchange')
    for b in range(geo.banks):
        for pos in range(length):
            if across_banks:
                src_bank, dst_bank = b, exchange_partner(b, instr.offset, instr.group)
                dst_pos, neg = pos, negate and dst_bank < src_bank
            else:
                src_bank = dst_bank = b
                dst_pos = exchange_partner(pos, instr.offset, instr.group)
                neg = negate and dst_pos < pos
            node = geo.coord(dst_bank, dst_pos)
            pkt = Packet.build(PacketType.EXCHANGE, [_step(node, 'mul')])
            phase.packets.append(ScheduledPacket(
                pkt, src_bank, geo.coord(src_bank, pos), NEG_SLOT if neg else POS_SLOT,
                _addr(instr.src, src_bank, pos), _addr(instr.dst, dst_bank, dst_pos)))
    return [config, phase]


def _fused(geo: Geometry, instr: FusedScalar) -> List[Phase]:
    head = instr.body[0]
    identical = all(s.mask == head.mask for s in instr.body)
    phase = Phase('path')
    try:
        for b in geo.banks_of(head.mask):
            lanes = geo.lanes(head.mask, b) if identical else [geo.lanes(head.mask, b)[0]]
            for k, lane in enumerate(lanes):
                steps = []
                for s in instr.body:
                    s_lane = lane if identical else geo.lanes(s.mask, b)[0]
                    steps.append(_step(geo.coord(b, s_lane), s.op, iter_tag=s.config.tag))
                pkt = Packet.build(PacketType.SCALAR, steps, iter_num=instr.iter_num)
                phase.packets.append(ScheduledPacket(pkt, b, geo.coord(b, lane), head.slot,
                                                     _addr(instr.src, b, k), _addr(instr.dst, b, k)))
    except PacketFieldError:
        # Pfad nicht darstellbar: ungefusst übersetzen
        logger.debug("Pfad mit %d Schritten nicht kodierbar, übersetze ungefusst", len(instr.body))
        phases: List[Phase] = []
        for s in instr.original:
            phases.extend(_scalar(geo, s))
        return phases
    return [_init_phase(geo, instr.original), phase]


def _sram(geo: Geometry, instr: RowInstruction) -> List[Phase]:
    return [Phase('sram', sram=instr)]


_TRANSLATORS = {
    NocScalar: _scalar,
    NocAccess: _access,
    NocReduce: _reduce,
    NocBCast: _bcast,
    NocExchange: _exchange,
    FusedScalar: _fused,
    SramWrite: _sram,
    SramCompute: _sram,
}


def translate(prog: Sequence[Union[RowInstruction, FusedScalar]], hw: HardwareConfig) -> Schedule:
    """
    Übersetzt ein (ggf. gefustes) Programm in einen Paketplan

    Raises:
        TranslationError: Maske zu breit, Zielbank außerhalb der Maske, ungleiche Lanes
    """
    geo = Geometry(hw)
    schedule = Schedule()
    for instr in prog:
        translator = _TRANSLATORS.get(type(instr))
        if translator is None:
            raise TranslationError(f"Keine Übersetzung für {type(instr).__name__}")
        schedule.phases.extend(p for p in translator(geo, instr) if p.packets or p.sram is not None)
    logger.debug("translate: %d Instruktionen -> %d Phasen, %d Pakete",
                 len(prog), len(schedule.phases), len(schedule.packets()))
    return schedule


def _alu_keys(phase: Phase) -> Set[Tuple[Coord, int]]:
    return {(step.coord, sp.slot) for sp in phase.packets for step in sp.packet.active_steps()}


def co_schedule(schedules: Sequence[Schedule]) -> Schedule:
    """
    Legt unabhängige Paketpläne phasenweise übereinander

    Die k-ten NoC-Phasen aller Pläne werden gemeinsam injiziert, SRAM-Phasen
    bleiben einzeln. Zwei Rechenflüsse teilen sich so das Mesh, solange sie
    verschiedene ALU-Slots nutzen.

    Raises:
        TranslationError: zwei Pläne belegen in einer Phase denselben Router-Slot
    """
    merged = Schedule()
    for group in itertools.zip_longest(*(s.phases for s in schedules)):
        phases = [p for p in group if p is not None]
        merged.phases.extend(p for p in phases if p.sram is not None)
        noc = [p for p in phases if p.sram is None]
        if not noc:
            continue
        seen: Set[Tuple[Coord, int]] = set()
        for phase in noc:
            keys = _alu_keys(phase)
            if keys & seen:
                raise TranslationError(f"Phase {phase.label}: Router-Slot doppelt belegt")
            seen |= keys
        merged.phases.append(Phase(noc[0].label, [sp for p in noc for sp in p.packets]))
    return merged
