"""
Reduce- und Broadcast-Bäume über die Bänke eines Kanals

Die Teilnehmer werden so rotiert, dass die Zielbank vorne steht; Ebene l
paart die Positionen i und i + 2^l. Der Knoten eines Paares sitzt im Router
der linken Bank (Spalte = Lane des Elements), die ALU-Slots wechseln pro Ebene.
Ablauf je Ebene: erst schreibt das rechte Kind seinen Wert in ArgReg, dann
rechnet das linke Kind dagegen und legt das Ergebnis im DST-Row ab.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from config.hardware import NocSpec
from compair.numerics import Bf16, ZERO, bf16_binop
from .mesh import COMPUTE, MOVE, WRITE, Flit, Hop, Mesh
from .router import Coord

logger = logging.getLogger(__name__)

Address = Tuple[int, int, int]  # (bank, row, element)

# Interne Row-IDs für die direkten Kollektiv-Aufrufe
SRC_ROW = 0
DST_ROW = 1


class RowStore:
    """DRAM-Inhalt eines Kanals auf Elementebene (BF16, Default 0)"""

    def __init__(self, cells: Optional[Dict[Address, Bf16]] = None):
        self.cells: Dict[Address, Bf16] = dict(cells or {})

    def read(self, addr: Address) -> Bf16:
        return self.cells.get(addr, ZERO)

    def write(self, addr: Address, value: Bf16) -> None:
        self.cells[addr] = value

    def row(self, bank: int, row: int, length: int, start: int = 0) -> List[Bf16]:
        return [self.read((bank, row, start + i)) for i in range(length)]

    def set_row(self, bank: int, row: int, values: Sequence[Bf16], start: int = 0) -> None:
        for i, v in enumerate(values):
            self.write((bank, row, start + i), v)

    def snapshot(self) -> Dict[Address, int]:
        """Bitmuster aller nicht-null Zellen, für Gleichheitsvergleiche"""
        return {k: v.bits for k, v in sorted(self.cells.items()) if v.bits != 0}


@dataclass(frozen=True)
class Transfer:
    """Ein geplantes Flit eines Kollektivs oder Exchange"""
    kind: str
    src: Address
    src_router: Coord
    node: Coord
    slot: int = 0
    op: str = 'add'
    wr_reg: bool = False
    dst: Optional[Address] = None


Phase = List[Transfer]


@dataclass
class CollectiveResult:
    cycles: int
    values: Union[List[Bf16], Dict[int, List[Bf16]]]
    combines: int = 0
    hops: int = 0
    flits: int = 0


def banks_from_mask(banks: Union[int, Iterable[int]]) -> List[int]:
    """Bitmaske oder Iterable -> sortierte Bankliste"""
    if isinstance(banks, int):
        return [b for b in range(banks.bit_length()) if banks >> b & 1]
    return sorted(set(banks))


def lane_coord(spec: NocSpec, banks_per_channel: int, bank: int, lane: int) -> Coord:
    """Router der Lane ``lane`` einer Bank (Routerindex = bank * rpb + lane)"""
    rpb = spec.routers // banks_per_channel
    index = bank * rpb + lane % rpb
    return index % spec.mesh_x, index // spec.mesh_x


def rotate(participants: Sequence[int], root: int) -> List[int]:
    ordered = sorted(participants)
    i = ordered.index(root)
    return ordered[i:] + ordered[:i]


def tree_levels(order: Sequence[int]) -> List[List[Tuple[int, int]]]:
    """Paare (links, rechts) je Ebene; links ist der Knoten"""
    levels = []
    stride = 1
    k = len(order)
    while stride < k:
        levels.append([(order[i], order[i + stride]) for i in range(0, k, 2 * stride) if i + stride < k])
        stride *= 2
    return levels


def tree_reduce(values: Sequence[Bf16], op: str) -> Bf16:
    """Baumgeordnete BF16-Reduktion in derselben Paarungsreihenfolge wie das Mesh"""
    vals = list(values)
    stride = 1
    while stride < len(vals):
        for i in range(0, len(vals), 2 * stride):
            if i + stride < len(vals):
                vals[i] = bf16_binop(op, vals[i], vals[i + stride])
        stride *= 2
    return vals[0]


def plan_reduce(participants: Sequence[int], root: int, op: str, src_row: int, dst_row: int,
                elements: Sequence[Tuple[int, int]],
                coord: Callable[[int, int], Coord]) -> List[Phase]:
    """
    Phasen eines Reduce-Baums

    Args:
        elements: (lane, element) je parallelem Baum; höchstens ein Element pro Lane
        coord: (bank, lane) -> Router
    """
    order = rotate(participants, root)
    levels = tree_levels(order)
    phases: List[Phase] = []
    where = {(b, elem): src_row for b in order for _, elem in elements}
    for level, pairs in enumerate(levels):
        slot = level % 2
        writes: Phase = []
        combines: Phase = []
        for lane, elem in elements:
            for left, right in pairs:
                node = coord(left, lane)
                writes.append(Transfer(WRITE, (right, where[(right, elem)], elem), coord(right, lane),
                                       node, slot=slot, wr_reg=True))
                combines.append(Transfer(COMPUTE, (left, where[(left, elem)], elem), node, node,
                                         slot=slot, op=op, wr_reg=True, dst=(left, dst_row, elem)))
                where[(left, elem)] = dst_row
        phases.append(writes)
        phases.append(combines)
    if len(order) == 1:
        phases.append([Transfer(MOVE, (root, src_row, elem), coord(root, lane), coord(root, lane),
                                dst=(root, dst_row, elem)) for lane, elem in elements])
    return phases


def plan_broadcast(participants: Sequence[int], root: int, src_row: int, dst_row: int,
                   elements: Sequence[Tuple[int, int]],
                   coord: Callable[[int, int], Coord]) -> List[Phase]:
    """Umkehrung des Reduce-Baums: von oben nach unten verteilen"""
    order = rotate(participants, root)
    levels = tree_levels(order)
    phases: List[Phase] = [[Transfer(MOVE, (root, src_row, elem), coord(root, lane), coord(root, lane),
                                     dst=(root, dst_row, elem)) for lane, elem in elements]]
    for pairs in reversed(levels):
        phase: Phase = []
        for lane, elem in elements:
            for left, right in pairs:
                row = src_row if left == root else dst_row
                phase.append(Transfer(MOVE, (left, row, elem), coord(left, lane), coord(right, lane),
                                      dst=(right, dst_row, elem)))
        phases.append(phase)
    return phases


def element_batches(vector_len: int, lanes: int) -> List[List[Tuple[int, int]]]:
    """Element e läuft auf Lane e % lanes; ein Element pro Lane und Durchgang"""
    return [[(e % lanes, e) for e in range(start, min(start + lanes, vector_len))]
            for start in range(0, vector_len, lanes)]


def transfer_to_flit(t: Transfer, data: Bf16) -> Flit:
    return Flit(kind=t.kind, data=data, steps=[Hop(t.node[0], t.node[1], wr_reg=t.wr_reg, op=t.op)],
                src=t.src_router, slot=t.slot, tag=t.dst)


def execute_phases(mesh: Mesh, store: RowStore, phases: Iterable[Phase],
                   to_flit: Callable[[Transfer, Bf16], Flit] = transfer_to_flit) -> int:
    """
    Führt Phasen nacheinander aus; jede Phase startet, wenn die vorige im DRAM ist

    Returns:
        int: Zyklus, in dem die letzte Phase abgeschlossen war
    """
    start = mesh.cycle
    for phase in phases:
        if not phase:
            continue
        flits = []
        for t in phase:
            flits.append(mesh.inject(to_flit(t, store.read(t.src)), at_cycle=start))
        mesh.run_until_drained()
        for flit in flits:
            if flit.tag is not None:
                store.write(flit.tag, flit.data)
        start = max(f.done_cycle for f in flits)
    return start


def _count(phases: List[Phase], kind: str) -> int:
    return sum(1 for phase in phases for t in phase if t.kind == kind)


def collective_reduce(spec: NocSpec, banks: Union[int, Iterable[int]], op: str, dst_bank: int,
                      values: Mapping[int, Sequence[Bf16]], banks_per_channel: int = 16,
                      mesh: Optional[Mesh] = None) -> CollectiveResult:
    """
    Reduziert je Element die Werte aller Teilnehmerbänke in die Zielbank

    Raises:
        ValueError: leere Maske oder Zielbank nicht in der Maske
    """
    participants = banks_from_mask(banks)
    if not participants:
        raise ValueError("Reduce mit leerer Bankmaske")
    if dst_bank not in participants:
        raise ValueError(f"Zielbank {dst_bank} liegt nicht in der Maske {participants}")
    vector_len = len(values[participants[0]])
    mesh = mesh or Mesh(spec)
    store = RowStore()
    for b in participants:
        store.set_row(b, SRC_ROW, values[b])

    coord = lambda bank, lane: lane_coord(spec, banks_per_channel, bank, lane)
    lanes = spec.routers // banks_per_channel
    start = mesh.cycle
    combines = 0
    for batch in element_batches(vector_len, lanes):
        phases = plan_reduce(participants, dst_bank, op, SRC_ROW, DST_ROW, batch, coord)
        combines += _count(phases, COMPUTE)
        execute_phases(mesh, store, phases)
    end = max((f.done_cycle for f in mesh.delivered), default=start)
    logger.debug("reduce %s über %d Bänke, %d Elemente: %d Zyklen", op, len(participants),
                 vector_len, end - start)
    return CollectiveResult(cycles=end - start, values=store.row(dst_bank, DST_ROW, vector_len),
                            combines=combines, hops=mesh.stats.hops, flits=mesh.stats.injected)


def collective_broadcast(spec: NocSpec, src_bank: int, banks: Union[int, Iterable[int]],
                         values: Sequence[Bf16], banks_per_channel: int = 16,
                         mesh: Optional[Mesh] = None) -> CollectiveResult:
    """Verteilt den Vektor der Quellbank an alle Bänke der Maske"""
    participants = banks_from_mask(banks)
    if not participants:
        raise ValueError("Broadcast mit leerer Bankmaske")
    if src_bank not in participants:
        participants = sorted(participants + [src_bank])
    mesh = mesh or Mesh(spec)
    store = RowStore()
    store.set_row(src_bank, SRC_ROW, values)

    coord = lambda bank, lane: lane_coord(spec, banks_per_channel, bank, lane)
    lanes = spec.routers // banks_per_channel
    start = mesh.cycle
    for batch in element_batches(len(values), lanes):
        execute_phases(mesh, store, plan_broadcast(participants, src_bank, SRC_ROW, DST_ROW, batch, coord))
    end = max((f.done_cycle for f in mesh.delivered), default=start)
    delivered = {b: store.row(b, DST_ROW, len(values)) for b in participants}
    return CollectiveResult(cycles=end - start, values=delivered, hops=mesh.stats.hops,
                            flits=mesh.stats.injected)
