"""
Generatoren für Row-Level-Programme der Nichtlinear-Kernels

Die Programme entstehen aus den Assembly-Vorlagen unter ``asm/`` und werden
als Text geliefert; ausgeführt werden sie über den Assembler.
"""

from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Sequence

from compair.isa import RowAddr
from compair.numerics import Bf16

ASM_DIR = Path(__file__).parent / 'asm'

BANKS = 16
ROUTERS_PER_BANK = 4
TAYLOR_ORDER = 6
SQRT_ROUNDS = 4

# (Lanes der drei Schritte, ALU-Slot) je Rechenfluss
EXP_FLOWS = {
    0: ((0, 1, 2), 0),
    1: ((3, 2, 1), 1),
}


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return (ASM_DIR / f'{name}.asm').read_text(encoding='utf-8')


def lane_mask(lanes: Iterable[int], banks: Iterable[int] = range(BANKS), rpb: int = ROUTERS_PER_BANK) -> int:
    """Router-Maske: die gegebenen Lanes in jeder der Bänke"""
    mask = 0
    for b in banks:
        for lane in lanes:
            mask |= 1 << (b * rpb + lane)
    return mask


def addr(row: int, elem: int = 0) -> str:
    return RowAddr(row, elem).to_asm()


def const(value: Bf16) -> str:
    """Exakte Textform eines BF16-Werts"""
    return repr(value.to_float())


def _slot(slot: int) -> str:
    return f", slot={slot}" if slot else ""


def exp_program(x: RowAddr, acc: RowAddr, flow: int = 0, order: int = TAYLOR_ORDER,
                banks: Sequence[int] = range(BANKS), rpb: int = ROUTERS_PER_BANK) -> str:
    """
    Horner-Taylor-Exponent für ein Element pro Bank

    Args:
        x: Eingabe-Adresse
        acc: Ergebnis-Adresse (wird überschrieben)
        flow: 0 oder 1, wählt Router-Lanes und ALU-Slot
        order: Anzahl Runden
    """
    if flow not in EXP_FLOWS:
        raise ValueError(f"Unbekannter Fluss {flow}")
    if not 1 <= order <= 15:
        raise ValueError(f"Taylor-Ordnung {order} außerhalb 1..15")
    lanes, slot = EXP_FLOWS[flow]
    masks = {f'm{i}': f"{lane_mask([lane], banks, rpb):#x}" for i, lane in enumerate(lanes)}
    acc_s = acc.to_asm()
    rounds = []
    for r in range(order):
        config = f"iter(1.0,-=,{order})" if r == 0 else 'iter'
        rounds.append(load_template('exp_round').format(acc=acc_s, config=config, slot=_slot(slot), **masks))
    return load_template('exp').format(x=x.to_asm(), acc=acc_s, order=order, slot=_slot(slot),
                                       rounds=''.join(rounds), **masks)


def rope_program(head_dim: int, src: RowAddr, dst: RowAddr) -> str:
    if head_dim <= 0 or head_dim % 2:
        raise ValueError(f"head_dim muss gerade und positiv sein, nicht {head_dim}")
    return load_template('rope').format(src=src.to_asm(), dst=dst.to_asm(), length=head_dim)


def sqrt_program(x: RowAddr, y: RowAddr, seed: Bf16, rounds: int = SQRT_ROUNDS,
                 banks: Sequence[int] = range(BANKS), rpb: int = ROUTERS_PER_BANK) -> str:
    masks = {f'm{i}': f"{lane_mask([i], banks, rpb):#x}" for i in range(3)}
    body = ''.join(load_template('sqrt_round').format(x=x.to_asm(), y=y.to_asm(), **masks)
                   for _ in range(rounds))
    return load_template('sqrt').format(y=y.to_asm(), seed=const(seed), rounds=body, **masks)


def max_program(a: RowAddr, b: RowAddr, diff: RowAddr, lanes: int = 1,
                banks: Sequence[int] = range(BANKS), rpb: int = ROUTERS_PER_BANK) -> str:
    """Differenzbildung eines Compare-and-Select-Schritts über ``lanes`` Elemente"""
    return load_template('max_step').format(a=a.to_asm(), b=b.to_asm(), diff=diff.to_asm(),
                                            mask=f"{lane_mask(range(lanes), banks, rpb):#x}")


def max_tree_level(src: int, tmp: int, diff: int, span: int, left: Sequence[int],
                   rpb: int = ROUTERS_PER_BANK) -> str:
    """
    Eine Ebene des Bank-Maximums

    Ein Bank-Exchange holt src:0 der Bank i + span nach tmp:0 der Bank i,
    danach bilden die linken Bänke tmp - src.
    """
    return (f"NoC_Exchange T+, {addr(src)}, {addr(tmp)}, {span}, {2 * span}, 1\n"
            + max_program(RowAddr(tmp), RowAddr(src), RowAddr(diff), lanes=1, banks=left, rpb=rpb))


# ---------------------------------------------------------------------------
# Elementweise Bausteine über n Elemente pro Bank (4 Elemente pro Instruktion)
# ---------------------------------------------------------------------------

def _chunks(n: int, rpb: int = ROUTERS_PER_BANK) -> List[range]:
    return [range(start, min(start + rpb, n)) for start in range(0, n, rpb)]


def elementwise(op: str, src: int, dst: int, n: int, arg_row: int = None, arg_value: Bf16 = None,
                arg_elem: int = None, banks: Sequence[int] = range(BANKS), rpb: int = ROUTERS_PER_BANK) -> str:
    """
    dst[i] = src[i] <op> arg für i < n

    arg stammt je nach Parameter elementweise aus ``arg_row``, aus der
    Konstante ``arg_value`` oder (für alle Elemente gleich) aus ``arg_row:arg_elem``.
    """
    lines = []
    for chunk in _chunks(n, rpb):
        start = chunk.start
        mask = f"{lane_mask(range(len(chunk)), banks, rpb):#x}"
        if arg_value is not None:
            lines.append(f"NoC_Access Wr, -, -, {mask}, {const(arg_value)}")
        elif arg_elem is not None:
            for lane in range(len(chunk)):
                lines.append(f"NoC_Access Wr, {addr(arg_row, arg_elem)}, -, "
                             f"{lane_mask([lane], banks, rpb):#x}, 0")
        else:
            lines.append(f"NoC_Access Wr, {addr(arg_row, start)}, -, {mask}, 0")
        lines.append(f"NoC_Scalar {op}, {addr(src, start)}, {addr(dst, start)}, {mask}, -")
    return '\n'.join(lines) + '\n'


def fill(row: int, elem: int, value: Bf16, banks: Sequence[int] = range(BANKS),
         rpb: int = ROUTERS_PER_BANK) -> str:
    """Schreibt eine Konstante über ArgReg und Rd in row:elem jeder Bank"""
    mask = f"{lane_mask([0], banks, rpb):#x}"
    return (f"NoC_Access Wr, -, -, {mask}, {const(value)}\n"
            f"NoC_Access Rd, -, {addr(row, elem)}, {mask}, 0\n")


def bank_sum(src: int, dst: int, n: int, banks: Sequence[int] = range(BANKS),
             rpb: int = ROUTERS_PER_BANK) -> str:
    """dst:0 = Summe von src[0..n) innerhalb jeder Bank, sequentiell über Lane 0"""
    mask = f"{lane_mask([0], banks, rpb):#x}"
    lines = [fill(dst, 0, Bf16(0), banks, rpb).rstrip('\n')]
    for i in range(n):
        lines.append(f"NoC_Access Wr, {addr(src, i)}, -, {mask}, 0")
        lines.append(f"NoC_Scalar +=, {addr(dst)}, {addr(dst)}, {mask}, -")
    return '\n'.join(lines) + '\n'


def reduce_broadcast(op: str, src: int, tmp: int, dst: int, root: int = 0,
                     banks: Sequence[int] = range(BANKS), rpb: int = ROUTERS_PER_BANK) -> str:
    """Reduce von src:0 aller Bänke in die Wurzel, danach Broadcast nach dst:0"""
    mask = f"{lane_mask([0], banks, rpb):#x}"
    return (f"NoC_Reduce {op}, {addr(src)}, {addr(tmp)}, {mask}, {root}\n"
            f"NoC_BCast {addr(tmp)}, {addr(dst)}, {mask}, {root}\n")
