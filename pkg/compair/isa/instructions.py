"""
Row-Level-ISA: Instruktionen, Assembler und Disassembler

Textformat: eine Instruktion pro Zeile, Mnemonic gefolgt von kommagetrennten
Operanden. ``#`` und ``;`` leiten Kommentare ein. Row-Adressen sind
``row`` oder ``row:element`` (hex oder dezimal), ``-`` steht für "keine Adresse".
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Union

from compair.numerics import Bf16, OP_SYMBOLS, SYMBOL_OF

MASK_BITS = 64
SCALAR_OPS = ('add', 'sub', 'mul', 'div')
EXCHANGE_OPS = ('T+', 'T-', 'R+', 'R-')
MAX_ITER_ROUNDS = 15


class AssemblyError(ValueError):
    """Fehler beim Parsen, mit Zeilennummer (1-basiert)"""

    def __init__(self, message: str, line_no: int = 0):
        self.line_no = line_no
        prefix = f"Zeile {line_no}: " if line_no else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class RowAddr:
    row: int
    elem: int = 0

    def offset(self, k: int) -> 'RowAddr':
        return RowAddr(self.row, self.elem + k)

    def to_asm(self) -> str:
        return f"{self.row:#x}" if self.elem == 0 else f"{self.row:#x}:{self.elem}"


@dataclass(frozen=True)
class IterConfig:
    """Config-Operand von NoC_Scalar: '-', 'iter' oder 'iter(arg,op,rounds)'"""
    tag: bool = False
    init: bool = False
    arg: Bf16 = Bf16(0x3F80)
    op: str = 'add'
    rounds: int = 0

    def to_asm(self) -> str:
        if not self.tag:
            return '-'
        if not self.init:
            return 'iter'
        return f"iter({self.arg.to_float():g},{SYMBOL_OF[self.op]},{self.rounds})"


NO_ITER = IterConfig()
ITER_TAG = IterConfig(tag=True)


def _mask(mask: int) -> str:
    return f"{mask:#x}"


def _slot(slot: int) -> str:
    return f", slot={slot}" if slot else ""


@dataclass(frozen=True)
class NocScalar:
    op: str
    src: RowAddr
    dst: RowAddr
    mask: int
    config: IterConfig = NO_ITER
    slot: int = 0

    def to_asm(self) -> str:
        return (f"NoC_Scalar {SYMBOL_OF[self.op]}, {self.src.to_asm()}, {self.dst.to_asm()}, "
                f"{_mask(self.mask)}, {self.config.to_asm()}{_slot(self.slot)}")


@dataclass(frozen=True)
class NocAccess:
    op: str  # 'Rd' | 'Wr'
    src: Optional[RowAddr]
    dst: Optional[RowAddr]
    mask: int
    const: Bf16 = Bf16(0)
    slot: int = 0

    def to_asm(self) -> str:
        src = self.src.to_asm() if self.src else '-'
        dst = self.dst.to_asm() if self.dst else '-'
        return (f"NoC_Access {self.op}, {src}, {dst}, {_mask(self.mask)}, "
                f"{self.const.to_float():g}{_slot(self.slot)}")


@dataclass(frozen=True)
class NocBCast:
    src: RowAddr
    dst: RowAddr
    mask: int
    src_bank: int

    def to_asm(self) -> str:
        return f"NoC_BCast {self.src.to_asm()}, {self.dst.to_asm()}, {_mask(self.mask)}, {self.src_bank}"


@dataclass(frozen=True)
class NocReduce:
    op: str
    src: RowAddr
    dst: RowAddr
    mask: int
    dst_bank: int

    def to_asm(self) -> str:
        return (f"NoC_Reduce {SYMBOL_OF[self.op]}, {self.src.to_asm()}, {self.dst.to_asm()}, "
                f"{_mask(self.mask)}, {self.dst_bank}")


@dataclass(frozen=True)
class NocExchange:
    op: str
    src: RowAddr
    dst: RowAddr
    offset: int
    group: int
    length: Optional[int] = None

    def to_asm(self) -> str:
        tail = f", {self.length}" if self.length is not None else ""
        return (f"NoC_Exchange {self.op}, {self.src.to_asm()}, {self.dst.to_asm()}, "
                f"{self.offset}, {self.group}{tail}")


@dataclass(frozen=True)
class SramWrite:
    addr: RowAddr
    length: int

    def to_asm(self) -> str:
        return f"SRAM_Write {self.addr.to_asm()}, {self.length}"


@dataclass(frozen=True)
class SramCompute:
    src: RowAddr
    dst: RowAddr
    length: int

    def to_asm(self) -> str:
        return f"SRAM_Compute {self.src.to_asm()}, {self.dst.to_asm()}, {self.length}"


RowInstruction = Union[NocScalar, NocAccess, NocBCast, NocReduce, NocExchange, SramWrite, SramCompute]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_ITER_RE = re.compile(r'^iter\(\s*([^,]+)\s*,\s*([^,]+)\s*,\s*(\d+)\s*\)$')


def _split_operands(text: str) -> List[str]:
    """Kommas innerhalb von Klammern trennen keine Operanden"""
    parts, depth, current = [], 0, ''
    for ch in text:
        if ch == '(':
            depth += 1
        elif ch == ')':
            depth -= 1
        if ch == ',' and depth == 0:
            parts.append(current.strip())
            current = ''
        else:
            current += ch
    if current.strip():
        parts.append(current.strip())
    return parts


def _int(token: str, what: str) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise AssemblyError(f"{what} ist keine Zahl: {token!r}")


def _addr(token: str, optional: bool = False) -> Optional[RowAddr]:
    if token == '-':
        if optional:
            return None
        raise AssemblyError("Adresse fehlt")
    row, _, elem = token.partition(':')
    addr = RowAddr(_int(row, 'Row'), _int(elem, 'Element') if elem else 0)
    if addr.row < 0 or addr.elem < 0:
        raise AssemblyError(f"Negative Adresse: {token}")
    return addr


def _op(token: str) -> str:
    op = OP_SYMBOLS.get(token, token)
    if op not in SCALAR_OPS:
        raise AssemblyError(f"Unbekannte Operation: {token!r}")
    return op


def _mask_value(token: str) -> int:
    mask = _int(token, 'Maske')
    if mask < 0 or mask.bit_length() > MASK_BITS:
        raise AssemblyError(f"Maske {token} ist breiter als {MASK_BITS} Bit")
    return mask


def _float(token: str) -> Bf16:
    try:
        return Bf16.from_float(float(token))
    except ValueError:
        raise AssemblyError(f"Konstante ist keine Zahl: {token!r}")


def _config(token: str) -> IterConfig:
    if token == '-':
        return NO_ITER
    if token == 'iter':
        return ITER_TAG
    m = _ITER_RE.match(token)
    if not m:
        raise AssemblyError(f"Ungültiger Config-Operand: {token!r}")
    rounds = int(m.group(3))
    if rounds > MAX_ITER_ROUNDS:
        raise AssemblyError(f"Höchstens {MAX_ITER_ROUNDS} Iterationsrunden, nicht {rounds}")
    return IterConfig(tag=True, init=True, arg=_float(m.group(1)), op=_op(m.group(2)), rounds=rounds)


def _trailing_slot(ops: List[str]) -> int:
    if ops and ops[-1].startswith('slot='):
        slot = _int(ops.pop()[5:], 'Slot')
        if slot not in (0, 1):
            raise AssemblyError(f"Slot muss 0 oder 1 sein, nicht {slot}")
        return slot
    return 0


def _expect(mnemonic: str, ops: List[str], counts) -> None:
    if len(ops) not in counts:
        expected = ' oder '.join(str(c) for c in counts)
        raise AssemblyError(f"{mnemonic} erwartet {expected} Operanden, bekam {len(ops)}")


def _parse_scalar(ops):
    slot = _trailing_slot(ops)
    _expect('NoC_Scalar', ops, (4, 5))
    config = _config(ops[4]) if len(ops) == 5 else NO_ITER
    return NocScalar(_op(ops[0]), _addr(ops[1]), _addr(ops[2]), _mask_value(ops[3]), config, slot)


def _parse_access(ops):
    slot = _trailing_slot(ops)
    _expect('NoC_Access', ops, (4, 5))
    kind = ops[0].capitalize()
    if kind not in ('Rd', 'Wr'):
        raise AssemblyError(f"NoC_Access kennt nur Rd/Wr, nicht {ops[0]!r}")
    const = _float(ops[4]) if len(ops) == 5 else Bf16(0)
    src, dst = _addr(ops[1], optional=True), _addr(ops[2], optional=True)
    if kind == 'Rd' and dst is None:
        raise AssemblyError("NoC_Access Rd braucht eine Zieladresse")
    return NocAccess(kind, src, dst, _mask_value(ops[3]), const, slot)


def _parse_bcast(ops):
    _expect('NoC_BCast', ops, (4,))
    return NocBCast(_addr(ops[0]), _addr(ops[1]), _mask_value(ops[2]), _int(ops[3], 'SrcBank'))


def _parse_reduce(ops):
    _expect('NoC_Reduce', ops, (5,))
    return NocReduce(_op(ops[0]), _addr(ops[1]), _addr(ops[2]), _mask_value(ops[3]), _int(ops[4], 'DstBank'))


def _parse_exchange(ops):
    _expect('NoC_Exchange', ops, (5, 6))
    if ops[0] not in EXCHANGE_OPS:
        raise AssemblyError(f"Unbekannte Exchange-Variante: {ops[0]!r}")
    offset, group = _int(ops[3], 'Offset'), _int(ops[4], 'Group')
    if not group > offset >= 1:
        raise AssemblyError(f"Exchange braucht Group > Offset >= 1 (Offset {offset}, Group {group})")
    length = _int(ops[5], 'Length') if len(ops) == 6 else None
    if length is not None and length <= 0:
        raise AssemblyError("Exchange-Länge muss positiv sein")
    return NocExchange(ops[0], _addr(ops[1]), _addr(ops[2]), offset, group, length)


def _parse_sram_write(ops):
    _expect('SRAM_Write', ops, (2,))
    return SramWrite(_addr(ops[0]), _int(ops[1], 'Length'))


def _parse_sram_compute(ops):
    _expect('SRAM_Compute', ops, (3,))
    return SramCompute(_addr(ops[0]), _addr(ops[1]), _int(ops[2], 'Length'))


PARSERS = {
    'NoC_Scalar': _parse_scalar,
    'NoC_Access': _parse_access,
    'NoC_BCast': _parse_bcast,
    'NoC_Reduce': _parse_reduce,
    'NoC_Exchange': _parse_exchange,
    'SRAM_Write': _parse_sram_write,
    'SRAM_Compute': _parse_sram_compute,
}


def assemble(text: str) -> List[RowInstruction]:
    """
    Übersetzt Assembly-Text in Row-Instruktionen

    Raises:
        AssemblyError: unbekannter Mnemonic, falsche Operandenzahl, zu breite Maske
    """
    program: List[RowInstruction] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = re.split(r'[#;]', raw, maxsplit=1)[0].strip()
        if not line:
            continue
        mnemonic, _, rest = line.partition(' ')
        parser = PARSERS.get(mnemonic)
        if parser is None:
            raise AssemblyError(f"Unbekannter Mnemonic: {mnemonic!r}", line_no)
        try:
            program.append(parser(_split_operands(rest)))
        except AssemblyError as e:
            if e.line_no:
                raise
            raise AssemblyError(str(e), line_no) from None
    return program


def disassemble(program: List[RowInstruction]) -> str:
    return '\n'.join(instr.to_asm() for instr in program) + ('\n' if program else '')
