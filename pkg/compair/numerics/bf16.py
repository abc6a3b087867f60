"""
Bit-exakte BF16-Arithmetik

Jede Operation wird in binary32 gerechnet und per round-to-nearest-even
auf BF16 (1 Vorzeichen, 8 Exponent, 7 Mantisse) zurückgerundet.
Subnormale Werte bleiben erhalten, NaN propagiert.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

OPS = ('add', 'sub', 'mul', 'div')

# Assembler-Schreibweise der Curry-ALU
OP_SYMBOLS = {'+=': 'add', '-=': 'sub', '*=': 'mul', '/=': 'div'}
SYMBOL_OF = {v: k for k, v in OP_SYMBOLS.items()}

_NUMPY_OPS = {
    'add': np.add,
    'sub': np.subtract,
    'mul': np.multiply,
    'div': np.divide,
}


def round_f32_bits(u32: np.ndarray) -> np.ndarray:
    """binary32-Bitmuster -> BF16-Bitmuster (round-to-nearest-even, NaN bleibt quiet NaN)"""
    u32 = np.asarray(u32, dtype=np.uint32)
    is_nan = ((u32 & np.uint32(0x7F800000)) == np.uint32(0x7F800000)) & \
        ((u32 & np.uint32(0x007FFFFF)) != 0)
    lsb = (u32 >> np.uint32(16)) & np.uint32(1)
    rounded = ((u32.astype(np.uint64) + 0x7FFF + lsb) >> 16).astype(np.uint32) & np.uint32(0xFFFF)
    quiet = ((u32 >> np.uint32(16)) | np.uint32(0x0040)) & np.uint32(0xFFFF)
    return np.where(is_nan, quiet, rounded).astype(np.uint16)


def bits_to_f32(bits: np.ndarray) -> np.ndarray:
    """BF16-Bitmuster -> binary32-Werte (exakt)"""
    b = np.asarray(bits, dtype=np.uint32) << np.uint32(16)
    return b.view(np.float32)


def f32_to_bits(values: np.ndarray) -> np.ndarray:
    return round_f32_bits(np.asarray(values, dtype=np.float32).view(np.uint32))


def binop_bits(op: str, a_bits: np.ndarray, b_bits: np.ndarray) -> np.ndarray:
    """Vektorisierte Variante von bf16_binop auf Bitmustern"""
    fa = bits_to_f32(a_bits)
    fb = bits_to_f32(b_bits)
    with np.errstate(all='ignore'):
        result = _NUMPY_OPS[op](fa, fb).astype(np.float32)
    return round_f32_bits(result.view(np.uint32))


@dataclass(frozen=True)
class Bf16:
    """Ein BF16-Wert als 16-Bit-Muster"""
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= 0xFFFF:
            raise ValueError(f"BF16-Bitmuster außerhalb 16 Bit: {self.bits:#x}")

    @classmethod
    def from_float(cls, value: Union[float, int]) -> 'Bf16':
        """
        Rundet einen binary64-Wert per round-to-nearest-even auf BF16

        Der Zwischenschritt über binary32 rundet auf ungerade (round-to-odd).
        """
        value = float(value)
        with np.errstate(all='ignore'):
            f32 = np.float32(value)
            u32 = np.array([f32], dtype=np.float32).view(np.uint32)
            if np.isfinite(f32) and float(f32) != value and not (int(u32[0]) & 1):
                toward = np.float32(np.inf) if value > float(f32) else np.float32(-np.inf)
                u32 = np.array([np.nextafter(f32, toward)], dtype=np.float32).view(np.uint32)
        return cls(int(round_f32_bits(u32)[0]))

    def to_float(self) -> float:
        return float(bits_to_f32(np.array([self.bits], dtype=np.uint16))[0])

    @property
    def is_nan(self) -> bool:
        return (self.bits & 0x7F80) == 0x7F80 and (self.bits & 0x007F) != 0

    @property
    def is_inf(self) -> bool:
        return (self.bits & 0x7FFF) == 0x7F80

    @property
    def is_zero(self) -> bool:
        return (self.bits & 0x7FFF) == 0

    def __neg__(self) -> 'Bf16':
        return Bf16(self.bits ^ 0x8000)

    def __float__(self) -> float:
        return self.to_float()

    def __repr__(self) -> str:
        return f"Bf16({self.to_float()!r}, bits={self.bits:#06x})"


ZERO = Bf16(0x0000)
ONE = Bf16(0x3F80)
HALF = Bf16(0x3F00)


def bf16_binop(op: str, a: Bf16, b: Bf16) -> Bf16:
    """
    Eine Curry-ALU-Operation a <op> b in BF16

    Args:
        op: 'add' | 'sub' | 'mul' | 'div' (oder '+=', '-=', '*=', '/=')
    """
    op = OP_SYMBOLS.get(op, op)
    if op not in _NUMPY_OPS:
        raise ValueError(f"Unbekannte Operation: {op}")
    result = binop_bits(op, np.array([a.bits], dtype=np.uint16), np.array([b.bits], dtype=np.uint16))
    return Bf16(int(result[0]))


def bf16_max(a: Bf16, b: Bf16) -> Bf16:
    """Compare-and-select; NaN gewinnt"""
    if a.is_nan:
        return a
    if b.is_nan:
        return b
    return a if a.to_float() >= b.to_float() else b


def ulp_distance(a: Bf16, b: Bf16) -> int:
    """Abstand zweier endlicher BF16-Werte in Einheiten der letzten Stelle"""
    def ordinal(bits: int) -> int:
        return -(bits & 0x7FFF) if bits & 0x8000 else bits
    return abs(ordinal(a.bits) - ordinal(b.bits))


def sqrt_seed(x: Bf16) -> Bf16:
    """Startwert für Newton-Wurzel: Exponent des Bitmusters halbieren"""
    if x.is_zero or x.bits & 0x8000:
        return ZERO
    return Bf16(((x.bits - 0x3F80) >> 1) + 0x3F80)


@dataclass
class NumericEvents:
    """Zähler für IEEE-Sonderfälle der Curry-ALUs"""
    div_by_zero: int = 0
    overflow: int = 0
    nan: int = 0

    def observe(self, op: str, a: Bf16, b: Bf16, out: Bf16) -> None:
        op = OP_SYMBOLS.get(op, op)
        if op == 'div' and b.is_zero:
            self.div_by_zero += 1
        if out.is_inf and not (a.is_inf or b.is_inf) and not (op == 'div' and b.is_zero):
            self.overflow += 1
        if out.is_nan and not (a.is_nan or b.is_nan):
            self.nan += 1

    def merge(self, other: 'NumericEvents') -> None:
        self.div_by_zero += other.div_by_zero
        self.overflow += other.overflow
        self.nan += other.nan

    def to_dict(self) -> dict:
        return {'div_by_zero': self.div_by_zero, 'overflow': self.overflow, 'nan': self.nan}
