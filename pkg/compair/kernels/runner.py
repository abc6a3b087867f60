"""
Ausführung der Kernels auf dem Mesh (oder im Referenzinterpreter)

Vektoren werden reihum auf die Bänke verteilt: Element i liegt in Bank
i % B an Position i // B derselben Row.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from config.hardware import HardwareConfig
from compair.dram_pim import DramChannel
from compair.isa import (
    PacketExecutor, RowAddr, RowInterpreter, Schedule, assemble, co_schedule, fuse_paths, translate,
)
from compair.noc import RowStore
from compair.numerics import Bf16, ONE, bf16_binop, sqrt_seed
from . import programs as P

logger = logging.getLogger(__name__)

Number = Union[float, Bf16]

# Row-Belegung der Kernels
ROW_X = 0
ROW_Y = 1
ROW_E = 2
ROW_S = 3
ROW_T = 4
ROW_TOT = 5
ROW_OUT = 6
ROW_MAX = 7
ROW_DIFF = 8
ROW_W = 9
ROW_SIN = 10
ROW_COS = 11


def to_bf16(values: Sequence[Number]) -> List[Bf16]:
    return [v if isinstance(v, Bf16) else Bf16.from_float(v) for v in values]


@dataclass
class KernelResult:
    values: List[Bf16]
    cycles: int
    noc_cycles: int = 0
    phase_cycles: List[Tuple[str, int]] = field(default_factory=list)
    programs: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)

    def floats(self) -> List[float]:
        return [v.to_float() for v in self.values]


class KernelMachine:
    """
    Ein Kanal mit persistentem DRAM- und ALU-Zustand

    Args:
        hw: Hardware
        fused: Pfadfusion vor der Übersetzung anwenden
        interpret: Referenzinterpreter statt Mesh verwenden (keine Zyklen)
        trace: Flit-Trace des Mesh mitschreiben
    """

    def __init__(self, hw: Optional[HardwareConfig] = None, fused: bool = True, interpret: bool = False,
                 trace: bool = False):
        self.hw = hw or HardwareConfig()
        self.fused = fused
        self.interpret = interpret
        self.store = RowStore()
        self.cycles = 0
        self.phase_cycles: List[Tuple[str, int]] = []
        self.programs: List[str] = []
        self.schedules: List[Schedule] = []
        if interpret:
            self.interpreter = RowInterpreter(self.hw, self.store)
        else:
            self.executor = PacketExecutor(self.hw, self.store, trace=trace)

    @property
    def banks(self) -> int:
        return self.hw.dram.banks_per_channel

    @property
    def rpb(self) -> int:
        return self.hw.routers_per_bank

    def _schedule(self, text: str) -> Schedule:
        self.programs.append(text)
        program = assemble(text)
        if self.fused:
            program = fuse_paths(program, self.hw)
        return translate(program, self.hw)

    def _execute(self, schedule: Schedule) -> int:
        self.schedules.append(schedule)
        result = self.executor.run(schedule)
        self.cycles += result.cycles
        self.phase_cycles.extend(result.phase_cycles)
        return result.cycles

    def run(self, text: str) -> int:
        """Assembliert und führt ein Programm aus; liefert die Zyklen"""
        if self.interpret:
            self.programs.append(text)
            self.interpreter.run(assemble(text))
            return 0
        return self._execute(self._schedule(text))

    def run_parallel(self, texts: Sequence[str]) -> int:
        """Unabhängige Programme (verschiedene ALU-Slots) gleichzeitig auf dem Mesh"""
        if self.interpret or len(texts) == 1:
            return sum(self.run(text) for text in texts)
        return self._execute(co_schedule([self._schedule(text) for text in texts]))

    def add_cycles(self, label: str, cycles: int) -> None:
        """Kosten außerhalb des Mesh (Controller, DRAM-PIM)"""
        self.cycles += cycles
        self.phase_cycles.append((label, cycles))

    def place(self, row: int, values: Sequence[Bf16], banks: int) -> int:
        """Verteilt einen Vektor reihum; liefert die Positionen pro Bank"""
        per_bank = math.ceil(len(values) / banks)
        for i, v in enumerate(values):
            self.store.write((i % banks, row, i // banks), v)
        return per_bank

    def gather(self, row: int, n: int, banks: int) -> List[Bf16]:
        return [self.store.read((i % banks, row, i // banks)) for i in range(n)]

    def result(self, values: List[Bf16], noc_cycles: Optional[int] = None) -> KernelResult:
        stats = {} if self.interpret else self.executor.mesh.stats.to_dict()
        return KernelResult(values, self.cycles, self.cycles if noc_cycles is None else noc_cycles,
                            list(self.phase_cycles), list(self.programs), stats)


def bank_count(n: int, banks: Optional[int] = None, limit: int = P.BANKS) -> int:
    """Größter Teiler von n, der höchstens ``limit`` Bänke belegt"""
    if banks is not None:
        if n % banks:
            raise ValueError(f"{n} Elemente lassen sich nicht gleich auf {banks} Bänke verteilen")
        return banks
    return max(b for b in range(1, min(n, limit) + 1) if n % b == 0)


def _machine(hw, fused, interpret) -> KernelMachine:
    return KernelMachine(hw, fused=fused, interpret=interpret)


# ---------------------------------------------------------------------------
# Einzelkernels
# ---------------------------------------------------------------------------

def exp_programs(src: int, dst: int, per_bank: int, banks: int, order: int = P.TAYLOR_ORDER,
                 rpb: int = P.ROUTERS_PER_BANK) -> List[List[str]]:
    """Exponent-Programme pro Position, paarweise gruppiert: Fluss 0 und 1 teilen sich das Mesh"""
    texts = [P.exp_program(RowAddr(src, p), RowAddr(dst, p), flow=p % 2, order=order,
                           banks=range(banks), rpb=rpb)
             for p in range(per_bank)]
    return [texts[p:p + 2] for p in range(0, per_bank, 2)]


def _exps(m: KernelMachine, src: int, dst: int, per_bank: int, banks: int, order: int) -> None:
    for pair in exp_programs(src, dst, per_bank, banks, order, m.rpb):
        m.run_parallel(pair)


def exp_kernel(xs: Sequence[Number], hw: Optional[HardwareConfig] = None, fused: bool = True,
               order: int = P.TAYLOR_ORDER, interpret: bool = False) -> KernelResult:
    """Taylor-Exponent elementweise; zwei Positionen pro Bank laufen gleichzeitig"""
    values = to_bf16(xs)
    if not values:
        return KernelResult([], 0)
    m = _machine(hw, fused, interpret)
    banks = min(len(values), m.banks)
    per_bank = m.place(ROW_X, values, banks)
    _exps(m, ROW_X, ROW_E, per_bank, banks, order)
    return m.result(m.gather(ROW_E, len(values), banks))


def rope_kernel(x: Sequence[Number], sin: Sequence[Number], cos: Sequence[Number],
                hw: Optional[HardwareConfig] = None, fused: bool = True,
                interpret: bool = False) -> KernelResult:
    """
    RoPE eines Kopfes in Bank 0: Umordnung über das Mesh, dann EWMUL gegen cos/sin

    ``noc_cycles`` enthält nur die Umordnung.
    """
    head_dim = len(x)
    m = _machine(hw, fused, interpret)
    m.store.set_row(0, ROW_X, to_bf16(x))
    noc = m.run(P.rope_program(head_dim, RowAddr(ROW_X), RowAddr(ROW_Y)))

    rotated = m.store.row(0, ROW_Y, head_dim)
    sin_b, cos_b = to_bf16(sin), to_bf16(cos)
    m.store.set_row(0, ROW_SIN, sin_b)
    m.store.set_row(0, ROW_COS, cos_b)
    out = []
    for i, v in enumerate(to_bf16(x)):
        a = bf16_binop('mul', v, cos_b[i])
        b = bf16_binop('mul', rotated[i], sin_b[i])
        out.append(bf16_binop('add', a, b))
    m.store.set_row(0, ROW_OUT, out)
    if not interpret:
        channel = DramChannel(m.hw.dram)
        # x*cos, rot*sin und die Summe als drei Row-Operationen
        ewmul_ns = 3 * channel.ewmul_row(head_dim)
        m.add_cycles('ewmul', m.hw.cycles(ewmul_ns))
    return m.result(out, noc_cycles=noc)


def sqrt_kernel(x: Number, hw: Optional[HardwareConfig] = None, rounds: int = P.SQRT_ROUNDS,
                fused: bool = True, interpret: bool = False) -> KernelResult:
    """Newton-Wurzel in Bank 0; 0 ergibt 0, negative Eingaben NaN"""
    value = to_bf16([x])[0]
    if value.is_zero:
        return KernelResult([value], 0)
    if value.bits & 0x8000:
        logger.warning("sqrt_kernel: negative Eingabe %s ergibt NaN", value)
        return KernelResult([Bf16(0x7FC0)], 0, stats={'numeric_events': {'nan': 1}})
    m = _machine(hw, fused, interpret)
    m.store.write((0, ROW_X, 0), value)
    m.run(P.sqrt_program(RowAddr(ROW_X), RowAddr(ROW_Y), sqrt_seed(value), rounds, banks=[0], rpb=m.rpb))
    return m.result([m.store.read((0, ROW_Y, 0))])


def _select(m: KernelMachine, candidates: Sequence[Tuple[int, Tuple[int, int, int]]]) -> None:
    """Übernimmt den Kandidaten, wo die Differenz Kandidat - Maximum nicht negativ ist"""
    for b, src in candidates:
        diff = m.store.read((b, ROW_DIFF, 0))
        if not diff.is_nan and not diff.bits & 0x8000:
            m.store.write((b, ROW_MAX, 0), m.store.read(src))


def _bank_max(m: KernelMachine, per_bank: int, banks: int) -> Bf16:
    """
    Compare-and-Select: erst innerhalb jeder Bank, dann als Baum über die Bänke

    Differenzen laufen über das Mesh, den Partnerwert einer Baumebene holt
    ein Bank-Exchange. Die Auswahl per Vorzeichen trifft der Controller.
    """
    for b in range(banks):
        m.store.write((b, ROW_MAX, 0), m.store.read((b, ROW_X, 0)))
    for p in range(1, per_bank):
        m.run(P.max_program(RowAddr(ROW_X, p), RowAddr(ROW_MAX), RowAddr(ROW_DIFF),
                            banks=range(banks), rpb=m.rpb))
        _select(m, [(b, (b, ROW_X, p)) for b in range(banks)])
    span = 1
    while span < banks:
        left = [b for b in range(0, banks, 2 * span) if b + span < banks]
        m.run(P.max_tree_level(ROW_MAX, ROW_T, ROW_DIFF, span, left, rpb=m.rpb))
        _select(m, [(b, (b, ROW_T, 0)) for b in left])
        span *= 2
    return m.store.read((0, ROW_MAX, 0))


class SoftmaxProgram(NamedTuple):
    """Softmax nach der Max-Vorstufe in drei Stufen"""
    shift: str
    exps: List[List[str]]
    # Bank-Summe, Reduce + Broadcast der Gesamtsumme, Division
    normalize: str


def softmax_program(banks: int, seq_len: int, shift: Bf16, order: int = P.TAYLOR_ORDER,
                    rpb: int = P.ROUTERS_PER_BANK) -> SoftmaxProgram:
    if banks <= 0 or seq_len <= 0:
        raise ValueError("Softmax braucht mindestens eine Bank und ein Element")
    if seq_len % banks:
        raise ValueError(f"seq_len {seq_len} nicht durch {banks} Bänke teilbar")
    per_bank = seq_len // banks
    bank_set = range(banks)
    shift_text = P.elementwise('-=', ROW_X, ROW_Y, per_bank, arg_value=shift, banks=bank_set, rpb=rpb)
    exps = exp_programs(ROW_Y, ROW_E, per_bank, banks, order, rpb)
    tail = (P.bank_sum(ROW_E, ROW_S, per_bank, banks=bank_set, rpb=rpb)
            + P.reduce_broadcast('+=', ROW_S, ROW_T, ROW_TOT, banks=bank_set, rpb=rpb)
            + P.elementwise('/=', ROW_E, ROW_OUT, per_bank, arg_row=ROW_TOT, arg_elem=0, banks=bank_set,
                            rpb=rpb))
    return SoftmaxProgram(shift_text, exps, tail)


def softmax_kernel(scores: Sequence[Number], hw: Optional[HardwareConfig] = None, banks: Optional[int] = None,
                   fused: bool = True, order: int = P.TAYLOR_ORDER, interpret: bool = False) -> KernelResult:
    values = to_bf16(scores)
    if not values:
        raise ValueError("Softmax über leeren Vektor")
    m = _machine(hw, fused, interpret)
    n_banks = bank_count(len(values), banks, limit=m.banks)
    per_bank = m.place(ROW_X, values, n_banks)
    shift = _bank_max(m, per_bank, n_banks)
    program = softmax_program(n_banks, len(values), shift, order, m.rpb)
    m.run(program.shift)
    for pair in program.exps:
        m.run_parallel(pair)
    m.run(program.normalize)
    return m.result(m.gather(ROW_OUT, len(values), n_banks))


def rmsnorm_kernel(x: Sequence[Number], hw: Optional[HardwareConfig] = None, eps: float = 0.0,
                   weight: Optional[Sequence[Number]] = None, banks: Optional[int] = None,
                   fused: bool = True, interpret: bool = False) -> KernelResult:
    """x / sqrt(mean(x²) + eps), optional mit Gewichtung"""
    values = to_bf16(x)
    if not values:
        raise ValueError("RMSNorm über leeren Vektor")
    n = len(values)
    m = _machine(hw, fused, interpret)
    n_banks = bank_count(n, banks, limit=m.banks)
    bank_set = range(n_banks)
    rpb = m.rpb
    per_bank = m.place(ROW_X, values, n_banks)

    text = P.elementwise('*=', ROW_X, ROW_Y, per_bank, arg_row=ROW_X, banks=bank_set, rpb=rpb)
    text += P.bank_sum(ROW_Y, ROW_S, per_bank, banks=bank_set, rpb=rpb)
    text += P.reduce_broadcast('+=', ROW_S, ROW_T, ROW_TOT, banks=bank_set, rpb=rpb)
    text += P.elementwise('/=', ROW_TOT, ROW_TOT, 1, arg_value=Bf16.from_float(n), banks=bank_set, rpb=rpb)
    if eps:
        text += P.elementwise('+=', ROW_TOT, ROW_TOT, 1, arg_value=Bf16.from_float(eps), banks=bank_set, rpb=rpb)
    m.run(text)

    mean_sq = m.store.read((0, ROW_TOT, 0))
    if mean_sq.is_zero:
        raise ValueError("RMSNorm eines Nullvektors ist undefiniert")
    m.run(P.sqrt_program(RowAddr(ROW_TOT), RowAddr(ROW_MAX), sqrt_seed(mean_sq), banks=bank_set, rpb=rpb))
    text = P.elementwise('/=', ROW_X, ROW_OUT, per_bank, arg_row=ROW_MAX, arg_elem=0, banks=bank_set, rpb=rpb)
    if weight is not None:
        m.place(ROW_W, to_bf16(weight), n_banks)
        text += P.elementwise('*=', ROW_OUT, ROW_OUT, per_bank, arg_row=ROW_W, banks=bank_set, rpb=rpb)
    m.run(text)
    return m.result(m.gather(ROW_OUT, n, n_banks))


def silu_kernel(x: Sequence[Number], hw: Optional[HardwareConfig] = None, banks: Optional[int] = None,
                fused: bool = True, order: int = P.TAYLOR_ORDER, interpret: bool = False) -> KernelResult:
    """x / (1 + exp(-x)) mit dem Taylor-Exponenten"""
    values = to_bf16(x)
    if not values:
        raise ValueError("SiLU über leeren Vektor")
    n = len(values)
    m = _machine(hw, fused, interpret)
    n_banks = bank_count(n, banks, limit=m.banks)
    bank_set = range(n_banks)
    rpb = m.rpb
    per_bank = m.place(ROW_X, values, n_banks)

    m.run(P.elementwise('*=', ROW_X, ROW_Y, per_bank, arg_value=-ONE, banks=bank_set, rpb=rpb))
    _exps(m, ROW_Y, ROW_E, per_bank, n_banks, order)
    text = P.elementwise('+=', ROW_E, ROW_E, per_bank, arg_value=ONE, banks=bank_set, rpb=rpb)
    text += P.elementwise('/=', ROW_X, ROW_OUT, per_bank, arg_row=ROW_E, banks=bank_set, rpb=rpb)
    m.run(text)
    return m.result(m.gather(ROW_OUT, n, n_banks))


KERNELS = {
    'exp': exp_kernel,
    'rope': rope_kernel,
    'sqrt': sqrt_kernel,
    'softmax': softmax_kernel,
    'rmsnorm': rmsnorm_kernel,
    'silu': silu_kernel,
}


@dataclass
class KernelTrace:
    result: KernelResult
    flits: List[Tuple[int, int, Tuple[int, int], str]]
    schedules: List[Schedule]


def trace_exp(xs: Sequence[Number], hw: Optional[HardwareConfig] = None,
              order: int = P.TAYLOR_ORDER) -> KernelTrace:
    """Exponent mit Flit-Trace und den übersetzten Paketplänen"""
    values = to_bf16(xs)
    if not values:
        raise ValueError("trace_exp braucht mindestens ein Element")
    m = KernelMachine(hw, trace=True)
    banks = min(len(values), m.banks)
    per_bank = m.place(ROW_X, values, banks)
    _exps(m, ROW_X, ROW_E, per_bank, banks, order)
    result = m.result(m.gather(ROW_E, len(values), banks))
    return KernelTrace(result, list(m.executor.mesh.trace), list(m.schedules))
