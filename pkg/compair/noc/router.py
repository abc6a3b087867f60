"""
Router des Kanal-Mesh mit zwei Curry-ALUs

Die Curry-ALU hält den rechten Operanden (ArgReg) als Zustand; ein Flit
bringt nur den linken Wert und die Operation mit: out = Eingabe <op> ArgReg.
"""

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Deque, Dict, List, Optional, Tuple

from compair.numerics import Bf16, NumericEvents, OP_SYMBOLS, ONE, ZERO, bf16_binop

Coord = Tuple[int, int]

# Eingangs-/Ausgangsports; Reihenfolge = fester Tie-Break
PORTS = ('L', 'N', 'E', 'S', 'W')
OPPOSITE = {'N': 'S', 'S': 'N', 'E': 'W', 'W': 'E'}
DELTA = {'N': (0, 1), 'S': (0, -1), 'E': (1, 0), 'W': (-1, 0)}


def route_next_hop(cur: Coord, dst: Coord) -> str:
    """
    Dimensionsordnungs-Routing: zuerst X vollständig, dann Y

    Returns:
        str: 'E' | 'W' | 'N' | 'S'
    """
    if cur == dst:
        raise ValueError(f"Bereits am Ziel {dst}")
    if dst[0] > cur[0]:
        return 'E'
    if dst[0] < cur[0]:
        return 'W'
    return 'N' if dst[1] > cur[1] else 'S'


def hop_count(a: Coord, b: Coord) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass(frozen=True)
class CurryAluState:
    arg_reg: Bf16 = ZERO
    iter_arg: Bf16 = ONE
    iter_op: str = 'add'
    iter_round: int = 0


def alu_apply(state: CurryAluState, input_op: str, input_val: Bf16, wr_reg: bool = False,
              iter_tag: bool = False,
              events: Optional[NumericEvents] = None) -> Tuple[CurryAluState, Bf16]:
    """
    Eine Anwendung der Curry-ALU

    out = input_val <op> ArgReg. Mit wr_reg wird out nach ArgReg übernommen,
    mit iter_tag danach ArgReg = ArgReg <IterOp> IterArg und IterRound dekrementiert.
    Ist IterRound bereits 0, passieren iterationsmarkierte Flits unverändert.
    """
    input_op = OP_SYMBOLS.get(input_op, input_op)
    if iter_tag and state.iter_round <= 0:
        return state, input_val

    out = bf16_binop(input_op, input_val, state.arg_reg)
    if events is not None:
        events.observe(input_op, input_val, state.arg_reg, out)
    arg = out if wr_reg else state.arg_reg
    if not iter_tag:
        return replace(state, arg_reg=arg), out

    updated = bf16_binop(state.iter_op, arg, state.iter_arg)
    if events is not None:
        events.observe(state.iter_op, arg, state.iter_arg, updated)
    return replace(state, arg_reg=updated, iter_round=state.iter_round - 1), out


def alu_configure(state: CurryAluState, data: Bf16, wr_reg: bool, iter_tag: bool, opcode: str,
                  iter_num: int) -> CurryAluState:
    """Write-Paket: wr_reg setzt ArgReg, iter_tag setzt IterArg/IterOp/IterRound"""
    if wr_reg:
        state = replace(state, arg_reg=data)
    if iter_tag:
        state = replace(state, iter_arg=data, iter_op=OP_SYMBOLS.get(opcode, opcode), iter_round=iter_num)
    return state


@dataclass
class RouterState:
    coord: Coord
    alus: List[CurryAluState]
    input_queues: Dict[str, Deque] = field(default_factory=lambda: {p: deque() for p in PORTS})
    inject_queue: Deque = field(default_factory=deque)
    bypass_enabled: bool = True
    rr_pointer: Dict[str, int] = field(default_factory=lambda: {p: 0 for p in PORTS})

    def is_idle(self) -> bool:
        return not self.inject_queue and not any(self.input_queues.values())

    def neighbour(self, port: str) -> Coord:
        dx, dy = DELTA[port]
        return self.coord[0] + dx, self.coord[1] + dy
