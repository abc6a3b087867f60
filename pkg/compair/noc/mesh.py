"""
Zyklenweise Flit-Simulation des Kanal-Mesh (4x16, DOR, Curry-ALUs)

Pro Zyklus und Router:
  1. höchstens ein Flit aus der Injektionswarteschlange (DRAM -> Router)
  2. Kopf-Flits der Eingangswarteschlangen rechnen auf ihrem Pfadschritt
     (parallel zur Switch-Traversierung, eine Anwendung pro ALU und Zyklus)
  3. pro Ausgangsport wird ein Flit weitergeleitet (Round-Robin über die Eingänge)
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from config.config import get_config
from config.hardware import NocSpec
from compair.numerics import Bf16, NumericEvents
from .router import (
    Coord, CurryAluState, OPPOSITE, PORTS, RouterState, alu_apply, alu_configure, route_next_hop,
)

logger = logging.getLogger(__name__)

# Flit-Arten, abgeleitet aus dem Pakettyp
COMPUTE = 'compute'    # Scalar, Reduce, Exchange
WRITE = 'write'        # konfiguriert ALUs, wird verbraucht
READ = 'read'          # liest ArgReg aus
MOVE = 'move'          # Broadcast: nur Wegpunkte

# Zyklen ohne Fortschritt, nach denen der Watchdog auslöst
WATCHDOG_CYCLES = 1000


class DeadlockError(RuntimeError):
    pass


class FlitConservationError(RuntimeError):
    pass


@dataclass
class Hop:
    """Aktiver Pfadschritt"""
    x: int
    y: int
    wr_reg: bool = False
    iter_tag: bool = False
    op: str = 'add'

    @property
    def coord(self) -> Coord:
        return self.x, self.y


@dataclass
class Flit:
    kind: str
    data: Bf16
    steps: List[Hop]
    src: Coord
    slot: int = 0
    iter_num: int = 1
    payload: int = 0
    tag: Any = None
    fid: int = -1
    inject_cycle: int = 0
    # Laufzeitzustand
    pos: Optional[Coord] = None
    step: int = 0
    round: int = 0
    ready: int = 0
    done_cycle: Optional[int] = None
    hops: int = 0

    @property
    def rounds(self) -> int:
        return max(1, self.iter_num)

    @property
    def finished_path(self) -> bool:
        return self.round >= self.rounds

    def target(self) -> Optional[Coord]:
        if self.finished_path or not self.steps:
            return None
        return self.steps[self.step].coord


@dataclass
class NocStats:
    injected: int = 0
    ejected: int = 0
    consumed: int = 0
    hops: int = 0
    alu_ops: int = 0
    bits_moved: int = 0
    events: NumericEvents = field(default_factory=NumericEvents)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'injected': self.injected, 'ejected': self.ejected, 'consumed': self.consumed,
            'hops': self.hops, 'alu_ops': self.alu_ops, 'bits_moved': self.bits_moved,
            'numeric_events': self.events.to_dict(),
        }


class Mesh:
    """
    Mesh eines Kanals

    Args:
        spec: NoC-Parameter
        max_cycles: harte Obergrenze für run_until_drained (Standard COMPAIR_NOC_MAX_CYCLES)
        trace: Flit-Trace (cycle, flit-id, coord, event) mitschreiben
    """

    def __init__(self, spec: NocSpec, max_cycles: Optional[int] = None, trace: bool = False):
        self.spec = spec
        self.max_cycles = max_cycles or get_config().NOC_MAX_CYCLES
        self.cycle = 0
        self.routers: Dict[Coord, RouterState] = {}
        for y in range(spec.mesh_y):
            for x in range(spec.mesh_x):
                self.routers[(x, y)] = RouterState(
                    coord=(x, y),
                    alus=[CurryAluState() for _ in range(spec.alus_per_router)],
                    bypass_enabled=spec.bypass,
                )
        self.stats = NocStats()
        self.delivered: List[Flit] = []
        self.trace_enabled = trace
        self.trace: List[Tuple[int, int, Coord, str]] = []
        self.on_deliver: Optional[Callable[[Flit], None]] = None
        self._next_fid = 0
        self._in_flight = 0
        self._idle_cycles = 0

    # ------------------------------------------------------------------

    @property
    def hop_delay(self) -> int:
        return 1 if self.spec.bypass else self.spec.router_delay_cycles

    def coord_of(self, router_index: int) -> Coord:
        return router_index % self.spec.mesh_x, router_index // self.spec.mesh_x

    def alu(self, coord: Coord, slot: int = 0) -> CurryAluState:
        return self.routers[coord].alus[slot]

    def set_alu(self, coord: Coord, slot: int, state: CurryAluState) -> None:
        self.routers[coord].alus[slot] = state

    def _trace(self, flit: Flit, coord: Coord, event: str) -> None:
        if self.trace_enabled:
            self.trace.append((self.cycle, flit.fid, coord, event))
            logger.debug("noc %d flit=%d %s %s", self.cycle, flit.fid, coord, event)

    def inject(self, flit: Flit, at_cycle: Optional[int] = None) -> Flit:
        """Reiht ein Flit in die Injektionswarteschlange seines Quellrouters ein"""
        if flit.src not in self.routers:
            raise ValueError(f"Quellrouter {flit.src} liegt außerhalb des Mesh")
        for hop in flit.steps:
            if hop.coord not in self.routers:
                raise ValueError(f"Pfadschritt {hop.coord} liegt außerhalb des Mesh")
        flit.fid = self._next_fid
        self._next_fid += 1
        flit.inject_cycle = self.cycle if at_cycle is None else max(at_cycle, self.cycle)
        flit.pos = flit.src
        self.routers[flit.src].inject_queue.append(flit)
        self.stats.injected += 1
        self._in_flight += 1
        return flit

    @property
    def in_flight(self) -> int:
        return self._in_flight

    # ------------------------------------------------------------------

    def step(self) -> bool:
        """
        Ein Zyklus des gesamten Mesh

        Returns:
            bool: True, wenn sich etwas bewegt oder gerechnet hat
        """
        if self._in_flight == 0:
            self.cycle += 1
            return False

        c = self.cycle
        progress = False
        depth = self.spec.queue_depth

        # 1. Injektion: ein Flit pro Router und Zyklus in den lokalen Eingang
        for router in self.routers.values():
            if router.inject_queue and router.inject_queue[0].inject_cycle <= c \
                    and len(router.input_queues['L']) < depth:
                flit = router.inject_queue.popleft()
                flit.ready = c + self.spec.io_cycles
                router.input_queues['L'].append(flit)
                self._trace(flit, router.coord, 'inject')
                progress = True

        # 2./3. Rechnen und Arbitrierung
        moves = []
        reserved: Dict[Tuple[Coord, str], int] = {}
        for coord, router in self.routers.items():
            alu_used = [False] * len(router.alus)
            requests: Dict[str, List[str]] = {}
            for in_port in PORTS:
                queue = router.input_queues[in_port]
                if not queue or queue[0].ready > c:
                    continue
                flit = queue[0]
                if flit.target() == coord and not self._compute(router, flit, alu_used):
                    continue
                out = self._desired_port(flit, coord)
                if out is None:
                    progress = True
                    continue
                if out == 'X':
                    moves.append((coord, in_port, out, None))
                    continue
                requests.setdefault(out, []).append(in_port)

            for out_port, in_ports in requests.items():
                start = router.rr_pointer[out_port]
                ordered = sorted(in_ports, key=lambda p: (PORTS.index(p) - start) % len(PORTS))
                for in_port in ordered:
                    if out_port == 'L':
                        moves.append((coord, in_port, out_port, None))
                        router.rr_pointer[out_port] = (PORTS.index(in_port) + 1) % len(PORTS)
                        break
                    nxt = router.neighbour(out_port)
                    arrive = OPPOSITE[out_port]
                    key = (nxt, arrive)
                    occupancy = len(self.routers[nxt].input_queues[arrive]) + reserved.get(key, 0)
                    if occupancy >= depth:
                        continue
                    reserved[key] = reserved.get(key, 0) + 1
                    moves.append((coord, in_port, out_port, nxt))
                    router.rr_pointer[out_port] = (PORTS.index(in_port) + 1) % len(PORTS)
                    break

        for coord, in_port, out_port, nxt in moves:
            flit = self.routers[coord].input_queues[in_port].popleft()
            progress = True
            if out_port == 'X':
                flit.done_cycle = c + 1
                self.stats.consumed += 1
                self._finish(flit, coord, 'consume')
            elif out_port == 'L':
                flit.done_cycle = c + 1 + self.spec.io_cycles
                self.stats.ejected += 1
                self._finish(flit, coord, 'eject')
            else:
                flit.pos = nxt
                flit.hops += 1
                flit.ready = c + self.hop_delay
                self.stats.hops += 1
                self.stats.bits_moved += self.spec.flit_bits
                self.routers[nxt].input_queues[OPPOSITE[out_port]].append(flit)
                self._trace(flit, nxt, 'arrive')

        self.cycle += 1
        if progress:
            self._idle_cycles = 0
        else:
            self._idle_cycles += 1
            if self._idle_cycles >= WATCHDOG_CYCLES and self._eligible(c):
                raise DeadlockError(
                    f"Kein Fortschritt seit {self._idle_cycles} Zyklen bei {self._in_flight} Flits")
        return progress

    def _compute(self, router: RouterState, flit: Flit, alu_used: List[bool]) -> bool:
        """Wendet den aktuellen Pfadschritt an; False, wenn die ALU belegt ist"""
        hop = flit.steps[flit.step]
        slot = flit.slot
        if flit.kind in (COMPUTE, WRITE, READ):
            if alu_used[slot]:
                return False
            alu_used[slot] = True
            state = router.alus[slot]
            if flit.kind == COMPUTE:
                state, flit.data = alu_apply(state, hop.op, flit.data, hop.wr_reg, hop.iter_tag,
                                             self.stats.events)
            elif flit.kind == WRITE:
                state = alu_configure(state, flit.data, hop.wr_reg, hop.iter_tag, hop.op, flit.iter_num)
            else:
                flit.data = state.arg_reg
            router.alus[slot] = state
            self.stats.alu_ops += 1
            self._trace(flit, router.coord, 'alu')
        flit.step += 1
        if flit.step >= len(flit.steps):
            flit.step = 0
            flit.round += 1
            if flit.kind in (WRITE, READ, MOVE):
                flit.round = flit.rounds
        return True

    def _desired_port(self, flit: Flit, coord: Coord) -> Optional[str]:
        target = flit.target()
        if target is None:
            return 'X' if flit.kind == WRITE else 'L'
        if target == coord:
            # nächste Runde am selben Router: ALU im nächsten Zyklus
            return None
        return route_next_hop(coord, target)

    def _finish(self, flit: Flit, coord: Coord, event: str) -> None:
        self._in_flight -= 1
        self._trace(flit, coord, event)
        self.delivered.append(flit)
        if self.on_deliver is not None:
            self.on_deliver(flit)

    def run_until_drained(self, max_cycles: Optional[int] = None) -> int:
        """
        Simuliert, bis alle Flits ausgeliefert sind

        Returns:
            int: Zyklus, in dem das letzte Flit fertig war

        Raises:
            DeadlockError: Watchdog oder Zyklusgrenze überschritten
            FlitConservationError: injizierte != ausgelieferte Flits
        """
        limit = self.cycle + (max_cycles or self.max_cycles)
        while self._in_flight > 0:
            if self.cycle >= limit:
                raise DeadlockError(f"Zyklusgrenze {limit} mit {self._in_flight} Flits im Netz erreicht")
            self.step()
        self.check_conservation()
        last = max((f.done_cycle for f in self.delivered), default=self.cycle)
        return last

    def _eligible(self, c: int) -> bool:
        """Gibt es ein Flit, das sich in diesem Zyklus bewegen dürfte?"""
        for router in self.routers.values():
            if router.inject_queue and router.inject_queue[0].inject_cycle <= c:
                return True
            if any(q and q[0].ready <= c for q in router.input_queues.values()):
                return True
        return False

    def check_conservation(self) -> None:
        """Jedes injizierte Flit wird genau einmal ausgeliefert"""
        s = self.stats
        queued = sum(len(r.inject_queue) + sum(len(q) for q in r.input_queues.values())
                     for r in self.routers.values())
        ids = {f.fid for f in self.delivered}
        if len(ids) != len(self.delivered):
            raise FlitConservationError("Flit mehrfach ausgeliefert")
        if s.injected != len(self.delivered) + queued or len(self.delivered) != s.ejected + s.consumed:
            raise FlitConservationError(
                f"injiziert {s.injected}, ausgeliefert {len(self.delivered)}, im Netz {queued}")

    def energy_pj(self) -> float:
        return self.stats.bits_moved * self.spec.energy_pj_per_bit
