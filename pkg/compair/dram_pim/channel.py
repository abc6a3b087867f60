"""
Timing- und Energiemodell eines DRAM-PIM-Kanals

Zeiten in ns. Bei 1 GHz Logiktakt entspricht das den Zyklen des Engines.
Eine Bank bleibt bis zum Abschluss ihres PRE belegt; die CAS-Latenz wirkt
nur auf den Datenzeitpunkt, nicht auf die Belegung.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

from config.config import get_config
from config.hardware import DramPimSpec

logger = logging.getLogger(__name__)


class IllegalCommandError(RuntimeError):
    """Kommando passt nicht zum Bankzustand (Simulatorfehler, nicht reparierbar)"""


class CrossChannelTransferError(ValueError):
    """Globale Puffer verbinden nur Bänke desselben Kanals"""


class CommandKind(Enum):
    ACT = 'ACT'
    RD = 'RD'
    WR = 'WR'
    MAC = 'MAC'
    PRE = 'PRE'
    READOUT_TO_SRAM = 'READOUT_TO_SRAM'
    WRITEBACK_FROM_SRAM = 'WRITEBACK_FROM_SRAM'
    GB_TRANSFER = 'GB_TRANSFER'


COLUMN_KINDS = (CommandKind.RD, CommandKind.WR, CommandKind.MAC,
                CommandKind.READOUT_TO_SRAM, CommandKind.WRITEBACK_FROM_SRAM)
WRITE_KINDS = (CommandKind.WR, CommandKind.WRITEBACK_FROM_SRAM)


@dataclass(frozen=True)
class DramCommand:
    kind: CommandKind
    bank: int
    row: int = 0
    bytes: int = 0
    # nur GB_TRANSFER
    dst_bank: Optional[int] = None


@dataclass
class BankState:
    bank_id: int
    open_row: Optional[int] = None
    busy_until: float = 0.0
    act_at: float = -math.inf
    col_free: float = 0.0
    next_act: float = 0.0


@dataclass
class TraceRecord:
    cycle: float
    bank: int
    kind: str
    bytes: int

    def to_line(self) -> str:
        return f"{self.cycle:.0f} bank={self.bank} {self.kind} {self.bytes}"


class TimingMonitor:
    """
    Online-Prüfung der Kommandoabstände einer Bank

    Wird im Debug-Modus (COMPAIR_DEBUG_TIMING) bei jedem Kommando aufgerufen.
    """

    def __init__(self, spec: DramPimSpec):
        self.t = spec.timings
        self.last_act: Dict[int, float] = {}
        self.last_pre: Dict[int, float] = {}
        self.checked = 0

    def check(self, kind: CommandKind, bank: int, start: float) -> None:
        self.checked += 1
        eps = 1e-9
        if kind == CommandKind.ACT:
            pre = self.last_pre.get(bank)
            if pre is not None and start + eps < pre + self.t.t_rp:
                raise IllegalCommandError(f"t_RP verletzt auf Bank {bank}: ACT bei {start}, PRE bei {pre}")
            self.last_act[bank] = start
        elif kind == CommandKind.PRE:
            act = self.last_act.get(bank)
            if act is not None and start + eps < act + self.t.t_ras:
                raise IllegalCommandError(f"t_RAS verletzt auf Bank {bank}: PRE bei {start}, ACT bei {act}")
            self.last_pre[bank] = start
        elif kind in COLUMN_KINDS:
            act = self.last_act.get(bank)
            rcd = self.t.t_rcdwr if kind in WRITE_KINDS else self.t.t_rcdrd
            if act is None or start + eps < act + rcd:
                raise IllegalCommandError(f"t_RCD verletzt auf Bank {bank}: {kind.value} bei {start}")


class DramChannel:
    """
    Ein Kanal mit banks_per_channel Bänken und einem gemeinsamen globalen Puffer
    """

    def __init__(self, spec: DramPimSpec, channel_id: int = 0, monitor: Optional[bool] = None,
                 trace: bool = False):
        self.spec = spec
        self.t = spec.timings
        self.channel_id = channel_id
        self.banks = [BankState(bank_id=b) for b in range(spec.banks_per_channel)]
        if monitor is None:
            monitor = get_config().DEBUG_TIMING
        self.monitor = TimingMonitor(spec) if monitor else None
        self.trace_enabled = trace
        self.trace: List[TraceRecord] = []
        self.gb_free = 0.0
        self.counts = {'act': 0, 'pre': 0, 'rd': 0, 'wr': 0, 'mac': 0, 'gb_bytes': 0}

    # ------------------------------------------------------------------
    # Kommandoebene
    # ------------------------------------------------------------------

    def _record(self, start: float, bank: int, kind: CommandKind, nbytes: int) -> None:
        if self.monitor is not None and kind != CommandKind.GB_TRANSFER:
            self.monitor.check(kind, bank, start)
        if self.trace_enabled:
            rec = TraceRecord(start, bank, kind.value, nbytes)
            self.trace.append(rec)
            logger.debug("dram ch%d %s", self.channel_id, rec.to_line())

    def _bank(self, index: int) -> BankState:
        if not 0 <= index < len(self.banks):
            raise IllegalCommandError(f"Bank {index} existiert nicht in Kanal {self.channel_id}")
        return self.banks[index]

    def issue(self, cmd: DramCommand, now: float = 0.0) -> float:
        """
        Führt ein Kommando aus und liefert den Abschlusszeitpunkt (ns)

        Raises:
            IllegalCommandError: Kommando passt nicht zum Bankzustand
        """
        if cmd.kind == CommandKind.GB_TRANSFER:
            return now + self.global_buffer_transfer(cmd.bank, cmd.dst_bank if cmd.dst_bank is not None
                                                     else cmd.bank, cmd.bytes, now)

        bank = self._bank(cmd.bank)

        if cmd.kind == CommandKind.ACT:
            if bank.open_row is not None:
                raise IllegalCommandError(
                    f"ACT auf Bank {cmd.bank} mit offener Zeile {bank.open_row}")
            start = max(now, bank.next_act)
            self._record(start, cmd.bank, cmd.kind, 0)
            bank.open_row = cmd.row
            bank.act_at = start
            bank.col_free = start
            self.counts['act'] += 1
            done = start
        elif cmd.kind == CommandKind.PRE:
            if bank.open_row is None:
                return max(now, bank.busy_until)
            start = max(now, bank.col_free, bank.act_at + self.t.t_ras)
            self._record(start, cmd.bank, cmd.kind, 0)
            done = start + self.t.t_rp
            bank.open_row = None
            bank.next_act = done
            self.counts['pre'] += 1
        else:
            if bank.open_row is None or bank.open_row != cmd.row:
                raise IllegalCommandError(
                    f"{cmd.kind.value} auf Bank {cmd.bank} Zeile {cmd.row}, offen: {bank.open_row}")
            if cmd.bytes > self.spec.row_width:
                raise IllegalCommandError(
                    f"{cmd.kind.value} mit {cmd.bytes} B überschreitet Zeilenbreite {self.spec.row_width}")
            rcd = self.t.t_rcdwr if cmd.kind in WRITE_KINDS else self.t.t_rcdrd
            start = max(now, bank.col_free, bank.act_at + rcd)
            self._record(start, cmd.bank, cmd.kind, cmd.bytes)
            done = self._column(cmd, start, bank)

        bank.busy_until = max(bank.busy_until, done)
        return done

    def _column(self, cmd: DramCommand, start: float, bank: BankState) -> float:
        if cmd.kind == CommandKind.MAC:
            n = max(1, math.ceil(cmd.bytes / self.spec.column_access_bytes))
            bank.col_free = start + n * self.spec.access_ns
            self.counts['mac'] += n
            # MAC-Einheit sitzt an den Leseverstärkern, keine CAS-Latenz
            return bank.col_free
        if cmd.kind in (CommandKind.READOUT_TO_SRAM, CommandKind.WRITEBACK_FROM_SRAM):
            n = max(1, math.ceil(cmd.bytes / self.spec.readout_bytes_per_access))
        else:
            n = 1
        bank.col_free = start + n * self.t.t_ccd
        self.counts['wr' if cmd.kind in WRITE_KINDS else 'rd'] += n
        return start + self.t.t_cl + (n - 1) * self.t.t_ccd

    def global_buffer_transfer(self, src_bank: int, dst_bank: int, nbytes: int,
                               now: float = 0.0, dst_channel: Optional[int] = None) -> float:
        """
        Überträgt Daten zwischen zwei Bänken über den globalen Puffer

        Der Puffer wird kanalweit serialisiert; die Kosten enthalten die Wartezeit.

        Returns:
            float: Kosten in ns ab ``now``
        """
        if dst_channel is not None and dst_channel != self.channel_id:
            raise CrossChannelTransferError(
                f"Transfer von Kanal {self.channel_id} nach {dst_channel} gehört auf den CXL-Pfad")
        self._bank(src_bank)
        self._bank(dst_bank)
        if nbytes <= 0:
            return 0.0
        start = max(now, self.gb_free)
        self._record(start, src_bank, CommandKind.GB_TRANSFER, nbytes)
        duration = math.ceil(nbytes / self.spec.global_buffer_bytes_per_cycle) * self.t.clock_period
        self.gb_free = start + duration
        self.counts['gb_bytes'] += nbytes
        return self.gb_free - now

    # ------------------------------------------------------------------
    # Analytische Ströme
    # ------------------------------------------------------------------

    def _row_chunks(self, nbytes: int) -> List[int]:
        full, rest = divmod(nbytes, self.spec.row_width)
        return [self.spec.row_width] * full + ([rest] if rest else [])

    def row_stream_ns(self, nbytes: int, access_bytes: int, access_ns: float, write: bool = False,
                      reuse_open_row: bool = False) -> Tuple[float, int]:
        """
        Belegung einer Bank beim Streamen von ``nbytes`` zeilenweise

        Returns:
            (ns, Anzahl Spaltenzugriffe)
        """
        rcd = self.t.t_rcdwr if write else self.t.t_rcdrd
        total = 0.0
        accesses = 0
        for i, chunk in enumerate(self._row_chunks(nbytes)):
            n = math.ceil(chunk / access_bytes)
            accesses += n
            if i == 0 and reuse_open_row:
                total += n * access_ns + self.t.t_rp
            else:
                total += max(self.t.t_ras, rcd + n * access_ns) + self.t.t_rp
        return total, accesses

    def gemv_bank(self, rows: int, cols: int, reuse_open_row: bool = False) -> float:
        """
        Kosten (ns), eine BF16-Gewichtskachel rows x cols durch den 16-Lane-MAC zu streamen
        """
        nbytes = rows * cols * 2
        if nbytes == 0:
            return 0.0
        ns, accesses = self.row_stream_ns(nbytes, self.spec.column_access_bytes, self.spec.access_ns,
                                          reuse_open_row=reuse_open_row)
        n_rows = len(self._row_chunks(nbytes))
        self.counts['act'] += n_rows - (1 if reuse_open_row else 0)
        self.counts['pre'] += n_rows
        self.counts['mac'] += accesses
        return ns

    def gemv_bank_by_commands(self, bank: int, rows: int, cols: int, now: float = 0.0) -> float:
        """Dieselbe Kachel als echte Kommandofolge ACT/MAC.../PRE; liefert die Dauer"""
        nbytes = rows * cols * 2
        t = now
        for row_id, chunk in enumerate(self._row_chunks(nbytes)):
            t = self.issue(DramCommand(CommandKind.ACT, bank, row_id), t)
            for offset in range(0, chunk, self.spec.column_access_bytes):
                size = min(self.spec.column_access_bytes, chunk - offset)
                self.issue(DramCommand(CommandKind.MAC, bank, row_id, size), t)
            t = self.issue(DramCommand(CommandKind.PRE, bank, row_id), t)
        return t - now

    def readout_ns(self, nbytes: int, repeat: int = 1) -> float:
        """
        Bankbelegung für READOUT_TO_SRAM über den (ggf. entkoppelten) Spaltenpfad

        ``repeat`` zählt die Energie für mehrere gleichartige Vektoren mit.
        """
        if nbytes <= 0:
            return 0.0
        ns, accesses = self.row_stream_ns(nbytes, self.spec.readout_bytes_per_access, self.t.t_ccd)
        self.counts['rd'] += accesses * repeat
        self._count_rows(nbytes, times=repeat)
        return ns

    def writeback_ns(self, nbytes: int, repeat: int = 1) -> float:
        if nbytes <= 0:
            return 0.0
        ns, accesses = self.row_stream_ns(nbytes, self.spec.readout_bytes_per_access, self.t.t_ccd,
                                          write=True)
        self.counts['wr'] += accesses * repeat
        self._count_rows(nbytes, times=repeat)
        return ns

    def readout_accesses(self, nbytes: int) -> int:
        return sum(math.ceil(c / self.spec.readout_bytes_per_access) for c in self._row_chunks(nbytes))

    def ewmul_row(self, elements: int) -> float:
        """Elementweise Multiplikation zweier Zeilen mit Rückschreiben (z.B. RoPE sin/cos)"""
        if elements <= 0:
            return 0.0
        nbytes = elements * 2
        read_ns, accesses = self.row_stream_ns(nbytes, self.spec.column_access_bytes, self.spec.access_ns)
        write_ns, w_accesses = self.row_stream_ns(nbytes, self.spec.column_access_bytes,
                                                  self.spec.access_ns, write=True)
        self.counts['mac'] += 2 * accesses
        self.counts['wr'] += w_accesses
        self._count_rows(nbytes, times=3)
        return 2 * read_ns + write_ns

    def _count_rows(self, nbytes: int, times: int = 1) -> None:
        n_rows = len(self._row_chunks(nbytes))
        self.counts['act'] += n_rows * times
        self.counts['pre'] += n_rows * times

    # ------------------------------------------------------------------
    # Energie
    # ------------------------------------------------------------------

    def energy_report(self) -> Dict[str, float]:
        """Dynamische Energie in pJ je Kommandoart"""
        s = self.spec
        report = {
            'act': self.counts['act'] * s.e_act_pj,
            'pre': self.counts['pre'] * s.e_pre_pj,
            'rd': self.counts['rd'] * s.e_rd_pj,
            'wr': self.counts['wr'] * s.e_wr_pj,
            'mac': self.counts['mac'] * s.e_mac_pj,
            'gb': self.counts['gb_bytes'] * s.e_gb_pj_per_byte,
        }
        report['total'] = sum(report.values())
        return report

    def reset_stats(self) -> None:
        for key in self.counts:
            self.counts[key] = 0


def gemv_row_energy_pj(spec: DramPimSpec) -> float:
    """Energie einer voll ausgelesenen Zeile im GeMV-Betrieb"""
    n = spec.row_width // spec.column_access_bytes
    return spec.e_act_pj + spec.e_pre_pj + n * spec.e_mac_pj


def sustained_gemv_power_w(spec: DramPimSpec) -> float:
    """Mittlere Leistung einer Bank bei Dauer-GeMV (W)"""
    n = spec.row_width // spec.column_access_bytes
    t = spec.timings
    row_ns = max(t.t_ras, t.t_rcdrd + n * spec.access_ns) + t.t_rp
    return gemv_row_energy_pj(spec) / row_ns / 1000.0
