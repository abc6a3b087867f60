"""
Timing- und Energiemodell der hybrid gebondeten SRAM-PIM-Makros einer Bank

Die vier Makros arbeiten im Gleichschritt als ein aggregierter Block der
Form (Eingänge, Ausgänge) = (512, 8) bzw. (256, 16). Sämtlicher Verkehr
zwischen DRAM und SRAM läuft über die Bond-Verbindung der Bank.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from config.hardware import BondSpec, SramPimSpec, VOLTAGE_POINTS, layout_shape
from compair.dram_pim import DramChannel

logger = logging.getLogger(__name__)

# Spannungen der beiden veröffentlichten Betriebspunkte
V_LOW = 0.6
V_HIGH = 0.9


class TileTooLargeError(ValueError):
    """Gewichtskachel passt nicht in die Makros einer Bank"""

    def __init__(self, message: str, required_splits: int):
        super().__init__(message)
        self.required_splits = required_splits


class LayoutMismatchError(ValueError):
    pass


@dataclass
class MacroState:
    resident_weight_tile: Optional[str] = None
    resident_bytes: int = 0
    busy_until: float = 0.0


@dataclass
class BondLink:
    bandwidth: float
    energy_per_bit: float
    busy_until: float = 0.0
    bytes_moved: int = 0

    @property
    def bytes_per_ns(self) -> float:
        return self.bandwidth / 1e9

    def transfer_ns(self, nbytes: int) -> float:
        return nbytes / self.bytes_per_ns if nbytes > 0 else 0.0

    def move(self, nbytes: int, repeat: int = 1) -> float:
        self.bytes_moved += nbytes * repeat
        return self.transfer_ns(nbytes)

    @property
    def energy_pj(self) -> float:
        return self.bytes_moved * 8 * self.energy_per_bit


@dataclass
class GemmResult:
    ns: float
    per_vector_ns: float
    bottleneck: str  # transfer | compute
    detail: str  # readout | bond | compute
    macs: int = 0


@dataclass
class SramTraceRecord:
    cycle: float
    bank: int
    event: str  # load | compute | writeback
    bytes: int


def operating_point(voltage: float) -> Tuple[float, float]:
    """
    Zugriffszeit (ns) und TOPS/W bei einer Spannung zwischen 0.6 V und 0.9 V

    Zwischen den beiden Endpunkten wird linear interpoliert.
    """
    v = min(max(voltage, V_LOW), V_HIGH)
    frac = (v - V_LOW) / (V_HIGH - V_LOW)
    low_t, low_eff = VOLTAGE_POINTS['low']
    high_t, high_eff = VOLTAGE_POINTS['high']
    return low_t + frac * (high_t - low_t), low_eff + frac * (high_eff - low_eff)


def sram_energy(ops: int, tops_per_watt: float) -> float:
    """Energie (pJ) für ``ops`` MACs; ein MAC zählt als zwei Operationen"""
    if ops <= 0:
        return 0.0
    return 2.0 * ops / tops_per_watt


def tile_shape(spec: SramPimSpec, layout: str) -> Tuple[int, int]:
    """Größte Kachel (Zeilen, Spalten), die der Makro-Verbund für ein Layout hält"""
    _, out_w = layout_shape(layout)
    capacity_elems = spec.bank_capacity_bytes // 2
    return capacity_elems // out_w, out_w


def split_tiles(rows: int, cols: int, tile_rows: int, tile_cols: int) -> Dict[Tuple[int, int], int]:
    """Zerlegt rows x cols in Kacheln; liefert {Form: Anzahl}"""
    shapes: Dict[Tuple[int, int], int] = {}
    if rows <= 0 or cols <= 0:
        return shapes
    full_r, rest_r = divmod(rows, tile_rows)
    full_c, rest_c = divmod(cols, tile_cols)
    for r, nr in ((tile_rows, full_r), (rest_r, 1 if rest_r else 0)):
        for c, nc in ((tile_cols, full_c), (rest_c, 1 if rest_c else 0)):
            if nr and nc:
                shapes[(r, c)] = shapes.get((r, c), 0) + nr * nc
    return shapes


class SramPimBank:
    """
    SRAM-PIM-Verbund einer Bank samt Bond-Verbindung

    Liest über den DRAM-Kanal der Bank aus und schreibt Ergebnisse dorthin zurück.
    """

    def __init__(self, sram: SramPimSpec, bond: BondSpec, dram: DramChannel, bank_id: int = 0,
                 trace: bool = False):
        self.spec = sram
        self.dram = dram
        self.bank_id = bank_id
        self.macros = MacroState()
        self.bond = BondLink(bandwidth=bond.bandwidth, energy_per_bit=bond.energy_per_bit)
        self.trace_enabled = trace
        self.trace: List[SramTraceRecord] = []
        self.stats = {'loads': 0, 'reuses': 0, 'macs': 0}

    @property
    def capacity(self) -> int:
        return self.spec.bank_capacity_bytes

    def _record(self, event: str, nbytes: int) -> None:
        if self.trace_enabled:
            rec = SramTraceRecord(self.macros.busy_until, self.bank_id, event, nbytes)
            self.trace.append(rec)
            logger.debug("sram bank%d %.0f %s %d", self.bank_id, rec.cycle, event, nbytes)

    def load_weights(self, nbytes: int, tile_id: Optional[str] = None, repeat: int = 1) -> float:
        """
        Lädt eine Gewichtskachel aus dem DRAM in die Makros

        ``repeat`` verbucht weitere gleich große Kacheln (andere Gewichte) in der Statistik.

        Returns:
            float: Kosten in ns (0 bei bereits residenter Kachel)

        Raises:
            TileTooLargeError: Kachel größer als die Makro-Kapazität der Bank
        """
        if nbytes <= 0:
            return 0.0
        if nbytes > self.capacity:
            splits = math.ceil(nbytes / self.capacity)
            raise TileTooLargeError(
                f"Kachel mit {nbytes} B passt nicht in {self.capacity} B; "
                f"mindestens {splits} Teilkacheln nötig", required_splits=splits)
        if tile_id is not None and tile_id == self.macros.resident_weight_tile:
            self.stats['reuses'] += 1
            return 0.0

        readout = self.dram.readout_ns(nbytes, repeat=repeat)
        bond = self.bond.move(nbytes, repeat=repeat)
        cost = readout + bond
        self.macros.resident_weight_tile = tile_id if tile_id is not None else f"anon-{self.stats['loads']}"
        self.macros.resident_bytes = nbytes
        self._record('load', nbytes)
        self.macros.busy_until += cost * repeat
        self.stats['loads'] += repeat
        return cost

    def per_vector(self, rows: int, cols: int, layout: str) -> GemmResult:
        """Kosten eines Eingangsvektors für die residente Kachel, ohne Statistik"""
        in_w, out_w = layout_shape(layout)
        in_bytes, out_bytes = rows * 2, cols * 2
        readout, _ = self.dram.row_stream_ns(in_bytes, self.dram.spec.readout_bytes_per_access,
                                             self.dram.t.t_ccd)
        writeback, _ = self.dram.row_stream_ns(out_bytes, self.dram.spec.readout_bytes_per_access,
                                               self.dram.t.t_ccd, write=True)
        stream = readout + writeback
        bond = self.bond.transfer_ns(in_bytes + out_bytes)
        transfer = max(stream, bond)
        access = math.ceil(rows / in_w) * math.ceil(cols / out_w) * self.spec.access_time
        if transfer >= access:
            return GemmResult(transfer, transfer, 'transfer', 'readout' if stream >= bond else 'bond')
        return GemmResult(access, access, 'compute', 'compute')

    def gemm_bank(self, rows: int, cols: int, batch: int, layout: Optional[str] = None,
                  repeat: int = 1) -> GemmResult:
        """
        Matrix-Vektor-Produkte der residenten Kachel für ``batch`` Eingangsvektoren

        Pro Vektor gilt max(Transfer, Makrozugriffe); Transfer ist der langsamere
        von DRAM-Auslesen und Bond.

        Raises:
            LayoutMismatchError: keine residente Kachel oder Kachel passt nicht zum Layout
        """
        layout = layout or self.spec.layout
        if batch <= 0 or rows <= 0 or cols <= 0:
            return GemmResult(0.0, 0.0, 'compute', 'compute')
        if self.macros.resident_weight_tile is None:
            raise LayoutMismatchError(f"Bank {self.bank_id}: keine Gewichte resident")
        if layout not in ('IN512_OUT8', 'IN256_OUT16'):
            raise LayoutMismatchError(f"Unbekanntes Layout: {layout}")
        if rows * cols * 2 > self.macros.resident_bytes:
            raise LayoutMismatchError(
                f"Kachel {rows}x{cols} größer als die residenten {self.macros.resident_bytes} B")

        result = self.per_vector(rows, cols, layout)
        in_bytes, out_bytes = rows * 2, cols * 2
        self.dram.readout_ns(in_bytes, repeat=batch * repeat)
        self.dram.writeback_ns(out_bytes, repeat=batch * repeat)
        self.bond.move(in_bytes + out_bytes, repeat=batch * repeat)
        macs = rows * cols * batch * repeat
        self.stats['macs'] += macs
        self._record('compute', in_bytes * batch)
        self._record('writeback', out_bytes * batch)
        total = result.per_vector_ns * batch
        self.macros.busy_until += total * repeat
        return GemmResult(total, result.per_vector_ns, result.bottleneck, result.detail, macs)

    def energy_pj(self) -> Dict[str, float]:
        return {
            'sram': sram_energy(self.stats['macs'], self.spec.tops_per_watt),
            'bond': self.bond.energy_pj,
        }


def gemm_weights(bank: SramPimBank, rows: int, cols: int, batch: int, layout: str,
                 resident_tile: Optional[str] = None) -> GemmResult:
    """
    Eine komplette Gewichtsmatrix rows x cols einer Bank über SRAM-PIM

    Die Matrix wird in Kacheln zerlegt; jede Kachel wird geladen und für alle
    Vektoren des Batches genutzt. Passt die Matrix vollständig in die Makros
    und ist ``resident_tile`` bereits geladen, entfällt das Nachladen.
    """
    if rows <= 0 or cols <= 0 or batch <= 0:
        return GemmResult(0.0, 0.0, 'compute', 'compute')
    tile_rows, tile_cols = tile_shape(bank.spec, layout)
    shapes = split_tiles(rows, cols, tile_rows, tile_cols)
    single = sum(shapes.values()) == 1
    total = 0.0
    load_total = 0.0
    macs = 0
    worst: Optional[GemmResult] = None
    for (r, c), count in shapes.items():
        tile_id = resident_tile if single else None
        load = bank.load_weights(r * c * 2, tile_id=tile_id, repeat=count) * count
        res = bank.gemm_bank(r, c, batch, layout, repeat=count)
        load_total += load
        total += load + res.ns * count
        macs += res.macs
        if worst is None or res.ns * count > worst.ns:
            worst = GemmResult(res.ns * count, res.per_vector_ns, res.bottleneck, res.detail)
    logger.debug("sram bank%d gemm %dx%d batch=%d layout=%s: %.0f ns (load %.0f ns)",
                 bank.bank_id, rows, cols, batch, layout, total, load_total)
    return GemmResult(total, worst.per_vector_ns, worst.bottleneck, worst.detail, macs)
