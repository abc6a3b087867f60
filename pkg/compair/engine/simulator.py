"""
Ereignisgesteuerter End-to-End-Simulator (Prefill + Decode)

Pro Schicht entsteht ein Abhängigkeitsgraph: RMSNorm -> Q/K/V -> RoPE ->
Score -> Softmax -> SV -> O -> Kollektiv -> RMSNorm -> Up/Gate -> SiLU ->
Down -> Kollektiv. Jeder Operator belegt eine Ressource (dram, sram, noc, nlu,
cxl). Ein Operator startet, sobald seine Eingaben fertig sind und seine
Ressource frei ist; unabhängige Operatoren auf verschiedenen Ressourcen
überlappen (z. B. RoPE auf dem NoC neben der V-Projektion). Die Phasenfelder
zählen belegte Zyklen, ``overlap_cycles`` die gleichzeitig belegten.
"""

import heapq
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.hardware import HardwareConfig, ModelConfig, RunConfig, variant_hardware
from compair.kernels import KernelCosts, kernel_costs
from compair.mapper import (
    CapacityError, TilePlan, estimate_utilization, plan_layer, sram_tile_cost, stage_layers, stream_cost,
)
from compair.noc import DeadlockError, FlitConservationError
from .collectives import cxl_collective, link_energy_pj
from .events import EventQueue
from .report import ENERGY_COMPONENTS, PHASES, SimReport

logger = logging.getLogger(__name__)

QKV_OPS = ('q', 'k', 'v')
SCOPES = ('full', 'qkv')

_NL_CYCLES = {
    'rmsnorm_attn': 'rmsnorm_per_elem',
    'rmsnorm_ffn': 'rmsnorm_per_elem',
    'softmax': 'softmax_per_elem',
    'silu': 'silu_per_elem',
}
_NL_ENERGY = {
    'rmsnorm_attn': 'rmsnorm_pj',
    'rmsnorm_ffn': 'rmsnorm_pj',
    'softmax': 'softmax_pj',
    'silu': 'silu_pj',
}


class SimulationError(RuntimeError):
    """Abbruch eines Laufs (Kapazität, Deadlock, verletzte Invariante)"""

    def __init__(self, message: str, diagnostic: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


@dataclass
class OpCost:
    name: str
    phase: str
    cycles: int
    energy: Dict[str, float] = field(default_factory=dict)
    # belegte Einheit: dram, sram, noc, nlu oder cxl
    resource: str = 'dram'


@dataclass(frozen=True)
class GraphNode:
    key: str
    op: OpCost
    deps: Tuple[str, ...] = ()


def _empty_energy() -> Dict[str, float]:
    return {c: 0.0 for c in ENERGY_COMPONENTS}


def _empty_phases() -> Dict[str, int]:
    return {p: 0 for p in PHASES}


@dataclass
class StepResult:
    """Latenz und Energie eines Prefill-Durchlaufs oder eines Decode-Tokens"""
    cycles: int = 0
    phases: Dict[str, int] = field(default_factory=_empty_phases)
    energy: Dict[str, float] = field(default_factory=_empty_energy)

    @property
    def overlap(self) -> int:
        """Zyklen, in denen mehrere Ressourcen gleichzeitig belegt sind"""
        return sum(self.phases.values()) - self.cycles


class Simulator:
    """
    Ein Simulationslauf; nicht zwischen Threads teilen

    Args:
        scope: 'full' oder 'qkv' (nur die Q/K/V-Projektionen)
        check_causality: Abhängigkeitsprüfung der Ereignisse (Debug)
    """

    def __init__(self, model: ModelConfig, run: RunConfig, hw: HardwareConfig,
                 scope: str = 'full', check_causality: bool = False):
        if scope not in SCOPES:
            raise ValueError(f"Unbekannter Umfang: {scope}")
        self.model = model
        self.run_cfg = run
        self.hw = variant_hardware(hw, run.arch_variant)
        self.scope = scope
        self.check_causality = check_causality
        self.stages = stage_layers(model.num_layers, run.pp_degree)
        self._plans: Dict[str, TilePlan] = {}
        self._kernels: Optional[KernelCosts] = None

    # ------------------------------------------------------------------
    # Pläne und Kernel-Kosten
    # ------------------------------------------------------------------

    def plan(self, phase: str) -> TilePlan:
        if phase not in self._plans:
            self._plans[phase] = plan_layer(self.model, self.run_cfg, self.hw, phase=phase)
        return self._plans[phase]

    @property
    def kernels(self) -> KernelCosts:
        if self._kernels is None:
            self._kernels = kernel_costs(self.hw)
        return self._kernels

    # ------------------------------------------------------------------
    # Operatorkosten
    # ------------------------------------------------------------------

    def fc_cost(self, plan: TilePlan, name: str) -> OpCost:
        op = plan.fc[name]
        cycles = self.hw.cycles(op.cost.ns)
        energy = _empty_energy()
        for key, value in op.cost.energy.items():
            energy[key] += value
        if op.reduction and op.reduce_group > 1:
            cols = op.max_tile[1]
            kc = self.kernels
            cycles += op.reduce_levels * math.ceil(kc.reduce_pair_per_elem * cols * plan.batch)
            energy['noc'] += kc.reduce_pj * op.cols * plan.batch * (op.reduce_group - 1)
        return OpCost(name, 'fc', cycles, energy, op.target)

    def attention_cost(self, plan: TilePlan, seq: int, queries: int) -> Tuple[OpCost, OpCost]:
        """Score und SV einer Schicht; ``queries`` Abfragen pro Batch-Element"""
        m = self.model
        batch = self.run_cfg.batch
        g = m.group_size
        slots = math.ceil(m.kv_heads * seq / plan.banks)
        busy = min(plan.banks, m.kv_heads * seq)
        if plan.attention.target == 'sram_gqa':
            layout = self.run_cfg.mapping.sram_layout
            score = sram_tile_cost(self.hw, m.head_dim, slots, g * queries, layout)
            sv = sram_tile_cost(self.hw, slots, m.head_dim, g * queries, layout)
            parts = ((score.ns * batch, score.energy), (sv.ns * batch, sv.energy))
        else:
            per_pass = stream_cost(self.hw, g * slots * m.head_dim * 2)
            ns = per_pass.ns * queries * batch
            parts = ((ns, per_pass.energy), (ns, per_pass.energy))
        resource = 'dram' if plan.attention.target == 'dram' else 'sram'
        result = []
        for label, (ns, energy) in zip(('score', 'sv'), parts):
            e = _empty_energy()
            scale = busy * batch * (queries if plan.attention.target == 'dram' else 1)
            for key, value in energy.items():
                e[key] += value * scale
            result.append(OpCost(label, 'attention', self.hw.cycles(ns), e, resource))
        return result[0], result[1]

    def nonlinear_cost(self, plan: TilePlan, name: str, seq: int, vectors: int) -> OpCost:
        nl = plan.nonlinear[name]
        elems = nl.elements * (seq if nl.per_position else 1) * vectors
        energy = _empty_energy()
        if nl.target == 'nlu':
            passes = self.hw.nlu.softmax_passes if name == 'softmax' else 1
            cycles = math.ceil(elems * self.hw.nlu.cycles_per_element * passes / self.run_cfg.tp_degree)
            return OpCost(name, 'nonlinear', cycles, energy, 'nlu')
        kc = self.kernels
        if name == 'rope':
            heads = math.ceil(elems / self.model.head_dim)
            cycles = math.ceil(heads / plan.banks) * kc.rope_head
            energy['noc'] = heads * kc.rope_pj
        else:
            per_bank = math.ceil(elems / plan.banks)
            cycles = math.ceil(getattr(kc, _NL_CYCLES[name]) * per_bank)
            energy['noc'] = getattr(kc, _NL_ENERGY[name]) * elems
        return OpCost(name, 'nonlinear', cycles, energy, 'noc')

    def collective_cost(self, vectors: int, kind: str) -> OpCost:
        nbytes = self.model.hidden_size * 2 * vectors
        ic = self.hw.interconnect
        energy = _empty_energy()
        if kind == 'p2p':
            ns = cxl_collective(nbytes, 'p2p', 2, ic)
            energy['link'] = link_energy_pj(nbytes, 'p2p', 2, ic)
        else:
            tp = self.run_cfg.tp_degree
            ns = cxl_collective(nbytes, 'reduce', tp, ic) + cxl_collective(nbytes, 'broadcast', tp, ic)
            energy['link'] = link_energy_pj(nbytes, 'reduce', tp, ic) + link_energy_pj(nbytes, 'broadcast', tp, ic)
        return OpCost(f'cxl_{kind}', 'collective', self.hw.cycles(ns), energy, 'cxl')

    def layer_graph(self, phase: str, seq: int) -> List[GraphNode]:
        """
        Operatoren einer Schicht in topologischer Reihenfolge

        Args:
            seq: Sequenzlänge, gegen die die Abfragen laufen (Decode: inkl. neuem Token)

        Abhängigkeiten auf ``'in'`` verweisen auf den Ausgang der vorigen Schicht.
        """
        plan = self.plan(phase)
        if self.scope == 'qkv':
            return [GraphNode(name, self.fc_cost(plan, name), ('in',)) for name in QKV_OPS]
        queries = self.run_cfg.prompt_len if phase == 'prefill' else 1
        vectors = plan.batch
        fc = {name: self.fc_cost(plan, name) for name in plan.fc}
        score, sv = self.attention_cost(plan, seq, queries)

        def nl(name: str) -> OpCost:
            return self.nonlinear_cost(plan, name, seq, vectors)

        nodes = [
            GraphNode('rmsnorm_attn', nl('rmsnorm_attn'), ('in',)),
            GraphNode('q', fc['q'], ('rmsnorm_attn',)),
            GraphNode('k', fc['k'], ('rmsnorm_attn',)),
            GraphNode('v', fc['v'], ('rmsnorm_attn',)),
            GraphNode('rope', nl('rope'), ('q', 'k')),
            GraphNode('score', score, ('rope',)),
            GraphNode('softmax', nl('softmax'), ('score',)),
            GraphNode('sv', sv, ('softmax', 'v')),
            GraphNode('o', fc['o'], ('sv',)),
        ]
        last = 'o'
        if self.run_cfg.tp_degree > 1:
            nodes.append(GraphNode('allreduce_attn', self.collective_cost(vectors, 'allreduce'), (last,)))
            last = 'allreduce_attn'
        nodes.append(GraphNode('rmsnorm_ffn', nl('rmsnorm_ffn'), (last,)))
        nodes.append(GraphNode('up', fc['up'], ('rmsnorm_ffn',)))
        if 'gate' in fc:
            nodes.append(GraphNode('gate', fc['gate'], ('rmsnorm_ffn',)))
            nodes.append(GraphNode('silu', nl('silu'), ('gate',)))
            nodes.append(GraphNode('down', fc['down'], ('silu', 'up')))
        else:
            nodes.append(GraphNode('silu', nl('silu'), ('up',)))
            nodes.append(GraphNode('down', fc['down'], ('silu',)))
        if self.run_cfg.tp_degree > 1:
            nodes.append(GraphNode('allreduce_ffn', self.collective_cost(vectors, 'allreduce'), ('down',)))
        return nodes

    def layer_ops(self, phase: str, seq: int) -> List[OpCost]:
        return [node.op for node in self.layer_graph(phase, seq)]

    # ------------------------------------------------------------------
    # Ereignisschleife
    # ------------------------------------------------------------------

    def step(self, phase: str, seq: int) -> StepResult:
        """Ein Durchlauf durch alle Schichten aller Stufen"""
        template = self.layer_graph(phase, seq)
        consumed = {d for node in template for d in node.deps}
        sinks = [node.key for node in template if node.key not in consumed]
        boundary = None
        if len(self.stages) > 1 and self.scope == 'full':
            boundary = self.collective_cost(self.plan(phase).batch, 'p2p')

        ops: List[OpCost] = []
        deps: List[List[int]] = []
        inputs: List[int] = []
        for s, layers in enumerate(self.stages):
            for _ in range(layers):
                index: Dict[str, int] = {}
                for node in template:
                    index[node.key] = len(ops)
                    ops.append(node.op)
                    deps.append([i for d in node.deps for i in (inputs if d == 'in' else (index[d],))])
                inputs = [index[key] for key in sinks]
            if boundary is not None and s < len(self.stages) - 1:
                ops.append(boundary)
                deps.append(inputs)
                inputs = [len(ops) - 1]
        return self.schedule(ops, deps)

    def schedule(self, ops: Sequence[OpCost], deps: Sequence[Sequence[int]]) -> StepResult:
        """
        Listenplanung über die Ereigniswarteschlange

        'start' belegt die Ressource des Operators, 'done' gibt sie frei und
        macht Nachfolger bereit. Bereite Operatoren einer Ressource starten in
        topologischer Reihenfolge.
        """
        result = StepResult()
        waiting = [len(d) for d in deps]
        successors: List[List[int]] = [[] for _ in ops]
        for i, ds in enumerate(deps):
            for d in ds:
                successors[d].append(i)
        inputs_ready = [0] * len(ops)
        pending: Dict[str, List[int]] = defaultdict(list)
        busy: Dict[str, bool] = defaultdict(bool)
        for i, n in enumerate(waiting):
            if n == 0:
                heapq.heappush(pending[ops[i].resource], i)

        queue = EventQueue(check_causality=self.check_causality)
        now = 0
        while True:
            for resource in sorted(pending):
                if pending[resource] and not busy[resource]:
                    i = heapq.heappop(pending[resource])
                    busy[resource] = True
                    queue.push(now, 'start', i, ready=inputs_ready[i])
            if not queue:
                break
            event = queue.pop()
            now = event.time
            op = ops[event.payload]
            if event.kind == 'start':
                result.phases[op.phase] += op.cycles
                for key, value in op.energy.items():
                    result.energy[key] += value
                queue.push(now + op.cycles, 'done', event.payload)
                continue
            busy[op.resource] = False
            result.cycles = max(result.cycles, now)
            for s in successors[event.payload]:
                inputs_ready[s] = max(inputs_ready[s], now)
                waiting[s] -= 1
                if waiting[s] == 0:
                    heapq.heappush(pending[ops[s].resource], s)
        return result

    # ------------------------------------------------------------------
    # Gesamtlauf
    # ------------------------------------------------------------------

    def prefill(self) -> StepResult:
        # kausale Attention: im Mittel läuft jede Abfrage gegen die halbe Prompt-Länge
        seq = max(1, (self.run_cfg.prompt_len + 1) // 2)
        return self.step('prefill', seq)

    def decode(self) -> Tuple[StepResult, int]:
        """Simuliert das Decode-Fenster und extrapoliert linear bis gen_len"""
        run = self.run_cfg
        total = StepResult()
        if run.gen_len <= 0:
            return total, 0
        window = min(run.gen_len, run.decode_window)
        steps = [self.step('decode', run.prompt_len + t + 1) for t in range(window)]
        for s in steps:
            total.cycles += s.cycles
            for p in PHASES:
                total.phases[p] += s.phases[p]
            for c in ENERGY_COMPONENTS:
                total.energy[c] += s.energy[c]
        rest = run.gen_len - window
        if rest > 0:
            t = np.arange(window, dtype=np.float64)
            future = np.arange(window, run.gen_len, dtype=np.float64)
            busy = 0
            for p in PHASES:
                extra = int(round(_extrapolate(t, [s.phases[p] for s in steps], future)))
                total.phases[p] += extra
                busy += extra
            overlap = int(round(_extrapolate(t, [s.overlap for s in steps], future)))
            total.cycles += busy - min(max(overlap, 0), busy)
            for c in ENERGY_COMPONENTS:
                total.energy[c] += _extrapolate(t, [s.energy[c] for s in steps], future)
            logger.debug("Decode: %d Tokens simuliert, %d extrapoliert", window, rest)
        return total, window

    def run(self) -> SimReport:
        run = self.run_cfg
        try:
            pre = self.prefill() if run.phase == 'prefill' else StepResult()
            dec, simulated = self.decode()
            plan = self.plan('prefill' if run.phase == 'prefill' and not simulated else 'decode')
        except CapacityError as e:
            raise SimulationError(f"Kapazität überschritten: {e}", e.shortfall) from e
        except (DeadlockError, FlitConservationError) as e:
            raise SimulationError(f"NoC-Simulation abgebrochen: {e}", {'noc': str(e)}) from e

        phases = {p: pre.phases[p] + dec.phases[p] for p in PHASES}
        energy = {c: pre.energy[c] + dec.energy[c] for c in ENERGY_COMPONENTS}
        report = SimReport(
            model=self.model.name, arch_variant=run.arch_variant, phase=run.phase, batch=run.batch,
            prompt_len=run.prompt_len, gen_len=run.gen_len, tp_degree=run.tp_degree,
            pp_degree=run.pp_degree, fc_split=run.mapping.fc_split, sram_layout=run.mapping.sram_layout,
        )
        report.prefill_cycles = pre.cycles
        report.decode_cycles = dec.cycles
        report.total_cycles = report.prefill_cycles + report.decode_cycles
        for p in PHASES:
            setattr(report, f'{p}_cycles', phases[p])
        report.overlap_cycles = sum(phases.values()) - report.total_cycles
        for c in ENERGY_COMPONENTS:
            setattr(report, f'energy_{c}_pj', energy[c])
        report.energy_total_pj = sum(energy[c] for c in ENERGY_COMPONENTS)
        generated = run.batch * run.gen_len
        if generated and report.decode_cycles:
            seconds = report.decode_cycles * self.hw.noc.clock_period * 1e-9
            report.tokens_per_second = generated / seconds
            report.energy_per_token_pj = report.energy_total_pj / generated
        report.simulated_tokens = simulated

        usage = estimate_utilization(plan)
        report.bank_utilization = usage.utilization
        report.bank_utilization_per_bank = usage.per_bank
        report.kv_rows_per_bank = plan.attention.kv_rows_per_bank
        ops = QKV_OPS if self.scope == 'qkv' else tuple(plan.fc)
        report.fc_ops = {name: plan.fc[name].to_dict() for name in ops}
        worst = max(ops, key=lambda name: plan.fc[name].cost.ns)
        cost = plan.fc[worst].cost
        report.fc_bottleneck = f"{cost.bottleneck}/{cost.detail}"
        check_report(report)
        return report


def _extrapolate(t: np.ndarray, values: Sequence[float], future: np.ndarray) -> float:
    """Summe der linearen Fortsetzung über ``future``"""
    y = np.asarray(values, dtype=np.float64)
    if len(y) < 2:
        return float(y[-1] * len(future))
    slope, intercept = np.polyfit(t, y, 1)
    return float(np.sum(slope * future + intercept))


def check_report(report: SimReport) -> None:
    """
    Raises:
        SimulationError: Phasensumme, Energiesumme oder Vorzeichen verletzt
    """
    phases = report.phase_cycles()
    if (sum(phases.values()) - report.overlap_cycles != report.total_cycles
            or not 0 <= report.overlap_cycles <= sum(phases.values())):
        raise SimulationError("Phasenlatenzen abzüglich Überlappung ergeben nicht die Gesamtlatenz",
                              {'phases': phases, 'overlap': report.overlap_cycles,
                               'total': report.total_cycles})
    energy = report.energy()
    if any(v < 0 for v in energy.values()):
        raise SimulationError("Negative Energie", {'energy': energy})
    if sum(energy[c] for c in ENERGY_COMPONENTS) != report.energy_total_pj:
        raise SimulationError("Energiekomponenten ergeben nicht die Gesamtenergie", {'energy': energy})


def run(model: ModelConfig, run_cfg: RunConfig, hw: HardwareConfig, scope: str = 'full',
        check_causality: bool = False) -> SimReport:
    """
    Simuliert einen Lauf

    Raises:
        SimulationError: Kapazität überschritten oder NoC-Watchdog
    """
    logger.info(f"🚀 Simulation {model.name} {run_cfg.arch_variant} batch={run_cfg.batch} "
                f"phase={run_cfg.phase} tp={run_cfg.tp_degree} pp={run_cfg.pp_degree}")
    report = Simulator(model, run_cfg, hw, scope=scope, check_causality=check_causality).run()
    logger.info(f"✅ {model.name} {run_cfg.arch_variant}: {report.total_cycles} Zyklen, "
                f"{report.tokens_per_second:.1f} Tokens/s")
    return report
