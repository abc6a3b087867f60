# Engine: End-to-End-Simulation, Kollektive, Reports und Sweeps
from .collectives import COLLECTIVE_KINDS, cxl_collective, link_energy_pj
from .events import CausalityError, Event, EventQueue
from .report import ENERGY_COMPONENTS, PHASES, REPORT_FIELDS, SimReport, reports_to_csv
from .simulator import QKV_OPS, GraphNode, OpCost, SimulationError, Simulator, StepResult, check_report, run
from .sweep import expand_grid, sweep

__all__ = [
    'COLLECTIVE_KINDS', 'cxl_collective', 'link_energy_pj', 'CausalityError', 'Event', 'EventQueue',
    'ENERGY_COMPONENTS', 'PHASES', 'REPORT_FIELDS', 'SimReport', 'reports_to_csv', 'QKV_OPS', 'GraphNode', 'OpCost',
    'SimulationError', 'Simulator', 'StepResult', 'check_report', 'run', 'expand_grid', 'sweep',
]
