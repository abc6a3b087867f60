# Sweep-Tasks
from .sweep_tasks import run_point, run_sweep, simulate_point

__all__ = ['run_point', 'run_sweep', 'simulate_point']
