"""
Parameter-Gitter für Sweeps
"""

import itertools
from dataclasses import replace
from typing import Any, Dict, List, Mapping, Optional, Sequence

from config.hardware import HardwareConfig, ModelConfig, RunConfig


def _with_field(run: RunConfig, path: str, value: Any) -> RunConfig:
    """Setzt ein (ggf. punktiertes) Feld, z.B. 'mapping.fc_split'"""
    head, _, rest = path.partition('.')
    if rest:
        return replace(run, **{head: replace(getattr(run, head), **{rest: value})})
    run = replace(run, **{head: value})
    if head in ('tp_degree', 'pp_degree'):
        run = replace(run, mapping=replace(run.mapping, **{head: value}))
    return run


def expand_grid(base: RunConfig, axes: Mapping[str, Sequence[Any]]) -> List[RunConfig]:
    """Kartesisches Produkt der Achsen in fester Reihenfolge"""
    names = list(axes)
    points = []
    for values in itertools.product(*(axes[n] for n in names)):
        run = base
        for name, value in zip(names, values):
            run = _with_field(run, name, value)
        points.append(run)
    return points


def sweep(model: ModelConfig, hw: HardwareConfig, runs: Sequence[RunConfig],
          max_workers: Optional[int] = None, scope: str = 'full') -> List[Dict[str, Any]]:
    """
    Unabhängige Läufe; Fehler einzelner Punkte werden protokolliert, der Sweep läuft weiter

    Returns:
        List[Dict]: Report-Dicts bzw. {'status': 'error', ...} in Gitterreihenfolge
    """
    from compair.tasks.sweep_tasks import run_sweep
    return run_sweep([(model, run, hw) for run in runs], max_workers=max_workers, scope=scope)
