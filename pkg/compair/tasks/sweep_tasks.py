"""
Sweep-Ausführung: lokale Threads oder Celery-Worker
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config import get_config, load_config, serialize_config
from config.hardware import HardwareConfig, ModelConfig, RunConfig
from compair.celery_app import celery_app
from compair.engine.simulator import run as simulate

CELERY_AVAILABLE = celery_app is not None

logger = logging.getLogger(__name__)

Point = Tuple[ModelConfig, RunConfig, HardwareConfig]


def _describe(model: ModelConfig, run: RunConfig) -> Dict[str, Any]:
    return {
        'model': model.name, 'arch_variant': run.arch_variant, 'phase': run.phase, 'batch': run.batch,
        'prompt_len': run.prompt_len, 'gen_len': run.gen_len, 'tp_degree': run.tp_degree,
        'pp_degree': run.pp_degree, 'fc_split': run.mapping.fc_split, 'sram_layout': run.mapping.sram_layout,
    }


def run_point(index: int, model: ModelConfig, run: RunConfig, hw: HardwareConfig,
              scope: str = 'full') -> Dict[str, Any]:
    """Ein Gitterpunkt; Fehler werden als Datensatz zurückgegeben"""
    try:
        report = simulate(model, run, hw, scope=scope).to_dict()
        report['index'] = index
        return report
    except Exception as e:
        logger.error(f"❌ Punkt {index} ({model.name}, {run.arch_variant}, batch={run.batch}): {e}")
        record = _describe(model, run)
        record.update({'index': index, 'status': 'error', 'error': str(e),
                       'diagnostic': getattr(e, 'diagnostic', {})})
        return record


def simulate_point(document: str, index: int = 0, scope: str = 'full') -> Dict[str, Any]:
    """Celery-taugliche Variante: Konfiguration als JSON-Dokument"""
    hw, model, run = load_config(document, env={})
    return run_point(index, model, run, hw, scope)


if CELERY_AVAILABLE:
    simulate_point_task = celery_app.task(name='compair.tasks.sweep_tasks.simulate_point_task')(simulate_point)
else:
    simulate_point_task = None


def _run_celery(points: Sequence[Point], scope: str) -> List[Dict[str, Any]]:
    pending = [simulate_point_task.delay(serialize_config(hw, model, run), i, scope)
               for i, (model, run, hw) in enumerate(points)]
    return [result.get() for result in pending]


def run_sweep(points: Sequence[Point], max_workers: Optional[int] = None,
              scope: str = 'full', use_celery: Optional[bool] = None) -> List[Dict[str, Any]]:
    """
    Führt alle Punkte unabhängig aus

    Args:
        points: (Modell, Lauf, Hardware) je Gitterpunkt
        max_workers: Threads (Standard: Config.SWEEP_WORKERS)
        use_celery: Standard: Config.USE_CELERY, sofern Celery verfügbar

    Returns:
        List[Dict]: Ergebnisse nach Gitterindex sortiert
    """
    cfg = get_config()
    if use_celery is None:
        use_celery = cfg.USE_CELERY
    if not points:
        return []
    logger.info(f"🚀 Starte Sweep mit {len(points)} Punkten")

    if use_celery and CELERY_AVAILABLE:
        results = _run_celery(points, scope)
    else:
        results = []
        with ThreadPoolExecutor(max_workers=max_workers or cfg.SWEEP_WORKERS) as executor:
            future_to_index = {
                executor.submit(run_point, i, model, run, hw, scope): i
                for i, (model, run, hw) in enumerate(points)
            }
            for future in as_completed(future_to_index):
                results.append(future.result())

    results.sort(key=lambda r: r['index'])
    failed = sum(1 for r in results if r.get('status') == 'error')
    logger.info(f"✅ Sweep abgeschlossen: {len(results) - failed} ok, {failed} Fehler")
    return results
