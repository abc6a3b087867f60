"""
Celery-Konfiguration für Simulations-Sweeps
"""

import os
from celery import Celery


def make_celery(app_name='compair'):
    """Celery-App Factory"""

    celery = Celery(
        app_name,
        broker=os.getenv('CELERY_BROKER_URL', 'redis://redis:6379/0'),
        backend=os.getenv('CELERY_RESULT_BACKEND', 'redis://redis:6379/0'),
        include=['compair.tasks.sweep_tasks']
    )

    celery.conf.update(
        task_serializer='json',
        accept_content=['json'],
        result_serializer='json',
        enable_utc=True,

        # Ein Simulationspunkt pro Worker-Slot, Bestätigung erst nach Abschluss
        worker_prefetch_multiplier=1,
        task_acks_late=True,

        task_routes={
            'compair.tasks.sweep_tasks.*': {'queue': 'sweeps'},
        },
    )

    return celery
