"""
Celery-Anwendung für verteilte Sweeps (optional)
"""

try:
    from config.celery_config import make_celery
    CELERY_AVAILABLE = True
except ImportError:
    CELERY_AVAILABLE = False
    make_celery = None

celery_app = make_celery('compair') if CELERY_AVAILABLE else None

if __name__ == '__main__':
    celery_app.start()
