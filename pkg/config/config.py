"""
Prozess-Konfiguration für den CompAir-Simulator (Umgebungsvariablen / .env)
"""

import os

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


DEFAULT_ENV = 'default'


class Config:
    ENV = os.environ.get('COMPAIR_ENV', DEFAULT_ENV)
    DEBUG = os.environ.get('DEBUG', 'false').lower() == 'true'
    LOG_LEVEL = os.environ.get('COMPAIR_LOG_LEVEL', 'INFO').upper()

    # Ausgabeverzeichnis für Reports und Sweep-CSVs
    OUT_DIR = os.environ.get('COMPAIR_OUT_DIR', os.path.join(os.getcwd(), 'out'))

    # Reproduzierbarkeit
    SEED = int(os.environ.get('COMPAIR_SEED', '0'))

    # Sweep-Ausführung
    SWEEP_WORKERS = int(os.environ.get('COMPAIR_SWEEP_WORKERS', '4'))
    USE_CELERY = os.environ.get('COMPAIR_USE_CELERY', 'false').lower() == 'true'
    CELERY_BROKER_URL = os.environ.get('CELERY_BROKER_URL', 'redis://redis:6379/0')
    CELERY_RESULT_BACKEND = os.environ.get('CELERY_RESULT_BACKEND', 'redis://redis:6379/0')

    # Online-Timing-Monitor der DRAM-Bänke
    DEBUG_TIMING = os.environ.get('COMPAIR_DEBUG_TIMING', 'false').lower() == 'true'

    # Decode: simulierte Tokens, danach lineare Extrapolation
    DECODE_WINDOW = int(os.environ.get('COMPAIR_DECODE_WINDOW', '64'))

    # Watchdog für die Flit-Simulation
    NOC_MAX_CYCLES = int(os.environ.get('COMPAIR_NOC_MAX_CYCLES', '1000000'))


class DevelopmentConfig(Config):
    DEBUG = True
    DEBUG_TIMING = os.environ.get('COMPAIR_DEBUG_TIMING', 'true').lower() == 'true'


class ProductionConfig(Config):
    DEBUG = False


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'default': ProductionConfig
}


def get_config():
    return config[os.environ.get('COMPAIR_ENV', DEFAULT_ENV)]
