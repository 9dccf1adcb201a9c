"""
Django settings for the levy_sync project.

The project has no HTTP surface; Django supplies settings, logging
configuration, the ``levysync`` management command and the test runner.
Every ``LEVY_SYNC_*`` value can be overridden from the environment.
"""

from pathlib import Path
import os

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "levy-sync-local-only")

DEBUG = os.getenv("DJANGO_DEBUG", "false").lower() == "true"

ALLOWED_HOSTS = []


INSTALLED_APPS = [
    'levy_sync',
]

MIDDLEWARE = []

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Numerics
LEVY_SYNC_DEFAULT_DT = float(os.getenv("LEVY_SYNC_DEFAULT_DT", "1e-3"))
LEVY_SYNC_SKOROHOD_TOL = float(os.getenv("LEVY_SYNC_SKOROHOD_TOL", "1e-3"))
LEVY_SYNC_SKOROHOD_M_MAX = int(os.getenv("LEVY_SYNC_SKOROHOD_M_MAX", "5"))
LEVY_SYNC_SKOROHOD_MAX_REFINEMENT = int(os.getenv("LEVY_SYNC_SKOROHOD_MAX_REFINEMENT", "64"))  # cells per side
LEVY_SYNC_DIVERGENCE_GUARD = float(os.getenv("LEVY_SYNC_DIVERGENCE_GUARD", "1e12"))
LEVY_SYNC_PULLBACK_CAUCHY_TOL = float(os.getenv("LEVY_SYNC_PULLBACK_CAUCHY_TOL", "1e-6"))
LEVY_SYNC_TRUNCATION_FACTOR = float(os.getenv("LEVY_SYNC_TRUNCATION_FACTOR", "40"))

# Runs
LEVY_SYNC_WORKERS = int(os.getenv("LEVY_SYNC_WORKERS", "1"))
LEVY_SYNC_OUTPUT_ROOT = os.getenv("LEVY_SYNC_OUTPUT_ROOT", str(BASE_DIR / "runs"))

# Logging: experiment progress in console
LEVY_SYNC_LOG_LEVEL = os.getenv("LEVY_SYNC_LOG_LEVEL", "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "levy_sync": {"handlers": ["console"], "level": LEVY_SYNC_LOG_LEVEL},
    },
}
