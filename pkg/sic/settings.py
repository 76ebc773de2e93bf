"""
Django settings for the sic project.

The project has no HTTP surface: it is driven through ``manage.py`` and the
``sic_*`` management commands. Settings cover the database used by the run
ledger, logging, and the few process-level knobs of the experiment runner.
"""

from pathlib import Path

import os
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Only used to satisfy Django's startup checks; nothing is signed.
SECRET_KEY = os.getenv('SIC_SECRET_KEY', 'sic-offline-toolkit-no-secrets')

DEBUG = os.getenv('SIC_DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'fxp',
    'sigmodel',
    'lincanc',
    'polycanc',
    'nncanc',
    'hwmodel',
    'metrics',
    'experiments',
]

MIDDLEWARE = []


# Database
# The run ledger is small; sqlite is the default, PostgreSQL when DB_NAME is set.

if os.getenv('DB_NAME'):
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.getenv('DB_NAME'),
            'USER': os.getenv('DB_USER'),
            'PASSWORD': os.getenv('DB_PASSWORD'),
            'HOST': os.getenv('DB_HOST'),
            'PORT': os.getenv('DB_PORT'),
        }
    }
else:
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


# Experiment runner

SIC_DEFAULTS_FILE = BASE_DIR / 'config' / 'defaults.json'

# The only experiment value taken from the environment.
SIC_OUTPUT_ROOT = Path(os.getenv('SIC_OUTPUT_ROOT', str(BASE_DIR / 'runs')))

SIC_LOG_LEVEL = os.getenv('SIC_LOG_LEVEL', 'INFO')


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': SIC_LOG_LEVEL,
            'propagate': False,
        }
        for app in (
            'fxp', 'sigmodel', 'lincanc', 'polycanc',
            'nncanc', 'hwmodel', 'metrics', 'experiments',
        )
    },
}
