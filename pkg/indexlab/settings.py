"""
Django settings for the indexlab project.

Only the ORM and management commands are used; there is no web surface.
Environment variables are read from a .env file next to manage.py.
"""

from pathlib import Path
import os

import psutil
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file
load_dotenv(BASE_DIR / '.env')


SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-indexlab-local-only')

DEBUG = os.environ.get('DEBUG', 'True').lower() in ('true', '1', 'yes')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'topology',
]


# Database
# Sweep runs and their points are checkpointed here so interrupted sweeps resume.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('TOPOLOGY_DB_PATH', str(BASE_DIR / 'indexlab.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Computation

# Directory for JSON reports and CSV tables when a command is not given --out
TOPOLOGY_OUTPUT_DIR = Path(os.environ.get('TOPOLOGY_OUTPUT_DIR', str(BASE_DIR / 'results')))

# Worker threads for sweeps; defaults to the number of physical cores
TOPOLOGY_THREADS = int(os.environ.get('TOPOLOGY_THREADS', '0')) or (psutil.cpu_count(logical=False) or 1)

TOPOLOGY_LOG_LEVEL = os.environ.get('TOPOLOGY_LOG_LEVEL', 'INFO').upper()

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
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
        'topology': {
            'handlers': ['console'],
            'level': TOPOLOGY_LOG_LEVEL,
            'propagate': False,
        },
    },
}
