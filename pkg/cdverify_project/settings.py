"""
Django settings for cdverify_project project.

Generated by 'django-admin startproject' using Django 5.2.1.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Local overrides (tolerance scale, threads, seed, db path) live in .env
load_dotenv(BASE_DIR / ".env")


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv(
    "DJANGO_SECRET_KEY",
    "django-insecure-cdverify-local-runs-only",
)

DEBUG = os.getenv("DJANGO_DEBUG", "1") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "rest_framework",
    "verifier.apps.VerifierConfig",
]

REST_FRAMEWORK = {
    "COERCE_DECIMAL_TO_STRING": False,
    "UNAUTHENTICATED_USER": None,
}


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases
# Only `verify --save` touches the database.

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.getenv("CDVERIFY_DB_PATH", str(BASE_DIR / "cdverify.sqlite3")),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "verifier": {
            "handlers": ["console"],
            "level": os.getenv("CDVERIFY_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
    },
}


# Numerical defaults for every check. Command-line flags override the
# environment, which overrides these values.

CDVERIFY = {
    # run control
    "TOLERANCE_SCALE": float(os.getenv("CDVERIFY_TOLERANCE_SCALE", "1.0")),
    "THREADS": int(os.getenv("CDVERIFY_THREADS", "1")),
    "SEED": int(os.getenv("CDVERIFY_SEED", "0")),

    # distortion coefficients
    "SERIES_CUTOFF": 1e-8,

    # geometry
    "GEODESIC_STEPS": 32,
    "ODE_SUBSTEPS": 8,
    "FD_STEP": 1e-5,
    "CURVATURE_FD_STEP": 1e-4,
    "POLE_CAP": 1e-6,
    "ENERGY_DRIFT_TOL": 1e-8,
    "CONJUGATE_DET_TOL": 1e-12,

    # fields
    "ORTHOGONALITY_TOL": 1e-10,

    # transport
    "OT_MAX_SUPPORT": 400,
    "CIRCLE_OFFSETS": 512,
    "BIRKHOFF_CAP": 64,
    "QUANTILE_NODES": 3,
    "MARGINAL_TOL": 1e-10,

    # pass tolerances
    "EXACT_TOL": 1e-6,
    "BINNED_TOL": 1e-3,
    "EQUALITY_TOL": 1e-5,
    "SEMIGROUP_REL_TOL": 1e-2,
    "CONTRACTION_ABS_TOL": 1e-3,

    # comparison
    "POLAR_RAYS": 256,
    "RADIAL_NODES": 512,
    "DIAMETER_TOL": 1e-9,

    # warped products
    "WARP_BOUNDARY_MARGIN": 1e-4,
    "WARP_CONDITION_TOL": 1e-10,

    # semigroup
    "GENERATOR_SCHEME": "upwind",
    "EXPM_MAX_SIZE": 512,
    "NEGATIVE_DENSITY_TOL": 1e-12,
}


# Preset families the scenario files may name. Values are the parameters each
# family accepts, with their defaults.

FIELD_FAMILIES = {
    "zero": {},
    "constant-drift": {"c": 1.0},
    "ou-drift": {"rate": 1.0},
    "rotation-alpha": {"alpha": 1.0},
    "gradient-of-v": {"coefficients": [0.0], "sign": 1},
}

SPACE_KINDS = {
    "interval": {"a": 0.0, "b": 3.141592653589793},
    "circle": {"length": 6.283185307179586},
    "sphere2": {"radius": 1.0},
    "flat-torus2": {"lx": 6.283185307179586, "ly": 6.283185307179586},
    "warped-sphere": {"N": 3.0, "alpha": 0.0},
}
