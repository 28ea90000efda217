# verifier/conf.py
from django.conf import settings


def setting(name):
    """Look up one numerical default from settings.CDVERIFY."""
    return settings.CDVERIFY[name]


def tolerance(name, scale=None):
    """A pass tolerance from settings, multiplied by the run's tolerance scale."""
    if scale is None:
        scale = settings.CDVERIFY["TOLERANCE_SCALE"]
    return settings.CDVERIFY[name] * scale
