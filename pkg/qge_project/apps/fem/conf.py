"""
Access to the ``QGE_SOLVER`` settings dictionary.

Values given in ``settings.QGE_SOLVER`` override the defaults below, key by key.
"""

from django.conf import settings

DEFAULTS = {
    "QUADRATURE_DEGREE": 14,
    "NEWTON_ABS_TOL": 1e-11,
    "NEWTON_REL_TOL": 1e-12,
    "NEWTON_STEP_TOL": 1e-10,
    "NEWTON_MAX_ITERS": 25,
    "CONTINUATION_STEPS": 3,
    "WORKERS": 1,
    "ASSEMBLY_CHUNK_SIZE": 512,
    "LOOKUP": "stored",
    "OUTPUT_DIR": "results",
}


def solver_settings():
    """Return the merged solver settings as a new dict."""
    merged = dict(DEFAULTS)
    merged.update(getattr(settings, "QGE_SOLVER", {}) or {})
    return merged


def get_setting(name):
    return solver_settings()[name]
