from __future__ import annotations

from typing import Any

from django.conf import settings

DEFAULTS = {
    "LEVY_SYNC_DEFAULT_DT": 1e-3,
    "LEVY_SYNC_SKOROHOD_TOL": 1e-3,
    "LEVY_SYNC_SKOROHOD_M_MAX": 5,
    "LEVY_SYNC_SKOROHOD_MAX_REFINEMENT": 64,
    "LEVY_SYNC_DIVERGENCE_GUARD": 1e12,
    "LEVY_SYNC_PULLBACK_CAUCHY_TOL": 1e-6,
    "LEVY_SYNC_TRUNCATION_FACTOR": 40.0,
    "LEVY_SYNC_WORKERS": 1,
    "LEVY_SYNC_OUTPUT_ROOT": "runs",
}


def get_setting(name: str, default: Any = None) -> Any:
    """Read a project setting, falling back to DEFAULTS when Django is not configured."""
    fallback = DEFAULTS.get(name, default)
    if not settings.configured:
        return fallback
    return getattr(settings, name, fallback)


__all__ = ["DEFAULTS", "get_setting"]
