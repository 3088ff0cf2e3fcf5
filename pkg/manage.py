#!/usr/bin/env python
"""
Command-line entry point.

Besides Django's own commands this runs the studies:

    python manage.py solve | efficiency | sweep_fine | sweep_coarse | check_acceptance

``QGE_SETTINGS`` selects another settings module.
"""
import os
import sys

SETTINGS_MODULE = "qge_project.settings"


def main(argv=None):
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", os.environ.get("QGE_SETTINGS", SETTINGS_MODULE))
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Django is not importable. Install the project with "
            "`pip install -r requirements.txt` inside an activated virtual environment."
        ) from exc
    execute_from_command_line(argv or sys.argv)


if __name__ == "__main__":
    main()
