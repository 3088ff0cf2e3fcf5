"""
WSGI entry point serving the admin and the read-only results API.

Solves never run inside a request; studies are started from ``manage.py``.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", os.environ.get("QGE_SETTINGS", "qge_project.settings"))

application = get_wsgi_application()
