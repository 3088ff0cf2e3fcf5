"""
URL configuration for qge_project.

The admin browses stored experiment runs; ``api/`` publishes them read-only.
"""

from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path("admin/", admin.site.urls),
    path("api/", include("qge_project.apps.experiments.urls")),
]
