from django.apps import AppConfig


class FemConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "qge_project.apps.fem"
    verbose_name = "Argyris finite elements"
