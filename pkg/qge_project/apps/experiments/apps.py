from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "qge_project.apps.experiments"
    verbose_name = "Convergence experiments"
