from qge_project.apps.experiments.commands import StudyCommand
from qge_project.apps.experiments.studies import run_efficiency_study


class Command(StudyCommand):
    help = 'Compare one-level and two-level solves at matched fine sizes (error and wall time)'
    kind = 'efficiency'
    study = staticmethod(run_efficiency_study)
