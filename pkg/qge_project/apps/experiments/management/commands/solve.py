from qge_project.apps.experiments.commands import StudyCommand
from qge_project.apps.experiments.studies import run_solve


class Command(StudyCommand):
    help = 'Solve the configured problem with one method at every size of --h-list'
    kind = 'solve'
    study = staticmethod(run_solve)
