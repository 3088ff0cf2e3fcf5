"""
Pytest configuration and shared fixtures.

Meshes, discretizations and a solved sine-squared instance are built once per
session; the numerics tests only read them.

To skip the minute-scale studies:
    pytest -m "not slow"

To run only the command and API tests:
    pytest -m commands
"""

import os

import pytest

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "qge_project.settings")


@pytest.fixture(autouse=True)
def enable_db_access_for_all_tests(db):
    """Enable database access for all tests"""
    pass


@pytest.fixture(autouse=True)
def isolate_outputs(request, settings, tmp_path):
    """
    Point the output directory of tests marked 'commands' at a temporary
    directory, so that study tables never land in the working tree.
    """
    if request.node.get_closest_marker("commands"):
        settings.QGE_SOLVER = {**settings.QGE_SOLVER, "OUTPUT_DIR": str(tmp_path / "results")}


@pytest.fixture(scope="session")
def unit_mesh_half():
    from qge_project.apps.fem.mesh import UNIT_SQUARE, generate_rect_mesh

    return generate_rect_mesh(UNIT_SQUARE, 0.5)


@pytest.fixture(scope="session")
def unit_mesh_quarter():
    from qge_project.apps.fem.mesh import UNIT_SQUARE, generate_rect_mesh

    return generate_rect_mesh(UNIT_SQUARE, 0.25)


@pytest.fixture(scope="session")
def disc_half(unit_mesh_half):
    from qge_project.apps.fem.assembly import Discretization

    return Discretization(unit_mesh_half, degree=14, workers=1)


@pytest.fixture(scope="session")
def disc_quarter(unit_mesh_quarter):
    from qge_project.apps.fem.assembly import Discretization

    return Discretization(unit_mesh_quarter, degree=14, workers=1)


@pytest.fixture(scope="session")
def sine_squared():
    from qge_project.apps.fem.analysis import get_problem

    return get_problem("sine-squared")


@pytest.fixture(scope="session")
def unit_params():
    from qge_project.apps.fem.assembly import FlowParams

    return FlowParams(reynolds=1.0, rossby=1.0)


@pytest.fixture(scope="session")
def solved_quarter(disc_quarter, sine_squared, unit_params):
    """One-level Newton solution of the sine-squared problem on the h = 1/4 mesh."""
    from qge_project.apps.fem.solver import NewtonSettings, solve_one_level

    return solve_one_level(disc_quarter, unit_params, sine_squared.forcing(unit_params), NewtonSettings())
