"""
Manufactured solutions, forcing synthesis, error norms and observed orders.
"""

import logging
import math
from dataclasses import dataclass, fields, replace
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
import sympy

from .assembly import interpolate
from .exceptions import InvalidArgument
from .mesh import UNIT_SQUARE, Rectangle

logger = logging.getLogger(__name__)

X, Y = sympy.symbols("x y", real=True)
RE, RO = sympy.symbols("Re Ro", positive=True)
MAX_DERIVATIVE_ORDER = 4


def laplacian(expr):
    return sympy.diff(expr, X, 2) + sympy.diff(expr, Y, 2)


def poisson_bracket(u, v):
    """J(u, v) = u_x v_y - u_y v_x."""
    return sympy.diff(u, X) * sympy.diff(v, Y) - sympy.diff(u, Y) * sympy.diff(v, X)


class SymbolicField:
    """A closed-form function of (x, y) with lambdified partial derivatives."""

    def __init__(self, expr):
        self.expr = sympy.sympify(expr)
        self._compiled = {}

    def __repr__(self):
        return f"SymbolicField({self.expr})"

    def partial(self, a, b):
        if a < 0 or b < 0 or a + b > MAX_DERIVATIVE_ORDER:
            raise InvalidArgument(f"Derivative order ({a}, {b}) is not available")
        return sympy.diff(self.expr, X, a, Y, b)

    def derivative(self, a, b, points):
        """d^(a+b) f / dx^a dy^b at (n, 2) points."""
        key = (a, b)
        if key not in self._compiled:
            self._compiled[key] = sympy.lambdify((X, Y), self.partial(a, b), modules="numpy")
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        values = self._compiled[key](points[:, 0], points[:, 1])
        return np.broadcast_to(np.asarray(values, dtype=float), (len(points),)).copy()

    def __call__(self, points):
        return self.derivative(0, 0, points)


@dataclass(frozen=True)
class ForcingEvaluator:
    """
    Pointwise F for ``solution`` at ``params``:

        F = Ro Re^-1 lap^2 psi + Ro J(psi, lap psi) - psi_x
    """

    solution: "ManufacturedSolution"
    params: object
    include_advection: bool = True
    include_beta: bool = True

    def __call__(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        compiled = self.solution.compiled_forcing(self.include_advection, self.include_beta)
        values = compiled(points[:, 0], points[:, 1], self.params.reynolds, self.params.rossby)
        return np.broadcast_to(np.asarray(values, dtype=float), (len(points),)).copy()

    def for_params(self, params):
        return replace(self, params=params)


@dataclass(frozen=True, eq=False)
class ManufacturedSolution:
    identifier: str
    field: SymbolicField
    domain: Rectangle
    reynolds: float
    rossby: float
    description: str = ""

    def derivative(self, a, b, points):
        return self.field.derivative(a, b, points)

    def forcing_expr(self, include_advection=True, include_beta=True):
        psi = self.field.expr
        lap = laplacian(psi)
        expr = RO / RE * laplacian(lap)
        if include_advection:
            expr += RO * poisson_bracket(psi, lap)
        if include_beta:
            expr -= sympy.diff(psi, X)
        return expr

    @cached_property
    def _forcing_cache(self):
        return {}

    def compiled_forcing(self, include_advection=True, include_beta=True):
        key = (include_advection, include_beta)
        if key not in self._forcing_cache:
            self._forcing_cache[key] = sympy.lambdify(
                (X, Y, RE, RO), self.forcing_expr(include_advection, include_beta), modules="numpy"
            )
        return self._forcing_cache[key]

    def forcing(self, params, include_advection=True, include_beta=True):
        return ForcingEvaluator(self, params, include_advection, include_beta)

    def boundary_points(self, samples=100):
        """``samples`` points spread over the four sides, with their outward normals."""
        d = self.domain
        per_side = max(1, samples // 4)
        s = (np.arange(per_side) + 0.5) / per_side
        points = np.concatenate([
            np.column_stack([d.x0 + s * d.width, np.full(per_side, d.y0)]),
            np.column_stack([np.full(per_side, d.x1), d.y0 + s * d.height]),
            np.column_stack([d.x0 + s * d.width, np.full(per_side, d.y1)]),
            np.column_stack([np.full(per_side, d.x0), d.y0 + s * d.height]),
        ])
        normals = np.repeat([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], per_side, axis=0)
        return points, normals

    def boundary_defect(self, samples=100):
        """Largest |psi| or |d psi / dn| on the boundary, relative to max |psi| inside."""
        points, normals = self.boundary_points(samples)
        value = np.abs(self.derivative(0, 0, points))
        normal = np.abs(
            normals[:, 0] * self.derivative(1, 0, points) + normals[:, 1] * self.derivative(0, 1, points)
        )
        d = self.domain
        gx, gy = np.meshgrid(np.linspace(d.x0, d.x1, 41), np.linspace(d.y0, d.y1, 41))
        scale = np.max(np.abs(self.derivative(0, 0, np.column_stack([gx.ravel(), gy.ravel()]))))
        return float(max(value.max(), normal.max()) / max(scale, np.finfo(float).tiny))


PROBLEMS = {}


def register_problem(solution):
    PROBLEMS[solution.identifier] = solution
    return solution


def get_problem(identifier):
    try:
        return PROBLEMS[identifier]
    except KeyError:
        raise InvalidArgument(
            f"Unknown problem {identifier!r}; registered: {', '.join(sorted(PROBLEMS))}"
        ) from None


register_problem(
    ManufacturedSolution(
        identifier="sine-squared",
        field=SymbolicField((sympy.sin(4 * sympy.pi * X) * sympy.sin(4 * sympy.pi * Y)) ** 2),
        domain=UNIT_SQUARE,
        reynolds=1.0,
        rossby=1.0,
        description="(sin 4 pi x sin 4 pi y)^2 on the unit square",
    )
)

register_problem(
    ManufacturedSolution(
        identifier="boundary-layer",
        field=SymbolicField(((1 - X / 3) * (1 - sympy.exp(-20 * X)) * sympy.sin(sympy.pi * Y)) ** 2),
        domain=Rectangle(0.0, 0.0, 3.0, 1.0),
        reynolds=5.0,
        rossby=1e-4,
        description="western boundary layer ((1 - x/3)(1 - exp(-20x)) sin pi y)^2 on [0,3]x[0,1]",
    )
)


def manufactured_forcing(sol, params, p, include_advection=True, include_beta=True):
    """F at a single point ``p`` (Point2 or pair)."""
    if hasattr(p, "as_array"):
        p = p.as_array()
    return float(sol.forcing(params, include_advection, include_beta)(np.asarray(p, dtype=float)[None, :])[0])


class ErrorNorms(NamedTuple):
    e_L2: float
    e_H1: float
    e_H2: float


def error_norms(numeric, exact):
    """
    L2 norm, gradient seminorm and full Hessian seminorm of ``numeric - exact``,
    by quadrature at the discretization's degree.
    """
    disc = numeric.discretization

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("values", "gradients", "hessians"))
        field = numeric.on_chunk(tab, chunk)
        points = tab["points"].reshape(-1, 2)
        shape = tab["weights"].shape

        def exact_at(a, b):
            return exact.derivative(a, b, points).reshape(shape)

        e0 = field["value"] - exact_at(0, 0)
        ex = field["gradient"][..., 0] - exact_at(1, 0)
        ey = field["gradient"][..., 1] - exact_at(0, 1)
        exx = field["hessian"][..., 0] - exact_at(2, 0)
        exy = field["hessian"][..., 1] - exact_at(1, 1)
        eyy = field["hessian"][..., 2] - exact_at(0, 2)
        w = tab["weights"]
        return np.array([
            np.sum(w * e0**2),
            np.sum(w * (ex**2 + ey**2)),
            np.sum(w * (exx**2 + 2.0 * exy**2 + eyy**2)),
        ])

    totals = np.sum(disc.map_chunks(kernel), axis=0)
    return ErrorNorms(*(math.sqrt(max(float(value), 0.0)) for value in totals))


def interpolation_errors(exact, disc):
    return error_norms(interpolate(exact, disc), exact)


def observed_order(e_prev, e_curr, h_prev, h_curr):
    """log(e_prev / e_curr) / log(h_prev / h_curr); None when an error is not positive."""
    if not (h_prev > 0 and h_curr > 0):
        raise InvalidArgument(f"Mesh sizes must be positive, got {h_prev!r} and {h_curr!r}")
    if h_prev <= h_curr:
        raise InvalidArgument(f"Mesh sizes must decrease, got {h_prev!r} then {h_curr!r}")
    if e_prev is None or e_curr is None or not (e_prev > 0 and e_curr > 0):
        return None
    return math.log(e_prev / e_curr) / math.log(h_prev / h_curr)


CSV_COLUMNS = (
    "H", "h", "dofs_H", "dofs_h",
    "e_L2", "order_L2", "e_H1", "order_H1", "e_H2", "order_H2",
    "time_s",
)
NORMS = ("L2", "H1", "H2")


@dataclass(frozen=True)
class ConvergenceRecord:
    h: float
    dofs_h: int
    e_L2: Optional[float]
    e_H1: Optional[float]
    e_H2: Optional[float]
    time_s: float
    H: Optional[float] = None
    dofs_H: Optional[int] = None
    order_L2: Optional[float] = None
    order_H1: Optional[float] = None
    order_H2: Optional[float] = None
    method: str = "one-level"
    converged: bool = True
    iterations: int = 0
    stop_rule: Optional[str] = None

    def __post_init__(self):
        for norm in NORMS:
            value = getattr(self, f"e_{norm}")
            if value is not None and value < 0:
                raise InvalidArgument(f"e_{norm} must be non-negative, got {value!r}")

    def as_row(self):
        return {column: getattr(self, column) for column in CSV_COLUMNS}

    def solve_info(self):
        return {
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "stop_rule": self.stop_rule,
        }

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def with_orders(records, size="h"):
    """
    Copy of ``records`` with order columns filled in against the previous row of
    the same method, using the ``size`` column ("h" or "H") as the mesh size.
    """
    if size not in ("h", "H"):
        raise InvalidArgument(f"size must be 'h' or 'H', got {size!r}")
    previous = {}
    out = []
    for record in records:
        orders = {f"order_{norm}": None for norm in NORMS}
        prior = previous.get(record.method)
        current_size = getattr(record, size)
        if prior is not None and current_size is not None and getattr(prior, size) is not None:
            for norm in NORMS:
                orders[f"order_{norm}"] = observed_order(
                    getattr(prior, f"e_{norm}"), getattr(record, f"e_{norm}"),
                    getattr(prior, size), current_size,
                )
        out.append(replace(record, **orders))
        previous[record.method] = record
    return out
