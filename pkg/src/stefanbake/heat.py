"""Implicit temperature step on the front-fixed grid.

Each phase is discretised in conservative moving-mesh form

    d/dt (c J ubar) = d/dy (k/J ubar_y + c xdot ubar)

with vertex-centred finite volumes and backward Euler in time.  Mesh-velocity
fluxes are central where the cell Peclet number is at most 2 and upwinded
elsewhere.  Using the discrete front velocity
``(e_new - e_old)/dt`` as mesh velocity makes the scheme preserve constants
exactly, and the resulting matrices are M-matrices, so sign and comparison
bounds carry over to the discrete solution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import StepFailure
from .landau import CRUMB, CRUST, MESH_LINE, FieldOnGrid, LandauGrid
from .problem import OvenSchedule, PhysicalParams, boundary_heat_flux, boundary_heat_flux_derivative


@dataclass
class HeatStepInput:
    u: FieldOnGrid
    e: float
    e_prime: float
    t_new: float
    dt: float
    params: PhysicalParams
    oven: OvenSchedule
    source: Optional[Callable] = None  # s(t, x, phase) added to c u_t = k u_xx + s
    boundary_source: Optional[Callable] = None  # extra(t): -k_a u_x(1) = g(t, u(1)) + extra(t)
    guard: bool = False
    newton_tol: float = 1e-12
    max_iter: int = 50
    boundary_guess: Optional[float] = None

    @property
    def e_old(self) -> float:
        return self.e - self.dt * self.e_prime


@dataclass
class HeatStepOutput:
    """``grad_left``/``grad_right`` are the physical front gradients recovered
    from the discrete flux balance of the two half cells at the front, so the
    discrete enthalpy identity closes exactly."""

    u: FieldOnGrid
    boundary_value: float
    grad_left: float
    grad_right: float
    newton_iterations: int


def _phase_rows(grid, phase, inp, u_old, e_old):
    p = inp.params
    if phase == CRUMB:
        n, dy, y0, J, Jo, cap, cond = grid.n_l, grid.dy_l, 0.0, inp.e, e_old, p.c_l, p.k_l
    else:
        n, dy, y0, J, Jo, cap, cond = grid.n_a, grid.dy_a, 1.0, 1.0 - inp.e, 1.0 - e_old, p.c_a, p.k_a
    a, b = MESH_LINE[phase]
    rows = kernels.assemble_phase(n, dy, y0, J, Jo, cap, cond, inp.dt, inp.e_prime, a, b, u_old, True, True)
    if inp.source is not None:
        y = y0 + dy * np.arange(n)
        x = inp.e * y if phase == CRUMB else inp.e + (y - 1.0) * (1.0 - inp.e)
        vol = np.full(n, dy)
        vol[0] *= 0.5
        vol[-1] *= 0.5
        rows[3][:] += J * vol * inp.source(inp.t_new, x, phase)
    return rows


def _solve_robin(lower, diag, upper, rhs, inp: HeatStepInput, guess: float):
    """Solve the crust rows with a nonlinear flux row at the last node.

    The interior is linear, so ``v = x1 - r x2`` with ``r`` the boundary value;
    Newton then acts on the single boundary row.
    """
    ni = diag.size - 1  # interior unknowns
    x1 = kernels.solve_tridiagonal(lower[:ni], diag[:ni], upper[:ni], rhs[:ni])
    unit = np.zeros(ni)
    unit[-1] = upper[ni - 1]
    x2 = kernels.solve_tridiagonal(lower[:ni], diag[:ni], upper[:ni], unit)
    lo, dd, rr = lower[ni], diag[ni], rhs[ni]
    extra = inp.boundary_source(inp.t_new) if inp.boundary_source is not None else 0.0
    t = inp.t_new
    r = guess
    res = np.inf
    for it in range(1, inp.max_iter + 1):
        g = float(boundary_heat_flux(t, r, inp.oven, inp.params, inp.guard))
        res = lo * (x1[-1] - r * x2[-1]) + dd * r + g + extra - rr
        dres = -lo * x2[-1] + dd + float(boundary_heat_flux_derivative(t, r, inp.oven, inp.params, inp.guard))
        step = res / dres
        r -= step
        scale = max(1.0, abs(rr), abs(dd * r), abs(g))
        if not np.isfinite(r):
            break
        if abs(step) <= 1e-15 * (1.0 + abs(r)) or abs(res) <= inp.newton_tol * scale:
            g = float(boundary_heat_flux(t, r, inp.oven, inp.params, inp.guard))
            res = lo * (x1[-1] - r * x2[-1]) + dd * r + g + extra - rr
            if abs(res) <= inp.newton_tol * max(1.0, abs(rr), abs(dd * r), abs(g)):
                v = x1 - r * x2
                return np.concatenate((v, [r])), it
    raise StepFailure(f"boundary Newton did not converge in {inp.max_iter} iterations", residual=float(res))


def heat_step(inp: HeatStepInput) -> HeatStepOutput:
    """One backward-Euler temperature step with the front at ``inp.e``."""
    if not inp.dt > 0:
        raise ValueError("dt must be positive")
    field = inp.u
    grid: LandauGrid = field.grid
    u_old = field.values
    s = grid.shared
    e_old = inp.e_old
    if not 0.0 < e_old < 1.0:
        raise StepFailure(f"implied previous front {e_old:g} outside (0, 1)")

    p = inp.params
    out = np.empty(grid.n_nodes)
    lower, diag, upper, rhs = _phase_rows(grid, CRUMB, inp, u_old[: s + 1], e_old)
    out[:s] = kernels.solve_tridiagonal(lower[:s], diag[:s], upper[:s], rhs[:s])
    out[s] = 0.0
    # the dropped Dirichlet row's residual is the flux leaving through the front
    left = (lower[s] * out[s - 1] + diag[s] * out[s] - rhs[s]) / p.k_l

    lower, diag, upper, rhs = _phase_rows(grid, CRUST, inp, u_old[s:], e_old)
    guess = u_old[-1] if inp.boundary_guess is None else inp.boundary_guess
    crust, iters = _solve_robin(lower[1:], diag[1:], upper[1:], rhs[1:], inp, guess)
    out[s + 1 :] = crust
    right = -(diag[0] * out[s] + upper[0] * out[s + 1] - rhs[0]) / p.k_a

    return HeatStepOutput(FieldOnGrid(grid, out), float(out[-1]), float(left), float(right), iters)


def enthalpy(u: np.ndarray, grid: LandauGrid, e: float, params: PhysicalParams) -> float:
    """Discrete ``c_l int_0^e u + c_a int_e^1 u`` (trapezoidal on the moving grid)."""
    vl, va = grid.reference_volumes()
    s = grid.shared
    return float(params.c_l * e * (vl @ u[: s + 1]) + params.c_a * (1.0 - e) * (va @ u[s:]))


@dataclass(frozen=True)
class SignCertificate:
    passed: bool
    worst: float  # largest violation (0 when none)
    index: int  # node of the worst violation, -1 when none


def certify_sign(u, e: float | None = None, tol: float = 0.0, grid: LandauGrid | None = None) -> SignCertificate:
    """Crumb nodes must satisfy ``u <= tol`` and crust nodes ``u >= -tol``."""
    if isinstance(u, FieldOnGrid):
        grid, v = u.grid, u.values
    else:
        v = np.asarray(u, dtype=float)
    s = grid.shared
    viol = np.zeros_like(v)
    viol[:s] = v[:s]
    viol[s + 1 :] = -v[s + 1 :]
    viol[s] = abs(v[s])
    k = int(np.argmax(viol))
    worst = max(float(viol[k]), 0.0)
    passed = worst <= tol
    return SignCertificate(passed, worst, k if worst > 0 else -1)


def comparison_excess(u: np.ndarray, params: PhysicalParams, ub: float) -> float:
    """``max(u + theta_c - u_b)``; nonpositive when the comparison bound holds."""
    return float(np.max(u) + params.theta_c - ub)
