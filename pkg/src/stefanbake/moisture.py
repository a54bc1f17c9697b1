"""Implicit moisture step.

Same conservative moving-mesh finite volumes as the temperature step, but the
front node is a single unknown whose control volume is the union of the two
adjacent half cells.  Flux continuity across the front then holds in the
finite-volume sense and total water is conserved exactly up to the boundary
flux at ``x = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .landau import CRUMB, CRUST, MESH_LINE, FieldOnGrid, LandauGrid
from .problem import ProblemSetup, boundary_moisture_flux


@dataclass
class MoistureStepInput:
    w: FieldOnGrid
    e: float
    e_prime: float
    boundary_temperature: float
    t_new: float
    dt: float
    setup: ProblemSetup
    source: Optional[Callable] = None  # s(t, x, phase) added to w_t = d w_xx + s
    flux_override: Optional[Callable] = None  # q(t) replacing b1 p(.) - b2 p(u_b)

    @property
    def e_old(self) -> float:
        return self.e - self.dt * self.e_prime


@dataclass
class MoistureStepOutput:
    w: FieldOnGrid
    front_value: float
    minimum: float
    boundary_flux: float


def moisture_step(inp: MoistureStepInput) -> MoistureStepOutput:
    field = inp.w
    grid: LandauGrid = field.grid
    p = inp.setup.params
    s = grid.shared
    e, e_old = inp.e, inp.e_old
    w_old = field.values

    a, b = MESH_LINE[CRUMB]
    lo_l, d_l, up_l, r_l = kernels.assemble_phase(
        grid.n_l, grid.dy_l, 0.0, e, e_old, 1.0, p.d_l, inp.dt, inp.e_prime, a, b, w_old[: s + 1], True, True
    )
    a, b = MESH_LINE[CRUST]
    lo_a, d_a, up_a, r_a = kernels.assemble_phase(
        grid.n_a, grid.dy_a, 1.0, 1.0 - e, 1.0 - e_old, 1.0, p.d_a, inp.dt, inp.e_prime, a, b, w_old[s:], True, True
    )
    if inp.source is not None:
        # the source may jump at the front, so each half cell uses its own phase
        x = grid.x(e)
        vl, va = grid.reference_volumes()
        r_l = r_l + e * vl * inp.source(inp.t_new, x[: s + 1], CRUMB)
        r_a = r_a + (1.0 - e) * va * inp.source(inp.t_new, x[s:], CRUST)

    lower = np.concatenate((lo_l, lo_a[1:]))
    upper = np.concatenate((up_l[:-1], up_a))
    diag = np.concatenate((d_l[:-1], [d_l[-1] + d_a[0]], d_a[1:]))
    rhs = np.concatenate((r_l[:-1], [r_l[-1] + r_a[0]], r_a[1:]))

    if inp.flux_override is not None:
        q = float(inp.flux_override(inp.t_new))
    else:
        q = float(boundary_moisture_flux(inp.t_new, inp.boundary_temperature, inp.setup))
    rhs[-1] -= q

    w_new = kernels.solve_tridiagonal(lower, diag, upper, rhs)
    new = FieldOnGrid(grid, w_new)
    return MoistureStepOutput(new, float(w_new[s]), float(np.min(w_new)), q)


def total_mass(w: np.ndarray, grid: LandauGrid, e: float) -> float:
    """Discrete ``int_0^1 w dx`` consistent with the finite-volume cells."""
    return float(grid.physical_weights(e) @ w)


@dataclass(frozen=True)
class FloorCertificate:
    passed: bool
    minimum: float
    index: int


def certify_moisture_floor(w, floor: float, tol: float = 0.0) -> FloorCertificate:
    v = w.values if isinstance(w, FieldOnGrid) else np.asarray(w, dtype=float)
    k = int(np.argmin(v))
    return FloorCertificate(bool(v[k] >= floor - tol), float(v[k]), k)


@dataclass(frozen=True)
class FrontMoisture:
    value: float
    flagged: bool


def front_moisture(w, threshold: float = 0.0, grid: LandauGrid | None = None) -> FrontMoisture:
    """Moisture at the front node, flagged when below ``threshold`` (``delta_1``)."""
    if isinstance(w, FieldOnGrid):
        value = w.at_front
    else:
        value = float(np.asarray(w)[grid.shared])
    return FrontMoisture(value, value < threshold)
