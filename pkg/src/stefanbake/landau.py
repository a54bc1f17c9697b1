"""Front-fixing change of variables.

The crumb ``[0, e]`` is mapped onto ``y in [0, 1]`` by ``x = y e`` and the
crust ``[e, 1]`` onto ``y in [1, 2]`` by ``x = e + (y - 1)(1 - e)``.  The
front always sits at the shared node ``y = 1``.

Under the maps the heat equation in each phase becomes

    c ubar_t = k / J**2 ubar_yy + c * (xdot / J) * ubar_y

with Jacobian ``J = e`` (crumb) or ``1 - e`` (crust) and mesh velocity
``xdot = y e'`` (crumb) or ``(2 - y) e'`` (crust).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

CRUMB = "crumb"
CRUST = "crust"


def _check_front(e):
    if not np.all((np.asarray(e) > 0.0) & (np.asarray(e) < 1.0)):
        raise DomainError(f"front position must lie in (0, 1), got {e!r}")


@dataclass(frozen=True)
class LandauGrid:
    """Uniform reference grids on ``[0, 1]`` (crumb) and ``[1, 2]`` (crust)."""

    n_l: int
    n_a: int

    def __post_init__(self):
        if self.n_l < 3 or self.n_a < 3:
            raise DomainError("each phase needs at least 3 nodes for the one-sided front stencil")

    @property
    def dy_l(self) -> float:
        return 1.0 / (self.n_l - 1)

    @property
    def dy_a(self) -> float:
        return 1.0 / (self.n_a - 1)

    @property
    def n_nodes(self) -> int:
        return self.n_l + self.n_a - 1

    @property
    def shared(self) -> int:
        """Global index of the front node ``y = 1``."""
        return self.n_l - 1

    @property
    def dy_min(self) -> float:
        return min(self.dy_l, self.dy_a)

    @property
    def y(self) -> np.ndarray:
        return np.concatenate((np.linspace(0.0, 1.0, self.n_l), np.linspace(1.0, 2.0, self.n_a)[1:]))

    def x(self, e: float) -> np.ndarray:
        """Physical node positions for front position ``e``."""
        return from_reference(self.y, e)

    def reference_volumes(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node reference cell widths in the crumb and crust parts.

        The shared node appears in both arrays with its half cell on each side.
        """
        vl = np.full(self.n_l, self.dy_l)
        vl[0] *= 0.5
        vl[-1] *= 0.5
        va = np.full(self.n_a, self.dy_a)
        va[0] *= 0.5
        va[-1] *= 0.5
        return vl, va

    def physical_weights(self, e: float) -> np.ndarray:
        """Trapezoidal quadrature weights in ``x`` for the current front position."""
        vl, va = self.reference_volumes()
        wts = np.zeros(self.n_nodes)
        s = self.shared
        wts[: s + 1] += e * vl
        wts[s:] += (1.0 - e) * va
        return wts

    def refine(self, factor: int) -> "LandauGrid":
        return LandauGrid((self.n_l - 1) * factor + 1, (self.n_a - 1) * factor + 1)


@dataclass(frozen=True)
class FieldOnGrid:
    """Nodal values on a :class:`LandauGrid`; the shared node is stored once."""

    grid: LandauGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise DomainError(f"field has {v.shape} values, grid needs {self.grid.n_nodes}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def crumb(self) -> np.ndarray:
        return self.values[: self.grid.n_l]

    @property
    def crust(self) -> np.ndarray:
        return self.values[self.grid.shared :]

    @property
    def at_front(self) -> float:
        return float(self.values[self.grid.shared])

    def phase_of(self, index: int) -> str:
        s = self.grid.shared
        if index < s:
            return CRUMB
        if index > s:
            return CRUST
        return "shared"

    def integral(self, e: float) -> float:
        return float(self.grid.physical_weights(e) @ self.values)


def to_reference(x, e: float):
    """Physical position -> reference coordinate in ``[0, 2]``."""
    _check_front(e)
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("x must lie in [0, 1]")
    y = np.where(x <= e, x / e, 1.0 + (x - e) / (1.0 - e))
    return float(y) if y.ndim == 0 else y


def from_reference(y, e: float):
    """Reference coordinate -> physical position; exact inverse of :func:`to_reference`."""
    _check_front(e)
    y = np.asarray(y, dtype=float)
    if np.any((y < 0.0) | (y > 2.0)):
        raise DomainError("y must lie in [0, 2]")
    x = np.where(y <= 1.0, y * e, e + (y - 1.0) * (1.0 - e))
    return float(x) if x.ndim == 0 else x


def jacobian(phase: str, e: float) -> float:
    return e if phase == CRUMB else 1.0 - e


def mesh_velocity(phase: str, y, e_prime: float):
    """``dx/dt`` at fixed ``y``: ``y e'`` in the crumb, ``(2 - y) e'`` in the crust."""
    y = np.asarray(y, dtype=float)
    return e_prime * y if phase == CRUMB else e_prime * (2.0 - y)


# (a, b) with mesh velocity = e' * (a + b * y); used by the assembly kernels
MESH_LINE = {CRUMB: (0.0, 1.0), CRUST: (2.0, -1.0)}


def transformed_coefficients(phase: str, e: float, e_prime: float, params, y=1.0):
    """Diffusion and advection coefficients of ``ubar_t = D ubar_yy + A ubar_y``.

    Returns ``(k / (c J**2), xdot / J)`` for the requested phase, evaluated at
    reference coordinate ``y``.
    """
    _check_front(e)
    if phase == CRUMB:
        k, c = params.k_l, params.c_l
    elif phase == CRUST:
        k, c = params.k_a, params.c_a
    else:
        raise ValueError(f"unknown phase {phase!r}")
    J = jacobian(phase, e)
    adv = mesh_velocity(phase, y, e_prime) / J
    return k / (c * J * J), (float(adv) if np.ndim(adv) == 0 else adv)


def one_sided_gradients(field, e: float, grid: LandauGrid | None = None) -> tuple[float, float]:
    """Physical ``u_x(e-)`` and ``u_x(e+)`` from second-order one-sided stencils."""
    _check_front(e)
    if isinstance(field, FieldOnGrid):
        grid, v = field.grid, field.values
    else:
        if grid is None:
            raise ValueError("a LandauGrid is needed for raw arrays")
        v = np.asarray(field, dtype=float)
    if grid.n_l < 3 or grid.n_a < 3:
        raise DomainError("insufficient stencil")
    s = grid.shared
    left = (3.0 * v[s] - 4.0 * v[s - 1] + v[s - 2]) / (2.0 * grid.dy_l * e)
    right = (-3.0 * v[s] + 4.0 * v[s + 1] - v[s + 2]) / (2.0 * grid.dy_a * (1.0 - e))
    return float(left), float(right)


def sample_initial_fields(init, grid: LandauGrid) -> tuple[np.ndarray, np.ndarray]:
    """Map sampled initial data onto the reference nodes for front ``init.e0``."""
    e0 = init.e0
    _check_front(e0)
    x = grid.x(e0)
    s = grid.shared
    u = np.empty(grid.n_nodes)
    u[:s] = init.temperature_at(x[:s], CRUMB)
    u[s] = 0.0
    u[s + 1 :] = init.temperature_at(x[s + 1 :], CRUST)
    w = np.asarray(init.moisture_at(x), dtype=float)
    return u, w
