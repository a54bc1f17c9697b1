"""Physical data of the baking problem and validation of the standing assumptions.

Temperatures are shifted so that the evaporation point sits at ``u = 0``; the
absolute temperature is ``u + theta_c``.  The oven temperature ``u_b`` is an
absolute temperature, as in the boundary conditions at ``x = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, MalformedInputError

SORPTION_SHIFTED = "shifted"  # p(u(t,1) + theta_c), used by the floor/comparison arguments
SORPTION_LITERAL = "literal"  # p(u(t,1)), as written in the moisture boundary condition


@dataclass(frozen=True)
class PhysicalParams:
    """Material and boundary constants.

    ``h`` and ``sigma`` may be zero (pure radiative or pure convective limits);
    every other constant must be strictly positive.
    """

    c_l: float = 1.0
    c_a: float = 1.0
    k_l: float = 1.0
    k_a: float = 1.0
    d_l: float = 1.0
    d_a: float = 1.0
    h: float = 1.0
    sigma: float = 0.0
    b1: float = 1.0
    b2: float = 1.0
    latent: float = 1.0
    theta_c: float = 1.0

    def __post_init__(self):
        for name in ("c_l", "c_a", "k_l", "k_a", "d_l", "d_a", "b1", "b2", "latent"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise MalformedInputError(f"parameter {name} must be positive and finite, got {value!r}")
        # theta_c is a temperature offset; zero is a legitimate choice
        for name in ("h", "sigma", "theta_c"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise MalformedInputError(f"parameter {name} must be nonnegative and finite, got {value!r}")
        if self.h == 0 and self.sigma == 0:
            raise MalformedInputError("at least one of h, sigma must be positive")

    @property
    def sorption_ordered(self) -> bool:
        """True when ``b1 <= b2`` (needed for the moisture floor, not for existence)."""
        return self.b1 <= self.b2

    def replace(self, **changes) -> "PhysicalParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class SorptionFunction:
    """Piecewise-linear sorption curve ``p`` with constant extension.

    With ``smoothing_halfwidth > 0`` every breakpoint (including the two where
    the curve meets its constant extensions) is rounded by a quadratic blend of
    the adjacent slopes, which makes ``p`` continuously differentiable while
    keeping values and slopes inside the original bounds.
    """

    args: tuple
    values: tuple
    cap: float = 1.0
    smoothing_halfwidth: float = 0.0

    def __post_init__(self):
        args = np.asarray(self.args, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if args.ndim != 1 or args.size == 0 or args.shape != values.shape:
            raise MalformedInputError("sorption breakpoints must be a nonempty list of (argument, value) pairs")
        if not (np.all(np.isfinite(args)) and np.all(np.isfinite(values))):
            raise MalformedInputError("sorption breakpoints must be finite")
        if args.size > 1 and np.any(np.diff(args) <= 0):
            raise MalformedInputError("sorption breakpoint arguments must be strictly increasing")
        if not self.cap > 0:
            raise MalformedInputError("sorption cap M_p must be positive")
        if self.smoothing_halfwidth < 0:
            raise MalformedInputError("smoothing half-width must be nonnegative")
        if args.size > 1 and self.smoothing_halfwidth > 0.5 * np.min(np.diff(args)):
            raise MalformedInputError("smoothing half-width exceeds half the smallest breakpoint gap")
        object.__setattr__(self, "args", tuple(args.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))

    @classmethod
    def constant(cls, value: float, cap: float | None = None) -> "SorptionFunction":
        return cls((0.0,), (float(value),), cap=cap if cap is not None else max(float(value), 1.0))

    @classmethod
    def from_pairs(cls, pairs, cap: float, smoothing_halfwidth: float = 0.0) -> "SorptionFunction":
        pairs = list(pairs)
        return cls(
            tuple(float(a) for a, _ in pairs),
            tuple(float(v) for _, v in pairs),
            cap=float(cap),
            smoothing_halfwidth=float(smoothing_halfwidth),
        )

    def slopes(self) -> np.ndarray:
        """Slopes of the pieces between consecutive breakpoints."""
        args = np.asarray(self.args)
        values = np.asarray(self.values)
        if args.size < 2:
            return np.zeros(0)
        return np.diff(values) / np.diff(args)

    def __call__(self, r):
        args = np.asarray(self.args)
        values = np.asarray(self.values)
        r = np.asarray(r, dtype=float)
        out = np.interp(r, args, values)
        s = self.smoothing_halfwidth
        if s > 0 and args.size > 1:
            full = np.concatenate(([0.0], self.slopes(), [0.0]))
            for k, xk in enumerate(args):
                jump = full[k + 1] - full[k]
                if jump == 0.0:
                    continue
                z = r - (xk - s)
                inside = (z > 0) & (z < 2 * s)
                # blend the two slopes: p_left + jump * z^2 / (4 s) on the window
                corr = np.where(inside, jump * z * z / (4 * s) - np.where(r > xk, jump * (r - xk), 0.0), 0.0)
                out = out + corr
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class OvenSchedule:
    """Oven temperature ``u_b(t)``, piecewise linear in time, clamped outside the samples."""

    times: tuple
    temps: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        temps = np.asarray(self.temps, dtype=float)
        if times.ndim != 1 or times.size == 0 or times.shape != temps.shape:
            raise MalformedInputError("oven schedule needs a nonempty list of (time, temperature) samples")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(temps))):
            raise MalformedInputError("oven samples must be finite")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise MalformedInputError("oven sample times must be strictly increasing")
        object.__setattr__(self, "times", tuple(times.tolist()))
        object.__setattr__(self, "temps", tuple(temps.tolist()))

    @classmethod
    def constant_at(cls, temp: float) -> "OvenSchedule":
        return cls((0.0,), (float(temp),))

    @property
    def constant(self) -> bool:
        return len(set(self.temps)) == 1

    def __call__(self, t):
        out = np.interp(t, self.times, self.temps)
        return float(out) if np.ndim(out) == 0 else out


def _uniform_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial front and fields sampled on a uniform grid of ``[0, 1]``."""

    e0: float
    u0: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        w0 = np.asarray(self.w0, dtype=float)
        if u0.ndim != 1 or u0.size < 3:
            raise MalformedInputError("u0 must be sampled on at least 3 grid points")
        if w0.shape != u0.shape:
            raise MalformedInputError("u0 and w0 must share the same grid")
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(w0))):
            raise MalformedInputError("initial fields must be finite")
        if not np.isfinite(self.e0):
            raise MalformedInputError("e0 must be finite")
        u0.setflags(write=False)
        w0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "e0", float(self.e0))

    @classmethod
    def from_functions(cls, e0: float, u_fn: Callable, w_fn: Callable, n: int = 2001) -> "InitialData":
        x = _uniform_grid(n)
        return cls(e0, np.asarray(u_fn(x), dtype=float), np.asarray(w_fn(x), dtype=float))

    @property
    def x(self) -> np.ndarray:
        return _uniform_grid(self.u0.size)

    @property
    def dx(self) -> float:
        return 1.0 / (self.u0.size - 1)

    def temperature_at(self, x, phase: str) -> np.ndarray:
        """Interpolate ``u0`` within one phase, pinning ``u0(e0) = 0``.

        Interpolating across the front would mix crumb and crust samples and
        break the sign pattern, so each phase only sees its own samples.
        """
        xs = self.x
        if phase == "crumb":
            keep = xs < self.e0
            px = np.concatenate((xs[keep], [self.e0]))
            pv = np.concatenate((self.u0[keep], [0.0]))
        elif phase == "crust":
            keep = xs > self.e0
            px = np.concatenate(([self.e0], xs[keep]))
            pv = np.concatenate(([0.0], self.u0[keep]))
        else:
            raise ValueError(f"unknown phase {phase!r}")
        return np.interp(x, px, pv)

    def moisture_at(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.w0)


@dataclass(frozen=True)
class ProblemSetup:
    """Complete data of one baking problem."""

    params: PhysicalParams
    sorption: SorptionFunction
    oven: OvenSchedule
    init: InitialData
    horizon: float
    sorption_convention: str = SORPTION_SHIFTED
    radiation_guard: bool = False
    compat_tol: float = 1e-6
    delta_1: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise MalformedInputError("horizon T must be positive")
        if self.sorption_convention not in (SORPTION_SHIFTED, SORPTION_LITERAL):
            raise MalformedInputError(f"unknown sorption convention {self.sorption_convention!r}")

    @property
    def front_moisture_threshold(self) -> float:
        """Safeguard ``delta_1`` for the Stefan velocity denominator."""
        if self.delta_1 is not None:
            return float(self.delta_1)
        wmin = float(np.min(self.init.w0))
        if wmin > 0:
            return 1e-3 * wmin
        return 1e-3 * float(self.init.moisture_at(self.init.e0))

    def replace(self, **changes) -> "ProblemSetup":
        from dataclasses import replace

        return replace(self, **changes)


def boundary_heat_flux(t, r, oven: OvenSchedule, params: PhysicalParams, guard: bool = False):
    """Outward heat flux ``g(t, r) = -k_a u_x(t, 1)`` for boundary temperature ``r``."""
    ub = oven(t)
    rabs = np.asarray(r, dtype=float) + params.theta_c
    if guard:
        rabs4 = np.maximum(rabs, 0.0) ** 4
    else:
        rabs4 = rabs**4
    return params.h * (rabs - ub) + params.sigma * (rabs4 - ub**4)


def boundary_heat_flux_derivative(t, r, oven: OvenSchedule, params: PhysicalParams, guard: bool = False):
    rabs = np.asarray(r, dtype=float) + params.theta_c
    if guard:
        rabs = np.maximum(rabs, 0.0)
    return params.h + 4.0 * params.sigma * rabs**3


def sorption_argument(r, theta_c: float, convention: str = SORPTION_SHIFTED):
    return r + theta_c if convention == SORPTION_SHIFTED else r


def boundary_moisture_flux(t, r, setup: ProblemSetup, convention: str | None = None):
    """Outward moisture flux ``-d_a w_x(t, 1) = b1 p(arg) - b2 p(u_b(t))``.

    ``arg`` is ``r + theta_c`` under the default (shifted) convention and ``r``
    under the literal one.
    """
    convention = convention or setup.sorption_convention
    p = setup.sorption
    arg = sorption_argument(r, setup.params.theta_c, convention)
    return setup.params.b1 * p(arg) - setup.params.b2 * p(setup.oven(t))


# ---------------------------------------------------------------------------
# validation


# standing assumptions checked before a run, by short name
ASSUMPTIONS = {
    "A1": "sorption p and its slope lie in [0, M_p]",
    "A2": "u0 <= 0 on the crumb, u0 >= 0 on the crust, u0(e0) = 0, 0 < e0 < 1",
    "A3": "w0(e0) > 0",
    "A4": "u_b(t) >= theta_c",
    "A5": "u0 compatible with the boundary conditions at x = 0 and x = 1",
}


@dataclass(frozen=True)
class AssumptionCheck:
    name: str  # key of ASSUMPTIONS
    passed: bool
    message: str = ""
    location: object = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    notes: tuple = field(default_factory=tuple)

    @property
    def runnable(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" ({c.message})" if c.message else ""
            lines.append(f"{c.name}: {status}{extra}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _check_sorption(p: SorptionFunction, tol: float) -> AssumptionCheck:
    values = np.asarray(p.values)
    bad = np.flatnonzero((values < -tol) | (values > p.cap + tol))
    if bad.size:
        k = int(bad[0])
        return AssumptionCheck("A1", False, f"p={values[k]:g} outside [0, M_p] at breakpoint {k}", ("breakpoint", k))
    slopes = p.slopes()
    bad = np.flatnonzero((slopes < -tol) | (slopes > p.cap + tol))
    if bad.size:
        k = int(bad[0])
        return AssumptionCheck("A1", False, f"slope {slopes[k]:g} outside [0, M_p] on piece {k}", ("piece", k))
    return AssumptionCheck("A1", True)


def _one_sided_derivative(v: np.ndarray, dx: float, end: str) -> float:
    if end == "left":
        return float((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx))
    return float((3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dx))


def validate_setup(setup: ProblemSetup, tol: float | None = None) -> ValidationReport:
    """Check every entry of :data:`ASSUMPTIONS` on the sampled data.

    ``tol`` is relative: sign conditions are tested against ``tol * scale``
    with ``scale`` the largest magnitude of the field involved, and the
    compatibility residuals against ``tol * max(1, flux scale)``.
    """
    tol = setup.compat_tol if tol is None else tol
    if not tol > 0:
        raise MalformedInputError("validation tolerance must be positive")
    init, params, oven = setup.init, setup.params, setup.oven
    x, u0, w0, dx = init.x, init.u0, init.w0, init.dx
    checks = []

    checks.append(_check_sorption(setup.sorption, tol))

    # signs of u0 and the front position
    uscale = max(1.0, float(np.max(np.abs(u0))))
    if not 0.0 < init.e0 < 1.0:
        checks.append(AssumptionCheck("A2", False, f"e0={init.e0:g} not in (0,1)", ("e0", init.e0)))
    else:
        crumb = np.flatnonzero((x < init.e0) & (u0 > tol * uscale))
        crust = np.flatnonzero((x > init.e0) & (u0 < -tol * uscale))
        # plain interpolation at e0 may only deviate by one cell's worth of slope
        slope = float(np.max(np.abs(np.diff(u0)))) if u0.size > 1 else 0.0
        at_front = float(np.interp(init.e0, x, u0))
        if crumb.size:
            i = int(crumb[0])
            checks.append(AssumptionCheck("A2", False, f"u0={u0[i]:g} > 0 on crumb at index {i}", ("index", i)))
        elif crust.size:
            i = int(crust[0])
            checks.append(AssumptionCheck("A2", False, f"u0={u0[i]:g} < 0 on crust at index {i}", ("index", i)))
        elif abs(at_front) > slope + tol * uscale:
            checks.append(AssumptionCheck("A2", False, f"u0(e0)={at_front:g} is not zero", ("e0", init.e0)))
        else:
            checks.append(AssumptionCheck("A2", True))

    # moisture at the front
    w_front = float(init.moisture_at(init.e0))
    if w_front > 0:
        checks.append(AssumptionCheck("A3", True))
    else:
        i = int(np.argmin(np.abs(x - init.e0)))
        checks.append(AssumptionCheck("A3", False, f"w0(e0)={w_front:g} is not positive", ("index", i)))

    # oven above the transition temperature
    temps = np.asarray(oven.temps)
    bad = np.flatnonzero(temps < params.theta_c - tol * max(1.0, params.theta_c))
    if bad.size:
        k = int(bad[0])
        checks.append(AssumptionCheck("A4", False, f"u_b={temps[k]:g} < theta_c at sample {k}", ("sample", k)))
    else:
        checks.append(AssumptionCheck("A4", True))

    # compatibility at both ends
    left = _one_sided_derivative(u0, dx, "left")
    right = _one_sided_derivative(u0, dx, "right")
    gflux = float(boundary_heat_flux(0.0, u0[-1], oven, params, guard=setup.radiation_guard))
    grad_scale = max(1.0, float(np.max(np.abs(np.diff(u0)))) / dx)
    res_left = abs(left)
    res_right = abs(-params.k_a * right - gflux)
    right_scale = max(1.0, abs(gflux), params.k_a * abs(right))
    if res_left > tol * grad_scale:
        checks.append(AssumptionCheck("A5", False, f"u0x(0) residual {res_left:.3e}", ("x", 0.0, res_left)))
    elif res_right > tol * right_scale:
        checks.append(AssumptionCheck("A5", False, f"x=1 compatibility residual {res_right:.3e}", ("x", 1.0, res_right)))
    else:
        checks.append(AssumptionCheck("A5", True))

    notes = []
    if not params.sorption_ordered:
        notes.append("b1 > b2: the moisture floor bound does not apply")
    return ValidationReport(tuple(checks), tuple(notes))


@dataclass(frozen=True)
class LongTimeHypotheses:
    """Which of the long-time (trichotomy) hypotheses a setup satisfies."""

    b1_le_b2: bool
    oven_constant: bool
    oven_dominates: bool  # u_b >= u0 + theta_c everywhere
    w0_positive: bool

    @property
    def comparison(self) -> bool:
        return self.oven_constant and self.oven_dominates

    @property
    def moisture_floor(self) -> bool:
        return self.comparison and self.b1_le_b2 and self.w0_positive

    @property
    def all(self) -> bool:
        return self.moisture_floor

    def as_dict(self) -> dict:
        return {
            "b1_le_b2": self.b1_le_b2,
            "oven_constant": self.oven_constant,
            "oven_dominates": self.oven_dominates,
            "w0_positive": self.w0_positive,
        }


def long_time_hypotheses(setup: ProblemSetup, tol: float = 1e-12) -> LongTimeHypotheses:
    ub = float(np.min(setup.oven.temps))
    return LongTimeHypotheses(
        b1_le_b2=setup.params.sorption_ordered,
        oven_constant=setup.oven.constant,
        oven_dominates=bool(np.all(setup.init.u0 + setup.params.theta_c <= ub + tol)),
        w0_positive=bool(np.all(setup.init.w0 > 0)),
    )


def compatible_profile(params: PhysicalParams, ub0: float, e0: float, crumb_amplitude: float, crust_fraction: float):
    """Piecewise-quadratic ``u0`` obeying the sign and compatibility conditions.

    Crumb: ``-A (1 - (x/e0)^2)``.  Crust: ``a xi + b xi^2`` with
    ``xi = (x - e0)/(1 - e0)``, ``u0(1) = f (u_b - theta_c)`` and the end slope
    fixed by the boundary flux.  Raises when the crust profile would change
    sign (``f`` too small for the given heat transfer).
    """
    u1 = crust_fraction * (ub0 - params.theta_c)
    g = float(boundary_heat_flux(0.0, u1, OvenSchedule.constant_at(ub0), params))
    end = -g / params.k_a * (1.0 - e0)  # u0'(1) in xi units
    if not (0.0 <= end <= 2.0 * u1 + 1e-15) and u1 > 0:
        raise DomainError(
            f"crust_fraction={crust_fraction:g} gives a sign-changing crust profile; increase it toward 1"
        )
    qb = end - u1
    qa = 2.0 * u1 - end

    def u0(x):
        xi = (x - e0) / (1.0 - e0)
        return np.where(x < e0, -crumb_amplitude * (1.0 - (x / e0) ** 2), qa * xi + qb * xi * xi)

    return u0
