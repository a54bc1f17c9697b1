"""Oracles and certification.

* the one-phase Neumann similarity solution, reached from the bread model by
  freezing the moisture (``w == 1``) and keeping the crumb at the
  evaporation temperature;
* manufactured solutions for the temperature and moisture steps with a
  prescribed, moving front;
* a physical-grid reference solver for a frozen front;
* the run certificate, which re-checks the discrete analogues of the sign,
  comparison, moisture-floor and energy estimates on a finished run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, MalformedArtifactError
from .front import (
    CLASSIFICATIONS,
    SERIES_COLUMNS,
    CouplingConfig,
    RunResult,
    run,
)
from .heat import HeatStepInput, heat_step
from .landau import CRUMB, CRUST, FieldOnGrid, LandauGrid
from .moisture import MoistureStepInput, moisture_step
from .problem import (
    InitialData,
    OvenSchedule,
    PhysicalParams,
    ProblemSetup,
    SorptionFunction,
    boundary_heat_flux,
    compatible_profile,
)

SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Neumann similarity oracle


def erf(x: float) -> float:
    """Error function to about one ulp, without external numeric dependencies.

    For ``|x| < 1.5`` the positive-term series

        erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))

    is summed until a term drops below 1e-17 of the total; all terms are
    positive, so there is no cancellation.  For ``|x| >= 1.5`` the result is
    ``1 - erfc(x)`` with ``erfc`` from its continued fraction

        erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))

    evaluated bottom-up at a fixed depth of 120.  Beyond |x| = 6 the result is
    1 to double precision.
    """
    if x < 0:
        return -erf(-x)
    if x > 6.0:
        return 1.0
    x2 = x * x
    if x >= 1.5:
        f = x
        for k in range(120, 0, -1):
            f = x + 0.5 * k / f
        return 1.0 - math.exp(-x2) / (SQRT_PI * f)
    term = x
    total = x
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return 2.0 / SQRT_PI * math.exp(-x2) * total


def _neumann_residual(lam: float, ste: float) -> float:
    return lam * math.exp(lam * lam) * erf(lam) - ste / SQRT_PI


def neumann_lambda(ste: float) -> float:
    """Root of ``lambda exp(lambda^2) erf(lambda) = Ste / sqrt(pi)`` by bisection on [1e-8, 10]."""
    if not ste > 0:
        raise DomainError(f"Stefan number must be positive, got {ste!r}")
    lo, hi = 1e-8, 10.0
    target = ste / SQRT_PI
    if _neumann_residual(lo, ste) >= 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = _neumann_residual(mid, ste)
        if abs(f) <= 1e-12 * max(1.0, target) and hi - lo < 1e-15:
            return mid
        if f < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NeumannOracle:
    """Crust of width ``2 lambda sqrt(alpha (t + t_shift))`` growing from ``x = 1``."""

    stefan_number: float
    alpha: float
    lam: float
    t_shift: float

    def front(self, t):
        return 1.0 - 2.0 * self.lam * np.sqrt(self.alpha * (np.asarray(t) + self.t_shift))

    def time_at(self, e: float) -> float:
        return ((1.0 - e) / (2.0 * self.lam)) ** 2 / self.alpha - self.t_shift


def neumann_oracle_for(setup: ProblemSetup) -> NeumannOracle:
    meta = setup.meta
    if meta.get("oracle") != "neumann":
        raise DomainError("setup was not built by classical_stefan_config")
    ste = float(meta["stefan_number"])
    lam = neumann_lambda(ste)
    alpha = setup.params.k_a / setup.params.c_a
    t_shift = ((1.0 - setup.init.e0) / (2.0 * lam)) ** 2 / alpha
    return NeumannOracle(ste, alpha, lam, t_shift)


def classical_stefan_config(
    params: PhysicalParams | None = None,
    stefan_number: float = 1.0,
    crust_width: float = 0.1,
    e_end: float = 0.2,
    samples: int = 20001,
) -> ProblemSetup:
    """Setup whose front follows the one-phase Neumann law.

    Moisture is frozen at ``w == 1`` (``b1 = b2`` and constant ``p`` give zero
    boundary flux) and the crumb starts at ``u == 0``, so it stays there.  The
    crust starts as the similarity profile of width ``crust_width``; the run
    therefore tracks ``e(t) = 1 - 2 lambda sqrt(alpha (t + t0))`` with ``t0``
    the age of that profile.  The Dirichlet condition at ``x = 1`` is
    approximated by a stiff Robin condition (large ``h``, ``sigma = 0``); the
    oven temperature is lifted by the Robin offset so the initial data satisfy
    the compatibility condition exactly.

    The crust lies between the heated end and the front for the whole run, so
    the similarity law is exact on the finite domain: it stays valid until
    the front nears ``x = 0``.  ``e_end`` sets the horizon.
    """
    if params is None:
        params = PhysicalParams(c_l=1.0, c_a=1.0, k_l=10.0, k_a=1.0, d_l=1.0, d_a=1.0, h=1e4, sigma=0.0,
                                b1=1.0, b2=1.0, latent=1.0, theta_c=1.0)
    params = params.replace(b2=params.b1, sigma=0.0)
    lam = neumann_lambda(stefan_number)
    alpha = params.k_a / params.c_a
    t0 = (crust_width / (2.0 * lam)) ** 2 / alpha
    e0 = 1.0 - crust_width
    u_dirichlet = stefan_number * params.latent / params.c_a
    width = 2.0 * math.sqrt(alpha * t0)
    slope1 = u_dirichlet / (SQRT_PI * math.sqrt(alpha * t0) * erf(lam))
    ub = params.theta_c + u_dirichlet + params.k_a * slope1 / params.h

    erf_v = np.vectorize(erf)

    def u0(x):
        return np.where(x <= e0, 0.0, u_dirichlet * (1.0 - erf_v((1.0 - x) / width) / erf(lam)))

    init = InitialData.from_functions(e0, u0, lambda x: np.ones_like(x), n=samples)
    horizon = ((1.0 - e_end) / (2.0 * lam)) ** 2 / alpha - t0
    return ProblemSetup(
        params,
        SorptionFunction.constant(0.5),
        OvenSchedule.constant_at(ub),
        init,
        horizon=horizon,
        compat_tol=1e-4,
        meta={"oracle": "neumann", "stefan_number": float(stefan_number)},
    )


@dataclass
class OracleComparison:
    t: np.ndarray
    e: np.ndarray
    e_exact: np.ndarray
    rel_error: np.ndarray  # |e - e_exact| / e_exact
    rel_thickness_error: np.ndarray  # relative error of the crust thickness 1 - e
    tolerance: float

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_error)) if self.rel_error.size else 0.0

    @property
    def max_rel_thickness_error(self) -> float:
        return float(np.max(self.rel_thickness_error)) if self.rel_thickness_error.size else 0.0

    @property
    def passed(self) -> bool:
        return self.rel_error.size > 0 and self.max_rel_error <= self.tolerance and self.max_rel_thickness_error <= self.tolerance

    def table(self, rows: int = 11) -> list:
        idx = np.unique(np.linspace(0, self.t.size - 1, rows).astype(int)) if self.t.size else []
        return [
            {"t": float(self.t[i]), "e": float(self.e[i]), "e_exact": float(self.e_exact[i]),
             "rel_error": float(self.rel_error[i]), "rel_thickness_error": float(self.rel_thickness_error[i])}
            for i in idx
        ]


def compare_with_neumann(series, oracle: NeumannOracle, e_min: float = 0.2, tolerance: float = 0.01) -> OracleComparison:
    """Front trajectory vs the similarity law over the window ``e > e_min``."""
    t = np.asarray(series["t"])
    e = np.asarray(series["e"])
    exact = oracle.front(t)
    keep = exact > e_min
    t, e, exact = t[keep], e[keep], exact[keep]
    rel = np.abs(e - exact) / exact
    rel_thick = np.abs(e - exact) / (1.0 - exact)
    return OracleComparison(t, e, exact, rel, rel_thick, tolerance)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class PrescribedFront:
    """``e(t) = e0 + amplitude * sin(omega t)``."""

    e0: float = 0.5
    amplitude: float = 0.0
    omega: float = 1.0

    def __call__(self, t):
        return self.e0 + self.amplitude * np.sin(self.omega * t)

    def prime(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * t)


def _by_phase(x, e, phase, crumb, crust):
    if phase == CRUMB:
        return crumb
    if phase == CRUST:
        return crust
    return np.where(x <= e, crumb, crust)


@dataclass(frozen=True)
class HeatMMS:
    """Manufactured temperature with ``u(t, e(t)) = 0`` and ``u_x(t, 0) = 0``.

    crumb: ``-phi(t) (e^2 - x^2)``; crust: ``psi(t) (x - e)(2 - x)``, with
    ``phi = 1 + sin(2t)/2`` and ``psi = 1 + cos(3t)/2``.
    """

    params: PhysicalParams
    oven: OvenSchedule
    front: PrescribedFront

    @staticmethod
    def _phi(t):
        return 1.0 + 0.5 * np.sin(2 * t), np.cos(2 * t)

    @staticmethod
    def _psi(t):
        return 1.0 + 0.5 * np.cos(3 * t), -1.5 * np.sin(3 * t)

    def exact(self, t, x):
        e = self.front(t)
        phi, _ = self._phi(t)
        psi, _ = self._psi(t)
        return np.where(x <= e, -phi * (e * e - x * x), psi * (x - e) * (2.0 - x))

    def source(self, t, x, phase=None):
        p = self.params
        e, ep = self.front(t), self.front.prime(t)
        phi, dphi = self._phi(t)
        psi, dpsi = self._psi(t)
        crumb = p.c_l * (-dphi * (e * e - x * x) - 2.0 * phi * e * ep) - 2.0 * p.k_l * phi
        crust = p.c_a * (dpsi * (x - e) * (2.0 - x) - psi * ep * (2.0 - x)) + 2.0 * p.k_a * psi
        return _by_phase(x, e, phase, crumb, crust)

    def boundary_source(self, t):
        e = self.front(t)
        psi, _ = self._psi(t)
        ux1 = psi * e
        u1 = psi * (1.0 - e)
        return -self.params.k_a * ux1 - float(boundary_heat_flux(t, u1, self.oven, self.params))


@dataclass(frozen=True)
class MoistureMMS:
    """Manufactured water content with flux continuity at the prescribed front.

    ``w = 1 + phi(t) a(x) + chi(t) b(x)`` where ``a`` is ``x^2/(2 e d_l)`` in
    the crumb and ``(x - e)/d_a + e/(2 d_l)`` in the crust (unit flux on both
    sides of the front), and ``b`` is ``(x^2 - e^2)^2`` / ``(x - e)^2`` (zero
    value and slope at the front).
    """

    params: PhysicalParams
    front: PrescribedFront

    @staticmethod
    def _phi(t):
        return 0.5 + 0.25 * np.sin(2 * t), 0.5 * np.cos(2 * t)

    @staticmethod
    def _chi(t):
        return 1.0 + 0.5 * np.cos(t), -0.5 * np.sin(t)

    def exact(self, t, x):
        p = self.params
        e = self.front(t)
        phi, _ = self._phi(t)
        chi, _ = self._chi(t)
        crumb = 1.0 + phi * x * x / (2.0 * e * p.d_l) + chi * (x * x - e * e) ** 2
        crust = 1.0 + phi * ((x - e) / p.d_a + e / (2.0 * p.d_l)) + chi * (x - e) ** 2
        return np.where(x <= e, crumb, crust)

    def source(self, t, x, phase=None):
        p = self.params
        e, ep = self.front(t), self.front.prime(t)
        phi, dphi = self._phi(t)
        chi, dchi = self._chi(t)
        wt_l = (
            dphi * x * x / (2.0 * e * p.d_l)
            - phi * x * x * ep / (2.0 * e * e * p.d_l)
            + dchi * (x * x - e * e) ** 2
            - 4.0 * chi * (x * x - e * e) * e * ep
        )
        wxx_l = phi / (e * p.d_l) + chi * (12.0 * x * x - 4.0 * e * e)
        wt_a = (
            dphi * ((x - e) / p.d_a + e / (2.0 * p.d_l))
            + phi * (-ep / p.d_a + ep / (2.0 * p.d_l))
            + dchi * (x - e) ** 2
            - 2.0 * chi * (x - e) * ep
        )
        wxx_a = 2.0 * chi
        return _by_phase(x, e, phase, wt_l - p.d_l * wxx_l, wt_a - p.d_a * wxx_a)

    def boundary_flux(self, t):
        """Outward flux ``-d_a w_x(t, 1)``."""
        e = self.front(t)
        phi, _ = self._phi(t)
        chi, _ = self._chi(t)
        return -(phi + 2.0 * self.params.d_a * chi * (1.0 - e))


def _time_levels(horizon: float, dt: float) -> int:
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * horizon:
        raise ConfigurationError(f"horizon {horizon:g} is not a multiple of dt {dt:g}")
    return steps


def mms_heat_error(mms: HeatMMS, n: int, dt: float, horizon: float) -> float:
    """Max nodal error of the temperature step at ``horizon`` on an ``n``-per-phase grid."""
    grid = LandauGrid(n, n)
    steps = _time_levels(horizon, dt)
    e = float(mms.front(0.0))
    u = FieldOnGrid(grid, mms.exact(0.0, grid.x(e)))
    for k in range(1, steps + 1):
        t = k * dt
        e_new = float(mms.front(t))
        out = heat_step(
            HeatStepInput(u, e_new, (e_new - e) / dt, t, dt, mms.params, mms.oven,
                          source=mms.source, boundary_source=mms.boundary_source)
        )
        u, e = out.u, e_new
    return float(np.max(np.abs(u.values - mms.exact(horizon, grid.x(e)))))


def mms_moisture_error(mms: MoistureMMS, n: int, dt: float, horizon: float, setup: ProblemSetup) -> float:
    grid = LandauGrid(n, n)
    steps = _time_levels(horizon, dt)
    e = float(mms.front(0.0))
    w = FieldOnGrid(grid, mms.exact(0.0, grid.x(e)))
    for k in range(1, steps + 1):
        t = k * dt
        e_new = float(mms.front(t))
        out = moisture_step(
            MoistureStepInput(w, e_new, (e_new - e) / dt, 0.0, t, dt, setup,
                              source=mms.source, flux_override=mms.boundary_flux)
        )
        w, e = out.w, e_new
    return float(np.max(np.abs(w.values - mms.exact(horizon, grid.x(e)))))


def observed_orders(steps: Sequence[float], errors: Sequence[float]) -> list:
    """``log(err_k / err_{k+1}) / log(h_k / h_{k+1})`` for consecutive levels."""
    out = []
    for k in range(len(errors) - 1):
        ratio = steps[k] / steps[k + 1]
        if ratio == 1.0:
            raise ConfigurationError("ladder levels must differ in the refined quantity")
        if errors[k + 1] == 0.0 or errors[k] == 0.0:
            out.append(float("nan"))
        else:
            out.append(math.log(errors[k] / errors[k + 1]) / math.log(ratio))
    return out


@dataclass
class ConvergenceReport:
    space_steps: list
    space_errors: list
    space_orders: list
    time_steps: list
    time_errors: list
    time_orders: list
    monotone: bool = True
    labels: dict = field(default_factory=dict)

    @property
    def space_order(self) -> float:
        return self.space_orders[-1] if self.space_orders else float("nan")

    @property
    def time_order(self) -> float:
        return self.time_orders[-1] if self.time_orders else float("nan")

    def as_dict(self) -> dict:
        return {
            "space": {"h": self.space_steps, "errors": self.space_errors, "orders": self.space_orders},
            "time": {"h": self.time_steps, "errors": self.time_errors, "orders": self.time_orders},
            "monotone": self.monotone,
            **self.labels,
        }


def _check_ladder(ladder):
    if len(ladder) < 3:
        raise ConfigurationError("a convergence ladder needs at least 3 levels")
    if len({tuple(level) for level in ladder}) != len(ladder):
        raise ConfigurationError("ladder contains identical levels")


def _monotone(errors) -> bool:
    return all(errors[k + 1] < errors[k] for k in range(len(errors) - 1))


def mms_convergence(kind: str, space_ladder, time_ladder, horizon: float = 0.2, moving: bool = True) -> ConvergenceReport:
    """Observed orders for a manufactured temperature or moisture problem.

    ``space_ladder`` holds ``(n, dt)`` pairs with ``dt`` small enough (or
    scaled like ``dy^2``) for the spatial error to dominate; ``time_ladder``
    holds pairs on a fine grid with varying ``dt``.
    """
    _check_ladder(space_ladder)
    _check_ladder(time_ladder)
    params = PhysicalParams(c_l=1.3, c_a=0.8, k_l=0.9, k_a=1.4, d_l=0.6, d_a=0.3, h=2.0, sigma=0.05,
                            b1=1.0, b2=1.0, latent=1.0, theta_c=1.0)
    front = PrescribedFront(0.5, 0.1 if moving else 0.0, 2.0)
    oven = OvenSchedule.constant_at(1.5)
    if kind == "heat":
        mms = HeatMMS(params, oven, front)

        def err(n, dt):
            return mms_heat_error(mms, n, dt, horizon)
    elif kind == "moisture":
        mms = MoistureMMS(params, front)
        setup = ProblemSetup(params, SorptionFunction.constant(0.5), oven,
                             InitialData(0.5, np.zeros(3), np.ones(3)), horizon=horizon)

        def err(n, dt):
            return mms_moisture_error(mms, n, dt, horizon, setup)
    else:
        raise ValueError(f"unknown manufactured problem {kind!r}")
    s_err = [err(n, dt) for n, dt in space_ladder]
    t_err = [err(n, dt) for n, dt in time_ladder]
    s_h = [1.0 / (n - 1) for n, _ in space_ladder]
    t_h = [dt for _, dt in time_ladder]
    return ConvergenceReport(s_h, s_err, observed_orders(s_h, s_err), t_h, t_err, observed_orders(t_h, t_err),
                             monotone=_monotone(s_err) and _monotone(t_err), labels={"kind": kind, "moving_front": moving})


@dataclass
class ReferenceRun:
    """Fine run used as ground truth for coarser ones (at least 4x finer in dy and dt)."""

    result: RunResult
    n: int
    dt: float

    @property
    def final(self):
        return self.result.report.final_sim_state


def reference_run(setup: ProblemSetup, n: int, dt: float, config: CouplingConfig | None = None, factor: int = 4) -> ReferenceRun:
    base = config or CouplingConfig()
    nf = (n - 1) * factor + 1
    dtf = dt / factor
    cfg = base.replace(n_l=nf, n_a=nf, dt=dtf, adaptive=False)
    return ReferenceRun(run(setup, cfg), nf, dtf)


def self_convergence(setup: ProblemSetup, ladder, config: CouplingConfig | None = None, factor: int = 4) -> ConvergenceReport:
    """Errors of coupled runs on a ladder of ``(n, dt)`` against a finer reference.

    Fixed steps are used so every level ends exactly at the horizon.  Field
    errors are measured at reference nodes coinciding with the coarse nodes in
    the front-fixed coordinate.  Orders are reported with respect to ``dy``
    ("space") and ``dt`` ("time") along the same ladder.
    """
    _check_ladder(ladder)
    base = config or CouplingConfig()
    n_f = max(n for n, _ in ladder)
    dt_f = min(dt for _, dt in ladder)
    ref = reference_run(setup, n_f, dt_f, base, factor)
    ref_state = ref.final
    e_err, u_err, w_err = [], [], []
    for n, dt in ladder:
        if (ref.n - 1) % (n - 1):
            raise ConfigurationError(f"grid with {n} nodes is not nested in the reference grid")
        res = run(setup, base.replace(n_l=n, n_a=n, dt=dt, adaptive=False))
        st = res.report.final_sim_state
        if abs(st.t - ref_state.t) > 1e-9 * max(1.0, st.t):
            raise ConfigurationError("ladder run stopped at a different time than the reference")
        stride = (ref.n - 1) // (n - 1)
        idx = np.arange(0, 2 * (ref.n - 1) + 1, stride)
        e_err.append(abs(st.e - ref_state.e))
        u_err.append(float(np.max(np.abs(st.u.values - ref_state.u.values[idx]))))
        w_err.append(float(np.max(np.abs(st.w.values - ref_state.w.values[idx]))))
    hs = [1.0 / (n - 1) for n, _ in ladder]
    dts = [dt for _, dt in ladder]
    space_ok = len(set(hs)) == len(hs)
    time_ok = len(set(dts)) == len(dts)
    if not (space_ok or time_ok):
        raise ConfigurationError("degenerate ladder")
    rep = ConvergenceReport(
        hs if space_ok else [],
        e_err if space_ok else [],
        observed_orders(hs, e_err) if space_ok else [],
        dts if time_ok else [],
        e_err if time_ok else [],
        observed_orders(dts, e_err) if time_ok else [],
        monotone=_monotone(e_err),
        labels={
            "front_errors": e_err,
            "u_errors": u_err,
            "w_errors": w_err,
            "u_orders_dy": observed_orders(hs, u_err) if space_ok else [],
            "w_orders_dy": observed_orders(hs, w_err) if space_ok else [],
            "reference": {"n": ref.n, "dt": ref.dt},
        },
    )
    return rep


# ---------------------------------------------------------------------------
# physical-grid reference for a frozen front


def frozen_front_reference(setup: ProblemSetup, e: float, m: int, dt: float, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    """Temperature on a uniform physical grid with the front frozen at a node.

    Independent of the front-fixed discretisation: plain second-order finite
    differences in ``x``, ghost-node Neumann at 0, Dirichlet 0 at ``e`` and a
    Newton-linearised Robin row at 1, backward Euler with dense-banded solves.
    Requires ``e * (m - 1)`` to be an integer so the front sits on a node.
    """
    from scipy.linalg import solve_banded

    p = setup.params
    j = round(e * (m - 1))
    if abs(j - e * (m - 1)) > 1e-9:
        raise DomainError("front must coincide with a physical grid node")
    x = np.linspace(0.0, 1.0, m)
    dx = x[1] - x[0]
    u = np.where(x < e, setup.init.temperature_at(x, "crumb"), setup.init.temperature_at(x, "crust"))
    u[j] = 0.0
    cap = np.where(x < e, p.c_l, p.c_a)
    cond = np.where(x < e, p.k_l, p.k_a)
    steps = _time_levels(horizon, dt)
    for k in range(1, steps + 1):
        t = k * dt
        r = u[-1]
        for _ in range(50):
            ab = np.zeros((3, m))
            rhs = cap * u / dt
            diag = cap / dt + 2.0 * cond / dx**2
            ab[1] = diag
            ab[0, 1:] = -cond[:-1] / dx**2
            ab[2, :-1] = -cond[1:] / dx**2
            ab[0, 1] = -2.0 * cond[0] / dx**2  # ghost node at x=0
            # Dirichlet at the front
            ab[1, j] = 1.0
            ab[0, j + 1] = 0.0
            ab[2, j - 1] = 0.0
            rhs[j] = 0.0
            # Robin row: ghost u_{m} = u_{m-2} - 2 dx g / k_a, linearised about r
            g = float(boundary_heat_flux(t, r, setup.oven, p))
            dg = p.h + 4.0 * p.sigma * (r + p.theta_c) ** 3
            ab[2, m - 2] = -2.0 * p.k_a / dx**2
            ab[1, -1] = p.c_a / dt + 2.0 * p.k_a / dx**2 + 2.0 * dg / dx
            rhs[-1] = p.c_a * u[-1] / dt - 2.0 * (g - dg * r) / dx
            new = solve_banded((1, 1), ab, rhs)
            done = abs(new[-1] - r) <= 1e-13 * (1.0 + abs(r))
            r = new[-1]
            if done:
                break
        u = new
    return x, u


# ---------------------------------------------------------------------------
# certification


@dataclass
class Tolerances:
    """Certificate thresholds.

    ``sign`` and ``comparison`` and ``floor`` use ``factor * (dy^2 + dt_max)``;
    the balance residual bounds are ``C * (dt^2 + dt dy^2)`` per step.
    """

    invariant_factor: float = 10.0
    mass_constant: float = 1.0
    enthalpy_constant: float = 1.0
    energy_slack: float = 1.0  # per-step E1 increase allowed: energy_slack * dt * (dt + dy^2)
    regularity_slack: float = 1e-8
    drift_rel: float = 1e-3
    stefan_motion: float = 1e-6

    def as_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "Tolerances":
        data = dict(data or {})
        known = {k: float(v) for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not_applicable"


@dataclass
class Certificate:
    name: str
    status: str
    residual: float = 0.0
    tolerance: float = 0.0
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "residual": self.residual,
                "tolerance": self.tolerance, "detail": self.detail}


@dataclass
class CertificationReport:
    certificates: list

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.certificates)

    def __getitem__(self, name: str) -> Certificate:
        for c in self.certificates:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "certificates": [c.as_dict() for c in self.certificates]}


def _col(series, name) -> np.ndarray:
    try:
        return np.asarray(series[name], dtype=float)
    except KeyError:
        raise MalformedArtifactError(f"series is missing column {name!r}") from None


def certify_run(
    series,
    hypotheses: dict,
    dy: float,
    classification: str,
    tolerances: Tolerances | None = None,
    latent: float | None = None,
) -> CertificationReport:
    """Evaluate every applicable invariant on a finished run.

    ``hypotheses`` is the dict of long-time hypothesis flags recorded with the
    run (``b1_le_b2``, ``oven_constant``, ``oven_dominates``, ``w0_positive``).
    Rows are sorted by step first, so the result does not depend on record
    order.
    """
    tol = tolerances or Tolerances()
    for name in SERIES_COLUMNS:
        _col(series, name)
    order = np.argsort(_col(series, "step"), kind="stable")
    col = {name: _col(series, name)[order] for name in SERIES_COLUMNS}
    dts = col["dt"][1:]
    dt_max = float(np.max(dts)) if dts.size else 0.0
    inv_tol = tol.invariant_factor * (dy * dy + dt_max)
    certs = []

    worst = float(np.max(col["sign_violation"]))
    certs.append(Certificate("sign", PASS if worst <= inv_tol else FAIL, worst, inv_tol))

    comparison = hypotheses.get("oven_constant") and hypotheses.get("oven_dominates")
    if comparison:
        worst = float(np.max(col["comparison_excess"]))
        certs.append(Certificate("comparison", PASS if worst <= inv_tol else FAIL, max(worst, 0.0), inv_tol))
    else:
        certs.append(Certificate("comparison", NOT_APPLICABLE, detail="oven not constant or below u0 + theta_c"))

    floor_ok = comparison and hypotheses.get("b1_le_b2") and hypotheses.get("w0_positive")
    if floor_ok:
        floor = float(col["w_min"][0])
        dip = max(floor - float(np.min(col["w_min"])), 0.0)
        certs.append(Certificate("moisture_floor", PASS if dip <= inv_tol else FAIL, dip, inv_tol))
    else:
        certs.append(Certificate("moisture_floor", NOT_APPLICABLE, detail="requires b1 <= b2, constant dominating oven, w0 > 0"))

    for name, const, scale_cols in (
        ("mass_balance", tol.mass_constant, ("mass",)),
        ("enthalpy_balance", tol.enthalpy_constant, ("enthalpy",)),
    ):
        res = col[f"{name.split('_')[0]}_residual"][1:]
        if res.size == 0:
            certs.append(Certificate(name, PASS, 0.0, 0.0, "no steps"))
            continue
        bound = const * (dts**2 + dts * dy * dy) + 1e-13
        ratio = np.abs(res) / bound
        k = int(np.argmax(ratio))
        drift = abs(float(np.sum(res)))
        scale = max(float(np.max(np.abs(col[scale_cols[0]]))), float(np.sum(np.abs(res))), 1e-300)
        if name == "enthalpy_balance" and latent is not None:
            motion = float(np.sum(np.abs(np.diff(col["e"])))) * latent * float(np.max(col["w_front"]))
            scale = max(scale, motion)
        drift_rel = drift / scale if drift > 1e-14 else 0.0
        ok = ratio[k] <= 1.0 and drift_rel <= tol.drift_rel
        certs.append(Certificate(name, PASS if ok else FAIL, float(np.abs(res[k])), float(bound[k]),
                                 f"cumulative drift {drift_rel:.3e} relative"))

    if comparison:
        energy = col["energy"]
        de = np.diff(energy)
        slack = tol.energy_slack * dts * (dts + dy * dy) + 1e-13 * max(1.0, abs(energy[0]))
        k = int(np.argmax(de - slack)) if de.size else 0
        ok = bool(np.all(de <= slack)) if de.size else True
        certs.append(Certificate("energy_monotone", PASS if ok else FAIL,
                                 float(de[k]) if de.size else 0.0, float(slack[k]) if de.size else 0.0))
        dissipated = float(np.sum(col["dissipation"][1:]))
        budget = float(energy[0] - energy[-1])
        excess = dissipated - budget
        reg_tol = tol.regularity_slack + tol.energy_slack * float(np.sum(dts * (dts + dy * dy)))
        certs.append(Certificate("front_regularity", PASS if excess <= reg_tol else FAIL, excess, reg_tol,
                                 f"sum l^2 w^2 |e'|^3 dt / 2 = {dissipated:.6e}, E1 drop = {budget:.6e}"))
    else:
        certs.append(Certificate("energy_monotone", NOT_APPLICABLE, detail="needs a constant dominating oven"))
        certs.append(Certificate("front_regularity", NOT_APPLICABLE, detail="needs a constant dominating oven"))

    t = col["t"]
    de = np.abs(np.diff(col["e"]))
    allowed = np.abs(col["e_prime"][1:]) * dts * (1.0 + tol.stefan_motion) + 1e-15
    ok = bool(np.all(np.diff(t) > 0) and np.all(de <= allowed)) if dts.size else True
    certs.append(Certificate("front_continuity", PASS if ok else FAIL,
                             float(np.max(de - allowed)) if dts.size else 0.0, 0.0))

    ok = classification in CLASSIFICATIONS
    certs.append(Certificate("classification", PASS if ok else FAIL, detail=str(classification)))
    return CertificationReport(certs)


def certify_result(result: RunResult, setup: ProblemSetup, tolerances: Tolerances | None = None) -> CertificationReport:
    return certify_run(result.series, result.ledger.hypotheses, result.ledger.dy,
                       result.report.classification, tolerances, latent=setup.params.latent)


# ---------------------------------------------------------------------------
# random admissible setups


def random_admissible_setup(seed: int, horizon: float = 0.1, samples: int = 2001) -> ProblemSetup:
    """Setup satisfying the standing assumptions and the long-time hypotheses, drawn from ``seed``.

    Initial temperatures are piecewise quadratics, so the one-sided
    compatibility differences are exact.
    """
    rng = np.random.default_rng(seed)
    u = rng.uniform
    theta_c = 1.0
    b2 = u(0.5, 2.0)
    params = PhysicalParams(
        c_l=u(0.5, 2.0), c_a=u(0.5, 2.0), k_l=u(0.5, 2.0), k_a=u(0.5, 2.0),
        d_l=u(0.05, 0.5), d_a=u(0.05, 0.5), h=u(0.5, 4.0), sigma=u(0.0, 0.05),
        b1=b2 * u(0.3, 1.0), b2=b2, latent=u(1.0, 4.0), theta_c=theta_c,
    )
    ub = u(1.1, 2.0)
    e0 = u(0.3, 0.7)
    amp = u(0.0, 0.5)
    frac = u(0.5, 0.95)
    while True:
        try:
            u0 = compatible_profile(params, ub, e0, amp, frac)
            break
        except DomainError:
            frac = 0.5 * (frac + 1.0)

    w_base = u(0.5, 1.5)
    w_amp = u(0.0, 0.4) * w_base
    k = int(rng.integers(1, 4))

    def w0(x):
        return w_base + w_amp * np.cos(k * np.pi * x)

    cap = 1.0
    knots = np.sort(u(theta_c, ub + 0.5, size=3))
    levels = np.sort(u(0.0, 0.9, size=3))
    # keep every slope below the cap
    for i in range(1, 3):
        gap = knots[i] - knots[i - 1]
        levels[i] = min(levels[i], levels[i - 1] + 0.9 * cap * gap)
    halfwidth = 0.25 * float(np.min(np.diff(knots)))
    sorption = SorptionFunction(tuple(knots), tuple(levels), cap=cap, smoothing_halfwidth=halfwidth)
    init = InitialData.from_functions(e0, u0, w0, n=samples)
    return ProblemSetup(params, sorption, OvenSchedule.constant_at(ub), init, horizon=horizon,
                        meta={"seed": int(seed)})
