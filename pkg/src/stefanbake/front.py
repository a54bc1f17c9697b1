"""Free-boundary dynamics: Stefan velocity, coupled stepping and run driver."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, MoistureFloorViolated, StepFailure
from .heat import HeatStepInput, comparison_excess, enthalpy, heat_step
from .landau import FieldOnGrid, LandauGrid, one_sided_gradients, sample_initial_fields
from .moisture import MoistureStepInput, moisture_step, total_mass
from .problem import ProblemSetup, boundary_heat_flux, long_time_hypotheses

log = logging.getLogger(__name__)

REACHED_HORIZON = "ReachedHorizon"
FRONT_HIT_ZERO = "FrontHitZero"
FRONT_HIT_ONE = "FrontHitOne"
MOISTURE_FLOOR_VIOLATED = "MoistureFloorViolated"
STEP_FAILURE = "StepFailure"
CLASSIFICATIONS = (REACHED_HORIZON, FRONT_HIT_ZERO, FRONT_HIT_ONE, MOISTURE_FLOOR_VIOLATED, STEP_FAILURE)
# trichotomy case each classification stands in for
TRICHOTOMY_CASE = {REACHED_HORIZON: "a", FRONT_HIT_ZERO: "b", FRONT_HIT_ONE: "c"}

SERIES_COLUMNS = (
    "step",
    "t",
    "dt",
    "e",
    "e_prime",
    "u_boundary",
    "w_front",
    "w_min",
    "mass",
    "enthalpy",
    "mass_residual",
    "enthalpy_residual",
    "energy",
    "dissipation",
    "sign_violation",
    "comparison_excess",
    "picard_iterations",
    "newton_iterations",
)


@dataclass
class CouplingConfig:
    """Solver controls.  ``dt`` is both the initial and the largest time step."""

    mode: str = "picard"
    picard_tol: float = 1e-12
    picard_max_iter: int = 50
    dt: float = 1e-3
    dt_min: float = 1e-12
    delta_stop: float = 1e-3
    cfl_safety: float = 0.5
    adaptive: bool = True
    n_l: int = 101
    n_a: int = 101
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    max_steps: int = 10_000_000
    grow_after: int = 10
    grow_factor: float = 1.2

    def __post_init__(self):
        if self.mode not in ("picard", "explicit"):
            raise ConfigurationError(f"unknown coupling mode {self.mode!r}")
        for name in ("picard_tol", "dt", "dt_min", "delta_stop", "cfl_safety", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.picard_max_iter < 1 or self.newton_max_iter < 1:
            raise ConfigurationError("iteration limits must be at least 1")

    @property
    def grid(self) -> LandauGrid:
        return LandauGrid(self.n_l, self.n_a)

    def check_against(self, setup: ProblemSetup) -> None:
        e0 = setup.init.e0
        if not 0.0 < self.delta_stop < min(e0, 1.0 - e0):
            raise ConfigurationError(
                f"delta_stop={self.delta_stop:g} must lie in (0, min(e0, 1-e0)) = (0, {min(e0, 1 - e0):g})"
            )

    def replace(self, **changes) -> "CouplingConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class SimState:
    t: float
    e: float
    e_prime: float
    u: FieldOnGrid
    w: FieldOnGrid

    @property
    def grid(self) -> LandauGrid:
        return self.u.grid

    def summary(self) -> dict:
        return {
            "t": self.t,
            "e": self.e,
            "e_prime": self.e_prime,
            "u_boundary": float(self.u.values[-1]),
            "w_front": self.w.at_front,
            "w_min": float(np.min(self.w.values)),
        }


@dataclass
class StepInfo:
    picard_iterations: int
    newton_iterations: int
    grad_left: float
    grad_right: float
    w_front_used: float
    heat_flux: float  # g(t_new, u(t_new, 1))
    moisture_flux: float


def stefan_velocity(grad_left: float, grad_right: float, w_at_front: float, params, threshold: float = 0.0) -> float:
    """Front speed from the moisture-weighted Stefan condition."""
    if not w_at_front >= threshold or w_at_front <= 0.0:
        raise MoistureFloorViolated(f"front moisture {w_at_front:g} below threshold {threshold:g}", w_at_front)
    return (params.k_l * grad_left - params.k_a * grad_right) / (params.latent * w_at_front)


def initial_state(setup: ProblemSetup, grid: LandauGrid) -> SimState:
    u, w = sample_initial_fields(setup.init, grid)
    e0 = setup.init.e0
    uf, wf = FieldOnGrid(grid, u), FieldOnGrid(grid, w)
    left, right = one_sided_gradients(uf, e0)
    ep = stefan_velocity(left, right, wf.at_front, setup.params, setup.front_moisture_threshold)
    return SimState(0.0, e0, ep, uf, wf)


def _heat(state, e, ep, t_new, dt, setup, config, guess=None):
    return heat_step(
        HeatStepInput(
            state.u,
            e,
            ep,
            t_new,
            dt,
            setup.params,
            setup.oven,
            guard=setup.radiation_guard,
            newton_tol=config.newton_tol,
            max_iter=config.newton_max_iter,
            boundary_guess=guess,
        )
    )


def _advance(state: SimState, dt: float, config: CouplingConfig, setup: ProblemSetup):
    params = setup.params
    threshold = setup.front_moisture_threshold
    w_front = state.w.at_front
    t_new = state.t + dt
    newton_total = 0

    if config.mode == "explicit":
        left, right = one_sided_gradients(state.u, state.e)
        ep = stefan_velocity(left, right, w_front, params, threshold)
        e_new = state.e + dt * ep
        if not 0.0 < e_new < 1.0:
            raise StepFailure(f"front left (0, 1): e={e_new:g}")
        heat = _heat(state, e_new, ep, t_new, dt, setup, config)
        newton_total = heat.newton_iterations
        iters = 1
    else:
        e_guess = state.e + dt * state.e_prime
        heat = None
        inc = np.inf
        guess_r = None
        for iters in range(1, config.picard_max_iter + 1):
            if not 0.0 < e_guess < 1.0:
                raise StepFailure(f"Picard iterate left (0, 1): e={e_guess:g}", residual=inc)
            ep_guess = (e_guess - state.e) / dt
            heat = _heat(state, e_guess, ep_guess, t_new, dt, setup, config, guess_r)
            guess_r = heat.boundary_value
            newton_total += heat.newton_iterations
            v = stefan_velocity(heat.grad_left, heat.grad_right, w_front, params, threshold)
            e_next = state.e + dt * v
            inc = abs(e_next - e_guess)
            if inc <= config.picard_tol:
                break
            e_guess = e_next
        else:
            raise StepFailure(f"Picard did not converge in {config.picard_max_iter} iterations", residual=inc)
        # keep the front the fields were computed with; the Stefan residual is inc / dt
        e_new = e_guess
        ep = (e_new - state.e) / dt

    moist = moisture_step(
        MoistureStepInput(state.w, e_new, ep, heat.boundary_value, t_new, dt, setup)
    )
    g = float(boundary_heat_flux(t_new, heat.boundary_value, setup.oven, params, setup.radiation_guard))
    new = SimState(t_new, e_new, ep, heat.u, moist.w)
    info = StepInfo(iters, newton_total, heat.grad_left, heat.grad_right, w_front, g, moist.boundary_flux)
    return new, info


def coupled_step(state: SimState, dt: float, config: CouplingConfig, setup: ProblemSetup) -> SimState:
    """Advance the coupled front/temperature/moisture system by ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(state, dt, config, setup)[0]


# ---------------------------------------------------------------------------
# energy functional of the long-time estimate


def boundary_potential(r: float, ub: float, params) -> float:
    """``G`` with ``dG/dt = g(t, u(t,1)) u_t(t,1)`` for constant oven temperature."""
    th = params.theta_c
    return (
        0.5 * params.h * (r + th) ** 2
        - params.h * ub * r
        + params.sigma / 5.0 * (r + th) ** 5
        - params.sigma * ub**4 * r
    )


def boundary_constant(ub: float, params) -> float:
    """Lower bound shift making ``G + C_b`` nonnegative (Young's inequality)."""
    if params.h == 0:
        return 0.0
    return 2.0 * params.h * ub**2 + 2.0 / params.h * params.sigma**2 * ub**8


def energy_functional(u: np.ndarray, grid: LandauGrid, e: float, ub: float, params) -> float:
    """Discrete ``E_1``: k^2-weighted gradient energies plus ``k_a (G + C_b)``."""
    s = grid.shared
    dl = np.diff(u[: s + 1])
    da = np.diff(u[s:])
    grad_l = float(dl @ dl) / (e * grid.dy_l)
    grad_a = float(da @ da) / ((1.0 - e) * grid.dy_a)
    r = float(u[-1])
    return (
        0.5 * params.k_l**2 * grad_l
        + 0.5 * params.k_a**2 * grad_a
        + params.k_a * (boundary_potential(r, ub, params) + boundary_constant(ub, params))
    )


# ---------------------------------------------------------------------------
# run driver


@dataclass
class TerminationReport:
    classification: str
    stop_time: float
    final_state: dict
    message: str = ""
    threshold: Optional[float] = None
    steps: int = 0
    rejected_steps: int = 0
    max_residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise ValueError(f"unknown classification {self.classification!r}")

    @property
    def trichotomy_case(self) -> Optional[str]:
        return TRICHOTOMY_CASE.get(self.classification)

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "trichotomy_case": self.trichotomy_case,
            "stop_time": self.stop_time,
            "final_state": self.final_state,
            "message": self.message,
            "threshold": self.threshold,
            "steps": self.steps,
            "rejected_steps": self.rejected_steps,
            "max_residuals": self.max_residuals,
        }


@dataclass
class BalanceLedger:
    """Per-step balance residuals and invariant monitors, aligned with the series rows."""

    mass_residual: np.ndarray
    enthalpy_residual: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    sign_violation: np.ndarray
    comparison_excess: np.ndarray
    w_min: np.ndarray
    dt: np.ndarray
    dy: float
    hypotheses: dict
    energy_applicable: bool

    @property
    def cumulative_mass_drift(self) -> float:
        return float(np.sum(self.mass_residual))

    @property
    def cumulative_enthalpy_drift(self) -> float:
        return float(np.sum(self.enthalpy_residual))

    def max_residuals(self) -> dict:
        def mx(a):
            return float(np.max(np.abs(a))) if a.size else 0.0

        return {
            "mass": mx(self.mass_residual),
            "enthalpy": mx(self.enthalpy_residual),
            "sign": float(np.max(self.sign_violation)) if self.sign_violation.size else 0.0,
            "comparison": float(np.max(self.comparison_excess)) if self.comparison_excess.size else 0.0,
        }


class TimeSeries(dict):
    """Column name -> numpy array, one row per accepted step (row 0 is the initial state)."""

    @property
    def n_rows(self) -> int:
        return len(self["t"])

    def row(self, i: int) -> dict:
        return {k: self[k][i] for k in SERIES_COLUMNS}


class RunResult(NamedTuple):
    series: TimeSeries
    report: TerminationReport
    ledger: BalanceLedger


def _sign_violation(u: np.ndarray, s: int) -> float:
    return max(float(np.max(u[:s], initial=0.0)), float(-np.min(u[s + 1 :], initial=0.0)), abs(float(u[s])))


class _Recorder:
    def __init__(self, setup: ProblemSetup, grid: LandauGrid):
        self.setup = setup
        self.grid = grid
        self.rows = {k: [] for k in SERIES_COLUMNS}
        self.hyp = long_time_hypotheses(setup)
        self.ub_const = float(setup.oven.temps[0]) if setup.oven.constant else None

    def add(self, step, state: SimState, dt, info: Optional[StepInfo], prev: Optional[dict]):
        p = self.setup.params
        grid = self.grid
        u, w = state.u.values, state.w.values
        mass = total_mass(w, grid, state.e)
        H = enthalpy(u, grid, state.e, p)
        ub = self.setup.oven(state.t)
        if prev is None:
            mres = hres = diss = 0.0
        else:
            mres = mass - prev["mass"] + dt * info.moisture_flux
            stefan_term = p.latent * info.w_front_used * state.e_prime
            hres = H - prev["enthalpy"] - dt * (stefan_term - info.heat_flux)
            diss = 0.5 * p.latent**2 * info.w_front_used**2 * abs(state.e_prime) ** 3 * dt
        energy = energy_functional(u, grid, state.e, ub, p) if self.ub_const is not None else float("nan")
        s = grid.shared
        row = {
            "step": step,
            "t": state.t,
            "dt": dt,
            "e": state.e,
            "e_prime": state.e_prime,
            "u_boundary": float(u[-1]),
            "w_front": float(w[s]),
            "w_min": float(np.min(w)),
            "mass": mass,
            "enthalpy": H,
            "mass_residual": mres,
            "enthalpy_residual": hres,
            "energy": energy,
            "dissipation": diss,
            "sign_violation": _sign_violation(u, s),
            "comparison_excess": comparison_excess(u, p, ub),
            "picard_iterations": info.picard_iterations if info else 0,
            "newton_iterations": info.newton_iterations if info else 0,
        }
        for k, v in row.items():
            self.rows[k].append(v)
        return row

    def finish(self):
        series = TimeSeries()
        for k in SERIES_COLUMNS:
            dtype = int if k in ("step", "picard_iterations", "newton_iterations") else float
            series[k] = np.asarray(self.rows[k], dtype=dtype)
        ledger = BalanceLedger(
            mass_residual=series["mass_residual"][1:],
            enthalpy_residual=series["enthalpy_residual"][1:],
            energy=series["energy"],
            dissipation=series["dissipation"][1:],
            sign_violation=series["sign_violation"],
            comparison_excess=series["comparison_excess"],
            w_min=series["w_min"],
            dt=series["dt"][1:],
            dy=self.grid.dy_min,
            hypotheses=self.hyp.as_dict(),
            energy_applicable=self.ub_const is not None,
        )
        return series, ledger


def run(setup: ProblemSetup, config: CouplingConfig, validate: bool = True) -> RunResult:
    """Integrate until the horizon, the front reaches ``delta_stop`` or ``1 - delta_stop``, or a monitor trips."""
    from .problem import validate_setup

    config.check_against(setup)
    if validate:
        report = validate_setup(setup)
        if not report.runnable:
            raise ConfigurationError("setup violates standing assumptions:\n" + report.summary())

    grid = config.grid
    rec = _Recorder(setup, grid)
    threshold = setup.front_moisture_threshold
    try:
        state = initial_state(setup, grid)
    except MoistureFloorViolated as exc:
        raise ConfigurationError(f"initial front moisture below delta_1: {exc}") from None

    prev = rec.add(0, state, 0.0, None, None)
    T = setup.horizon
    dt_max = config.dt
    dt = config.dt
    clean = 0
    rejected = 0
    step = 0
    classification = REACHED_HORIZON
    message = ""
    lo, hi = config.delta_stop, 1.0 - config.delta_stop
    while True:
        if state.t >= T * (1.0 - 1e-14):
            classification = REACHED_HORIZON
            break
        if step >= config.max_steps:
            classification = STEP_FAILURE
            message = f"max_steps={config.max_steps} reached"
            break
        trial = dt
        if config.adaptive and state.e_prime != 0.0:
            cap = config.cfl_safety * min(state.e, 1.0 - state.e) * grid.dy_min / abs(state.e_prime)
            trial = min(trial, max(cap, config.dt_min))
        trial = min(trial, T - state.t)
        try:
            new, info = _advance(state, trial, config, setup)
        except StepFailure as exc:
            rejected += 1
            clean = 0
            if config.adaptive and trial / 2 >= config.dt_min:
                dt = trial / 2
                log.debug("step rejected at t=%g (%s); dt -> %g", state.t, exc, dt)
                continue
            classification = STEP_FAILURE
            message = str(exc)
            break
        except MoistureFloorViolated as exc:
            classification = MOISTURE_FLOOR_VIOLATED
            message = str(exc)
            break
        step += 1
        state = new
        prev = rec.add(step, state, trial, info, prev)
        if state.e <= lo:
            classification = FRONT_HIT_ZERO
            break
        if state.e >= hi:
            classification = FRONT_HIT_ONE
            break
        if state.w.at_front < threshold:
            classification = MOISTURE_FLOOR_VIOLATED
            message = f"front moisture {state.w.at_front:g} below delta_1={threshold:g}"
            break
        if config.adaptive:
            clean += 1
            if clean >= config.grow_after:
                dt = min(dt * config.grow_factor, dt_max)
                clean = 0

    series, ledger = rec.finish()
    report = TerminationReport(
        classification=classification,
        stop_time=state.t,
        final_state=state.summary(),
        message=message,
        threshold=(lo if classification == FRONT_HIT_ZERO else hi if classification == FRONT_HIT_ONE else None),
        steps=step,
        rejected_steps=rejected,
        max_residuals=ledger.max_residuals(),
    )
    report.final_sim_state = state
    return RunResult(series, report, ledger)


# ---------------------------------------------------------------------------
# whole-horizon solution operator


def w13_norm(values: np.ndarray, dt: float) -> float:
    """Discrete W^{1,3}: ``(sum |v|^3 dt + sum |forward diff / dt|^3 dt)^(1/3)``."""
    v = np.asarray(values, dtype=float)
    d = np.diff(v) / dt
    return float((np.sum(np.abs(v[1:]) ** 3) * dt + np.sum(np.abs(d) ** 3) * dt) ** (1.0 / 3.0))


@dataclass
class GammaResult:
    image: np.ndarray  # Gamma(e) on the time grid
    velocity: np.ndarray  # integrand of Gamma(e) per step
    w_front: np.ndarray


def gamma_map(setup: ProblemSetup, trajectory: np.ndarray, horizon: float, config: CouplingConfig, delta: float) -> GammaResult:
    """Apply the solution operator to a discrete front trajectory.

    The temperature and moisture problems are solved with the prescribed front
    (no feedback), and the Stefan velocity they induce is integrated from
    ``e0``.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 1 or traj.size < 2:
        raise DomainError("trajectory needs at least two samples")
    if np.any(traj < delta) or np.any(traj > 1.0 - delta):
        raise DomainError(f"trajectory leaves [{delta:g}, {1 - delta:g}]")
    if abs(traj[0] - setup.init.e0) > 1e-14:
        raise DomainError("trajectory must start at e0")
    K = traj.size - 1
    dt = horizon / K
    grid = config.grid
    state = initial_state(setup, grid)
    img = np.empty(K + 1)
    img[0] = setup.init.e0
    vel = np.empty(K)
    wf = np.empty(K)
    for n in range(K):
        ep = (traj[n + 1] - traj[n]) / dt
        t_new = (n + 1) * dt
        heat = _heat(state, traj[n + 1], ep, t_new, dt, setup, config)
        moist = moisture_step(MoistureStepInput(state.w, traj[n + 1], ep, heat.boundary_value, t_new, dt, setup))
        wf[n] = moist.front_value
        vel[n] = stefan_velocity(heat.grad_left, heat.grad_right, moist.front_value, setup.params, setup.front_moisture_threshold)
        img[n + 1] = img[n] + dt * vel[n]
        state = SimState(t_new, traj[n + 1], ep, heat.u, moist.w)
    return GammaResult(img, vel, wf)


@dataclass
class ContractionProbe:
    horizon: float
    ratio: float
    distance_in: float
    distance_out: float
    in_k_set: bool  # both trajectories satisfy sum |e'|^3 dt <= M


def gamma_contraction_probe(
    setup: ProblemSetup,
    horizon: float,
    e1: np.ndarray,
    e2: np.ndarray,
    config: CouplingConfig,
    delta: float = 1e-3,
    bound_m: float = np.inf,
) -> ContractionProbe:
    """Empirical Lipschitz ratio of the solution operator in discrete W^{1,3}."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape:
        raise DomainError("trajectories must share the time grid")
    dt = horizon / (e1.size - 1)
    din = w13_norm(e1 - e2, dt)
    g1 = gamma_map(setup, e1, horizon, config, delta)
    if din == 0.0:
        return ContractionProbe(horizon, 0.0, 0.0, 0.0, True)
    g2 = gamma_map(setup, e2, horizon, config, delta)
    dout = w13_norm(g1.image - g2.image, dt)
    in_k = all(np.sum(np.abs(np.diff(e) / dt) ** 3) * dt <= bound_m for e in (e1, e2))
    return ContractionProbe(horizon, dout / din, din, dout, bool(in_k))


def solution_trajectory(setup: ProblemSetup, horizon: float, steps: int, config: CouplingConfig) -> np.ndarray:
    """Front trajectory of the coupled problem sampled on a uniform grid of ``steps`` steps.

    The coupled run uses its own adaptive steps (capped at the sampling step);
    the result is interpolated onto the sampling grid.
    """
    dt = horizon / steps
    res = run(setup.replace(horizon=horizon), config.replace(dt=min(config.dt, dt)), validate=False)
    if res.report.classification != REACHED_HORIZON:
        raise DomainError(f"coupled run ended early ({res.report.classification}) before t={horizon:g}")
    t = np.linspace(0.0, horizon, steps + 1)
    out = np.interp(t, res.series["t"], res.series["e"])
    out[0] = setup.init.e0
    return out


@dataclass
class ContractionSearch:
    horizon: float  # first horizon found with ratio < 1
    ratios: list  # (T0, ratio) pairs for T0, T0/2, T0/4
    history: list  # all probes evaluated during the search


def find_contraction_horizon(
    setup: ProblemSetup,
    horizon: float,
    config: CouplingConfig,
    steps: int = 64,
    perturbation: float = 1e-3,
    max_halvings: int = 20,
    bisection_steps: int = 6,
    delta: float = 1e-3,
) -> ContractionSearch:
    """Locate a horizon with contraction ratio below one, then probe two further halvings.

    The second trajectory is ``e1 + perturbation * t``, which keeps ``e(0) = e0``.
    """

    def probe(T0):
        e1 = solution_trajectory(setup, T0, steps, config)
        t = np.linspace(0.0, T0, steps + 1)
        e2 = e1 + perturbation * t
        return gamma_contraction_probe(setup, T0, e1, e2, config, delta)

    history = []
    T0 = horizon
    hi = None
    pr = probe(T0)
    history.append(pr)
    for _ in range(max_halvings):
        if pr.ratio < 1.0:
            break
        hi = T0
        T0 /= 2
        pr = probe(T0)
        history.append(pr)
    if pr.ratio >= 1.0:
        raise StepFailure("no contracting horizon found", residual=pr.ratio)
    if hi is not None:
        lo_T = T0
        for _ in range(bisection_steps):
            mid = 0.5 * (lo_T + hi)
            pm = probe(mid)
            history.append(pm)
            if pm.ratio < 1.0:
                lo_T = mid
            else:
                hi = mid
        T0 = lo_T
    ratios = []
    for k in range(3):
        Tk = T0 / 2**k
        pk = probe(Tk)
        history.append(pk)
        ratios.append((Tk, pk.ratio))
    return ContractionSearch(T0, ratios, history)
