"""Acceptance criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL`` line (also repeated in the
terminal summary).  Runtime is about two minutes on one core.
"""
import time

import numpy as np
import pytest

from stefanbake import config as cfg
from stefanbake.cli import execute, sweep
from stefanbake.front import FRONT_HIT_ZERO, REACHED_HORIZON, CouplingConfig, find_contraction_horizon, run
from stefanbake.verify import (
    PASS,
    Tolerances,
    certify_result,
    compare_with_neumann,
    mms_convergence,
    neumann_oracle_for,
    random_admissible_setup,
)

RESULTS = {}

CERT = cfg.load("configs/certification.toml")
TOL = Tolerances.from_dict(CERT["tolerances"])
BATTERY = CERT["battery"]


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def battery():
    conf = CouplingConfig(n_l=BATTERY["nodes"], n_a=BATTERY["nodes"], dt=BATTERY["dt"])
    out = []
    for seed in range(BATTERY["seeds"]):
        setup = random_admissible_setup(seed, horizon=BATTERY["horizon"])
        res = run(setup, conf)
        out.append((seed, res, certify_result(res, setup, TOL)))
    return out


def _battery_check(battery, names):
    failures = []
    worst = {n: 0.0 for n in names}
    for seed, res, cert in battery:
        for n in names:
            c = cert[n]
            if c.status != PASS:
                failures.append(f"seed {seed} {n} {c.status} ({c.residual:.3e} > {c.tolerance:.3e})")
            elif c.tolerance > 0:
                worst[n] = max(worst[n], c.residual / c.tolerance)
    return failures, worst


def test_criterion_01_neumann_oracle():
    rc = cfg.build(cfg.load("configs/classical_stefan.toml"))
    assert rc.coupling.n_l >= 800 and rc.coupling.n_a >= 800 and rc.coupling.dt <= 1e-5
    t0 = time.perf_counter()
    res = run(rc.setup, rc.coupling)
    wall = time.perf_counter() - t0
    cmp = compare_with_neumann(res.series, neumann_oracle_for(rc.setup), e_min=0.2, tolerance=0.01)
    ok = cmp.passed and wall <= 60.0 and res.report.classification == REACHED_HORIZON
    report(1, ok, f"max rel front error {cmp.max_rel_error:.2e} (crust {cmp.max_rel_thickness_error:.2e}), "
                  f"{res.report.steps} steps in {wall:.1f} s")


def test_criterion_02_convergence_orders():
    space = [(11, 0.2 / 50), (21, 0.2 / 200), (41, 0.2 / 800)]
    times = [(201, 0.04), (201, 0.02), (201, 0.01)]
    t0 = time.perf_counter()
    lines, ok = [], True
    for kind in ("heat", "moisture"):
        for moving in (False, True):
            rep = mms_convergence(kind, space, times, horizon=0.2, moving=moving)
            good = rep.monotone and abs(rep.space_order - 2.0) <= 0.3 and abs(rep.time_order - 1.0) <= 0.3
            ok &= good
            lines.append(f"{kind}{'/moving' if moving else ''} ({rep.space_order:.2f}, {rep.time_order:.2f})")
    wall = time.perf_counter() - t0
    ok &= wall <= 300.0
    report(2, ok, "orders (space, time): " + ", ".join(lines) + f"; {wall:.1f} s")


def test_criterion_03_sign(battery):
    failures, worst = _battery_check(battery, ["sign"])
    report(3, not failures, f"{len(battery)} setups, worst residual/tol {worst['sign']:.2e}; failures: {failures or 0}")


def test_criterion_04_comparison(battery):
    failures, worst = _battery_check(battery, ["comparison"])
    report(4, not failures, f"{len(battery)} setups, worst residual/tol {worst['comparison']:.2e}; failures: {failures or 0}")


def test_criterion_05_moisture_floor(battery):
    failures, worst = _battery_check(battery, ["moisture_floor"])
    report(5, not failures, f"{len(battery)} setups, worst dip/tol {worst['moisture_floor']:.2e}; failures: {failures or 0}")


def test_criterion_06_balance(battery):
    failures, worst = _battery_check(battery, ["mass_balance", "enthalpy_balance"])
    drift = max(abs(r.ledger.cumulative_mass_drift) for _, r, _ in battery)
    report(6, not failures,
           f"C_mass={TOL.mass_constant:g}, C_enthalpy={TOL.enthalpy_constant:g}; worst residual/bound "
           f"mass {worst['mass_balance']:.2e}, enthalpy {worst['enthalpy_balance']:.2e}; max mass drift {drift:.1e}; "
           f"failures: {failures or 0}")


def test_criterion_07_energy_and_regularity(battery):
    failures, worst = _battery_check(battery, ["energy_monotone", "front_regularity"])
    report(7, not failures, f"{len(battery)} setups; failures: {failures or 0}")


def _transition(rows):
    labels = [r["classification"] for r in rows]
    if not all(c in (REACHED_HORIZON, FRONT_HIT_ZERO) for c in labels):
        return None
    k = labels.index(FRONT_HIT_ZERO) if FRONT_HIT_ZERO in labels else len(labels)
    if any(c != REACHED_HORIZON for c in labels[:k]) or any(c != FRONT_HIT_ZERO for c in labels[k:]):
        return None  # not monotone
    return k


def test_criterion_08_trichotomy_sweep(tmp_path):
    template = cfg.load("configs/baking.toml")
    axis = [("oven.temperature", [float(v) for v in np.linspace(1.0, 4.0, 13)])]
    coarse = sweep(template, axis, tmp_path / "coarse", jobs=1)
    fine_template = template
    for key, value in (("solver.n_l", 4 * 80 + 1), ("solver.n_a", 4 * 80 + 1),
                       ("solver.dt", template["solver"]["dt"] / 4)):
        fine_template = cfg.set_path(fine_template, key, value)
    fine = sweep(fine_template, axis, tmp_path / "fine", jobs=1)
    kc, kf = _transition(coarse), _transition(fine)
    values = axis[0][1]
    ok = kc is not None and kf is not None and 0 < kc < len(values) and abs(kc - kf) <= 1
    detail = "non-monotone classification" if kc is None or kf is None else (
        f"coarse transition between u_b={values[kc - 1]:g} and {values[kc]:g}, "
        f"4x-fine between {values[kf - 1]:g} and {values[kf]:g}")
    report(8, ok, detail)


def test_criterion_09_contraction_probe():
    rc = cfg.build(cfg.load("configs/contraction.toml"))
    search = find_contraction_horizon(rc.setup, rc.setup.horizon, rc.coupling, steps=32)
    ratios = [r for _, r in search.ratios]
    ok = ratios[0] < 1.0 and ratios[0] > ratios[1] > ratios[2]
    report(9, ok, f"T0={search.horizon:.6g}; ratios at T0, T0/2, T0/4: " + ", ".join(f"{r:.4f}" for r in ratios))


def test_criterion_10_determinism(tmp_path):
    data = cfg.load("configs/baking.toml")
    execute(data, tmp_path / "a")
    execute(data, tmp_path / "b")
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("series.csv", "config.toml"))
    report(10, same, "series.csv and config.toml byte-identical across two runs")
