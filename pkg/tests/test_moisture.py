import numpy as np
import pytest

from stefanbake.landau import FieldOnGrid, LandauGrid
from stefanbake.moisture import (
    MoistureStepInput,
    certify_moisture_floor,
    front_moisture,
    moisture_step,
    total_mass,
)
from stefanbake.problem import OvenSchedule, PhysicalParams, SorptionFunction
from stefanbake.verify import MoistureMMS, PrescribedFront, mms_moisture_error

from conftest import make_setup


def _balanced_setup(**kw):
    # b1 = b2, theta_c = 0 and u(1) = u_b make the boundary flux vanish
    p = PhysicalParams(b1=0.7, b2=0.7, theta_c=0.0, d_l=0.3, d_a=0.05)
    return make_setup(params=p, ub=1.2, sorption=SorptionFunction.from_pairs([(0.5, 0.1), (2.0, 0.6)], 1.0), **kw)


@pytest.mark.parametrize("e_prime", [0.0, 0.8, -3.0])
def test_constant_field_preserved(e_prime):
    setup = _balanced_setup()
    g = LandauGrid(17, 23)
    w = FieldOnGrid(g, np.full(g.n_nodes, 0.37))
    e = 0.45
    for k in range(20):
        out = moisture_step(MoistureStepInput(w, e, e_prime, 1.2, (k + 1) * 1e-2, 1e-2, setup))
        assert out.boundary_flux == 0.0
        w = out.w
        e = e + 1e-2 * e_prime if 0.1 < e + 1e-2 * e_prime < 0.9 else e
    assert np.allclose(w.values, 0.37, rtol=0, atol=1e-14)


def test_mass_conserved_with_zero_flux():
    setup = _balanced_setup()
    g = LandauGrid(21, 21)
    e = 0.6
    w = FieldOnGrid(g, 1.0 + 0.4 * np.cos(3 * g.x(e)))
    dt = 5e-3
    for k in range(100):
        e_new = e - 0.2 * dt
        m0 = total_mass(w.values, g, e)
        w = moisture_step(MoistureStepInput(w, e_new, -0.2, 1.2, (k + 1) * dt, dt, setup)).w
        e = e_new
        assert abs(total_mass(w.values, g, e) - m0) < 1e-12


def test_mass_balance_with_boundary_flux():
    setup = _balanced_setup()
    g = LandauGrid(21, 21)
    e = 0.5
    w = FieldOnGrid(g, np.ones(g.n_nodes))
    dt = 1e-2
    q = 0.3
    out = moisture_step(MoistureStepInput(w, e, 0.0, 1.2, dt, dt, setup, flux_override=lambda t: q))
    # finite-volume scheme: mass changes by exactly -dt * q
    assert total_mass(out.w.values, g, e) - total_mass(w.values, g, e) == pytest.approx(-dt * q, abs=1e-14)
    assert out.boundary_flux == q


def test_front_value_and_minimum_reported():
    setup = _balanced_setup()
    g = LandauGrid(11, 11)
    w = FieldOnGrid(g, np.linspace(1.0, 2.0, g.n_nodes))
    out = moisture_step(MoistureStepInput(w, 0.5, 0.0, 1.2, 1e-3, 1e-3, setup))
    assert out.front_value == out.w.values[g.shared]
    assert out.minimum == np.min(out.w.values)


def test_insulated_field_relaxes_to_mass_average_across_front():
    """Water crosses the shared node, so both phases reach the same constant."""
    setup = _balanced_setup()
    g = LandauGrid(11, 11)
    e = 0.5
    x = g.x(e)
    w = FieldOnGrid(g, np.where(x <= e, 1.0, 1.0 + 4.0 * (x - e)))
    mass = total_mass(w.values, g, e)
    zero = lambda t: 0.0  # noqa: E731
    for k in range(2000):
        w = moisture_step(MoistureStepInput(w, e, 0.0, 1.2, (k + 1) * 0.5, 0.5, setup, flux_override=zero)).w
    assert np.allclose(w.values, mass, rtol=0, atol=1e-10)


def test_floor_certificate_examples():
    w0 = np.array([0.8, 0.5, 0.9])
    assert certify_moisture_floor(w0, floor=np.min(w0), tol=0.0).passed
    tol = 1e-6
    dipped = w0.copy()
    dipped[1] = 0.5 - 10 * tol
    cert = certify_moisture_floor(dipped, floor=0.5, tol=tol)
    assert not cert.passed and cert.index == 1


def test_floor_holds_when_b1_le_b2():
    p = PhysicalParams(b1=0.4, b2=1.0, theta_c=1.0, h=2.0, sigma=0.02)
    setup = make_setup(params=p, ub=2.0, sorption=SorptionFunction.from_pairs([(1.0, 0.1), (2.5, 0.6)], 1.0))
    g = LandauGrid(31, 31)
    e = 0.5
    w = FieldOnGrid(g, 1.0 + 0.3 * np.cos(2 * np.pi * g.x(e)))
    floor = float(np.min(w.values))
    dt = 1e-2
    # u(1) + theta_c <= u_b, so b1 p(u(1)+theta_c) <= b2 p(u_b) and the boundary injects water
    for k in range(200):
        e_new = e - 0.1 * dt
        out = moisture_step(MoistureStepInput(w, e_new, -0.1, 0.5, (k + 1) * dt, dt, setup))
        w, e = out.w, e_new
        assert out.boundary_flux <= 0
        assert certify_moisture_floor(w, floor, tol=0.0).passed


def test_front_moisture_monitor():
    g = LandauGrid(5, 5)
    fm = front_moisture(FieldOnGrid(g, np.ones(g.n_nodes)), threshold=1e-3)
    assert fm.value == 1.0 and not fm.flagged
    v = np.ones(g.n_nodes)
    v[g.shared] = 0.5e-3
    fm = front_moisture(v, threshold=1e-3, grid=g)
    assert fm.flagged and fm.value == 0.5e-3


def test_default_front_threshold_from_initial_moisture():
    setup = make_setup(w_fn=lambda x: 0.5 + x)
    assert setup.front_moisture_threshold == pytest.approx(0.5e-3, rel=1e-6)
    assert make_setup(delta_1=0.02).front_moisture_threshold == 0.02


def test_mms_error_decreases_with_refinement():
    p = PhysicalParams(d_l=0.3, d_a=0.1)
    setup = make_setup(params=p)
    mms = MoistureMMS(p, PrescribedFront(0.5, 0.15, 3.0))
    errs = [mms_moisture_error(mms, n, 0.2 / (2 * (n - 1) ** 2), 0.2, setup) for n in (11, 21, 41)]
    assert errs[0] > errs[1] > errs[2]
    assert np.log2(errs[1] / errs[2]) > 1.7
