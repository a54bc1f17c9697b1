import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stefanbake.errors import DomainError
from stefanbake.heat import HeatStepInput, heat_step
from stefanbake.landau import (
    CRUMB,
    CRUST,
    FieldOnGrid,
    LandauGrid,
    from_reference,
    jacobian,
    mesh_velocity,
    one_sided_gradients,
    sample_initial_fields,
    to_reference,
    transformed_coefficients,
)
from stefanbake.problem import OvenSchedule, PhysicalParams
from stefanbake.verify import frozen_front_reference

from conftest import make_setup


@pytest.mark.parametrize("x,e,y", [(0.0, 0.3, 0.0), (0.3, 0.3, 1.0), (1.0, 0.3, 2.0)])
def test_to_reference_fixed_points(x, e, y):
    assert to_reference(x, e) == pytest.approx(y)


@pytest.mark.parametrize("y,e,x", [(1.0, 0.7, 0.7), (0.5, 0.4, 0.2), (1.5, 0.4, 0.7)])
def test_from_reference_values(y, e, x):
    assert from_reference(y, e) == pytest.approx(x)


@settings(max_examples=300)
@given(st.floats(0.0, 2.0), st.floats(1e-3, 0.8))
def test_round_trip_within_ulps(y, e):
    back = to_reference(from_reference(y, e), e)
    assert abs(back - y) <= 4 * np.spacing(max(abs(y), 1.0))


@settings(max_examples=300)
@given(st.floats(1.0, 2.0), st.floats(0.8, 1 - 1e-3))
def test_round_trip_thin_crust_limited_by_conditioning(y, e):
    # half an ulp of x is amplified by 1/(1-e) in the crust coordinate
    back = to_reference(from_reference(y, e), e)
    assert abs(back - y) <= 4 * np.spacing(1.0) / (1.0 - e)


@given(st.floats(1e-3, 1 - 1e-3))
def test_map_is_increasing(e):
    y = np.linspace(0, 2, 101)
    assert np.all(np.diff(from_reference(y, e)) > 0)


@pytest.mark.parametrize("e", [0.0, 1.0, -0.1, 1.5])
def test_front_outside_interval_rejected(e):
    with pytest.raises(DomainError):
        to_reference(0.5, e)
    with pytest.raises(DomainError):
        from_reference(0.5, e)


def test_grid_layout():
    g = LandauGrid(5, 9)
    assert g.n_nodes == 13
    assert g.shared == 4
    assert g.dy_l == pytest.approx(0.25) and g.dy_a == pytest.approx(0.125)
    assert g.y[g.shared] == 1.0
    with pytest.raises(DomainError):
        LandauGrid(2, 5)


def test_physical_weights_integrate_linear_exactly():
    g = LandauGrid(11, 7)
    e = 0.37
    x = g.x(e)
    assert g.physical_weights(e).sum() == pytest.approx(1.0)
    assert g.physical_weights(e) @ x == pytest.approx(0.5)


def test_field_length_checked():
    with pytest.raises(DomainError):
        FieldOnGrid(LandauGrid(3, 3), np.zeros(4))


# transformed coefficients

def test_stationary_front_has_no_advection():
    p = PhysicalParams()
    for phase in (CRUMB, CRUST):
        assert transformed_coefficients(phase, 0.4, 0.0, p)[1] == 0.0


def test_crumb_origin_has_no_advection():
    assert transformed_coefficients(CRUMB, 0.4, 3.0, PhysicalParams(), y=0.0)[1] == 0.0


def test_crumb_reference_values():
    p = PhysicalParams(k_l=2.0, c_l=3.0)
    diff, adv = transformed_coefficients(CRUMB, 0.5, 0.1, p, y=1.0)
    assert adv == pytest.approx(0.2)
    assert diff == pytest.approx(4 * 2.0 / 3.0)


@settings(max_examples=50)
@given(st.floats(0.1, 0.9), st.floats(-2.0, 2.0), st.floats(0.0, 1.0))
def test_coefficients_match_chain_rule(e, ep, s):
    """ubar(t, y) = U(t, x(y, t)) for U solving c U_t = k U_xx must satisfy the transformed equation."""
    p = PhysicalParams(k_l=0.7, c_l=1.3, k_a=1.9, c_a=0.6)
    for phase, y in ((CRUMB, s), (CRUST, 1.0 + s)):
        k, c = (p.k_l, p.c_l) if phase == CRUMB else (p.k_a, p.c_a)
        a = 1.7
        alpha = k / c
        # heat-equation solution: exp(-alpha a^2 t) cos(a x)
        U = lambda t, x: np.exp(-alpha * a * a * t) * np.cos(a * x)  # noqa: E731
        xdot = float(mesh_velocity(phase, y, ep))
        x = float(from_reference(y, e))
        J = jacobian(phase, e)
        ubar_t = -alpha * a * a * U(0, x) + xdot * (-a * np.exp(0) * np.sin(a * x))
        ubar_y = J * (-a * np.sin(a * x))
        ubar_yy = J * J * (-a * a * np.cos(a * x))
        diff, adv = transformed_coefficients(phase, e, ep, p, y=y)
        assert ubar_t == pytest.approx(diff * ubar_yy + adv * ubar_y, abs=1e-12)


def test_mesh_velocity_vanishes_at_fixed_ends():
    assert mesh_velocity(CRUMB, 0.0, 1.3) == 0.0
    assert mesh_velocity(CRUST, 2.0, 1.3) == 0.0
    assert mesh_velocity(CRUMB, 1.0, 1.3) == pytest.approx(mesh_velocity(CRUST, 1.0, 1.3))


# one-sided gradients

def test_gradients_of_zero_field():
    g = LandauGrid(5, 5)
    assert one_sided_gradients(FieldOnGrid(g, np.zeros(g.n_nodes)), 0.5) == (0.0, 0.0)


def test_gradients_of_linear_field():
    g = LandauGrid(6, 8)
    f = FieldOnGrid(g, g.y - 1.0)
    left, right = one_sided_gradients(f, 0.5)
    assert left == pytest.approx(2.0) and right == pytest.approx(2.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 0.9))
def test_gradients_exact_on_quadratics(a, b, e):
    g = LandauGrid(7, 5)
    y = g.y
    f = FieldOnGrid(g, np.where(y <= 1, a * (y - 1) + (y - 1) ** 2, b * (y - 1) - (y - 1) ** 2))
    left, right = one_sided_gradients(f, e)
    assert left == pytest.approx(a / e, abs=1e-9)
    assert right == pytest.approx(b / (1 - e), abs=1e-9)


def test_gradients_need_grid_for_arrays():
    with pytest.raises(ValueError):
        one_sided_gradients(np.zeros(5), 0.5)


# oracle equivalence with a physical-grid solver (frozen front)

@pytest.mark.parametrize("e,n_l,n_a", [(0.5, 11, 11), (0.5, 41, 41), (0.25, 11, 31)])
def test_landau_scheme_matches_physical_grid_solver(e, n_l, n_a):
    """With the front frozen on a node both discretisations solve the same linear systems."""
    params = PhysicalParams(c_l=1.2, c_a=0.8, k_l=0.9, k_a=1.5, h=2.0, sigma=0.05)
    u_fn = lambda x: np.where(  # noqa: E731
        x < e, -0.3 * np.cos(np.pi * x) * (e - x) / e, 0.6 * np.sin(np.pi * (x - e) / (2 * (1 - e)))
    )
    setup = make_setup(e0=e, u_fn=u_fn, ub=1.8, params=params, n=4001)
    grid = LandauGrid(n_l, n_a)
    assert grid.dy_l * e == pytest.approx(grid.dy_a * (1 - e))
    u, _ = sample_initial_fields(setup.init, grid)
    f = FieldOnGrid(grid, u)
    dt, T = 1e-3, 0.05
    for k in range(1, int(round(T / dt)) + 1):
        f = heat_step(HeatStepInput(f, e, 0.0, k * dt, dt, params, setup.oven)).u
    x, ref = frozen_front_reference(setup, e, grid.n_nodes, dt, T)
    assert np.allclose(grid.x(e), x)
    assert np.max(np.abs(f.values - ref)) < 1e-10


def test_sample_initial_fields_pins_front(equilibrium_setup):
    g = LandauGrid(9, 9)
    u, w = sample_initial_fields(equilibrium_setup.init, g)
    assert u[g.shared] == 0.0
    assert np.allclose(w, 1.0)
