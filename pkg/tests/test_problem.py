import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stefanbake.errors import DomainError, MalformedInputError
from stefanbake.problem import (
    InitialData,
    OvenSchedule,
    PhysicalParams,
    SorptionFunction,
    boundary_heat_flux,
    boundary_moisture_flux,
    compatible_profile,
    long_time_hypotheses,
    validate_setup,
)

from conftest import make_setup


# boundary heat flux: closed-form values

def test_heat_flux_vanishes_at_equilibrium():
    p = PhysicalParams(h=1.3, sigma=0.2, theta_c=0.7)
    oven = OvenSchedule.constant_at(2.0)
    assert boundary_heat_flux(0.0, 2.0 - 0.7, oven, p) == pytest.approx(0.0, abs=1e-14)


def test_heat_flux_linear_robin():
    p = PhysicalParams(h=1.0, sigma=0.0, theta_c=0.0)
    assert boundary_heat_flux(0.0, 5.0, OvenSchedule.constant_at(2.0), p) == pytest.approx(3.0)


def test_heat_flux_pure_radiation():
    p = PhysicalParams(h=0.0, sigma=1.0, theta_c=0.0)
    assert boundary_heat_flux(0.0, 1.0, OvenSchedule.constant_at(1.0), p) == pytest.approx(0.0)
    assert boundary_heat_flux(0.0, 2.0, OvenSchedule.constant_at(1.0), p) == pytest.approx(15.0)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_heat_flux_increasing(r1, r2):
    p = PhysicalParams(h=0.5, sigma=0.1)
    oven = OvenSchedule.constant_at(1.5)
    g1, g2 = boundary_heat_flux(0.0, r1, oven, p), boundary_heat_flux(0.0, r2, oven, p)
    if r2 - r1 > 1e-9:
        assert g1 < g2
    elif r1 <= r2:
        assert g1 <= g2


def test_moisture_flux_balanced_when_coefficients_equal():
    setup = make_setup(ub=1.5, sorption=SorptionFunction.from_pairs([(1.0, 0.0), (2.0, 0.8)], cap=1.0))
    # shifted convention: argument r + theta_c equals u_b
    assert boundary_moisture_flux(0.0, 0.5, setup) == pytest.approx(0.0, abs=1e-15)


def test_moisture_flux_literal_convention():
    sorp = SorptionFunction.from_pairs([(0.0, 0.0), (2.0, 1.0)], cap=1.0)
    setup = make_setup(ub=1.5, sorption=sorp, sorption_convention="literal")
    b1, b2 = setup.params.b1, setup.params.b2
    assert boundary_moisture_flux(0.0, 0.5, setup) == pytest.approx(b1 * 0.25 - b2 * 0.75)


# sorption function

def test_sorption_constant_extension():
    p = SorptionFunction.from_pairs([(1.0, 0.2), (2.0, 0.6)], cap=1.0)
    assert p(-5.0) == pytest.approx(0.2)
    assert p(10.0) == pytest.approx(0.6)
    assert p(1.5) == pytest.approx(0.4)


@settings(max_examples=60)
@given(st.floats(-1.0, 4.0))
def test_smoothed_sorption_stays_in_bounds_and_is_c1(r):
    p = SorptionFunction.from_pairs([(0.0, 0.1), (1.0, 0.5), (2.0, 0.6)], cap=1.0, smoothing_halfwidth=0.2)
    v = p(r)
    assert 0.1 - 1e-12 <= v <= 0.6 + 1e-12
    h = 1e-6
    slope = (p(r + h) - p(r - h)) / (2 * h)
    assert -1e-6 <= slope <= 0.4 + 1e-6


def test_smoothed_sorption_matches_outside_windows():
    raw = SorptionFunction.from_pairs([(0.0, 0.1), (1.0, 0.5)], cap=1.0)
    smooth = SorptionFunction.from_pairs([(0.0, 0.1), (1.0, 0.5)], cap=1.0, smoothing_halfwidth=0.1)
    for r in (-1.0, 0.5, 2.0):
        assert smooth(r) == pytest.approx(raw(r))


@pytest.mark.parametrize(
    "pairs",
    [[], [(1.0, 0.0), (0.5, 0.2)], [(0.0, float("nan"))]],
)
def test_sorption_malformed(pairs):
    with pytest.raises(MalformedInputError):
        SorptionFunction.from_pairs(pairs, cap=1.0)


# oven schedule

def test_oven_clamps_and_interpolates():
    oven = OvenSchedule((0.0, 1.0), (1.0, 3.0))
    assert oven(-1.0) == 1.0
    assert oven(0.5) == pytest.approx(2.0)
    assert oven(5.0) == 3.0
    assert not oven.constant


def test_oven_rejects_unsorted_times():
    with pytest.raises(MalformedInputError):
        OvenSchedule((0.0, 0.0), (1.0, 2.0))


# physical parameters

@pytest.mark.parametrize("field", ["c_l", "k_a", "d_l", "latent"])
def test_params_must_be_positive(field):
    with pytest.raises(MalformedInputError):
        PhysicalParams(**{field: 0.0})


def test_params_need_some_heat_transfer():
    with pytest.raises(MalformedInputError):
        PhysicalParams(h=0.0, sigma=0.0)


def test_sorption_order_flag():
    assert PhysicalParams(b1=0.5, b2=1.0).sorption_ordered
    assert not PhysicalParams(b1=2.0, b2=1.0).sorption_ordered


# validation

def test_trivial_setup_passes_everything(equilibrium_setup):
    rep = validate_setup(equilibrium_setup, 1e-8)
    assert rep.runnable
    assert [c.name for c in rep.checks] == ["A1", "A2", "A3", "A4", "A5"]


def test_zero_front_moisture_fails_a3():
    e0 = 0.5
    setup = make_setup(e0=e0, u_fn=lambda x: np.zeros_like(x), w_fn=lambda x: np.abs(x - e0))
    rep = validate_setup(setup, 1e-8)
    assert not rep["A3"].passed
    assert rep["A3"].location is not None
    assert not rep.runnable


def test_slope_at_origin_fails_a5():
    # sign pattern holds, but u0'(0) != 0
    setup = make_setup(u_fn=lambda x: x - 0.5, ub=1.0)
    rep = validate_setup(setup, 1e-8)
    assert rep["A2"].passed
    assert not rep["A5"].passed
    assert "x=0" in rep["A5"].message or "u0x(0)" in rep["A5"].message


def test_wrong_sign_fails_a2():
    setup = make_setup(u_fn=lambda x: np.full_like(x, 0.1))
    assert not validate_setup(setup, 1e-8)["A2"].passed


def test_cold_oven_fails_a4():
    setup = make_setup(ub=0.5)
    assert not validate_setup(setup, 1e-8)["A4"].passed


def test_sorption_slope_above_cap_fails_a1():
    sorp = SorptionFunction.from_pairs([(0.0, 0.0), (0.1, 0.5)], cap=1.0)
    setup = make_setup(sorption=sorp)
    assert not validate_setup(setup, 1e-8)["A1"].passed


def test_validation_tolerance_must_be_positive(equilibrium_setup):
    with pytest.raises(MalformedInputError):
        validate_setup(equilibrium_setup, 0.0)


def test_unordered_sorption_is_noted_not_failed():
    setup = make_setup(params=PhysicalParams(b1=2.0, b2=1.0))
    rep = validate_setup(setup, 1e-8)
    assert rep.runnable
    assert any("b1 > b2" in n for n in rep.notes)


def test_initial_data_rejects_short_grids():
    with pytest.raises(MalformedInputError):
        InitialData(0.5, np.zeros(2), np.ones(2))


@pytest.mark.parametrize("ub,frac", [(1.5, 0.9), (2.0, 0.7), (1.2, 0.95)])
def test_compatible_profile_passes_validation(ub, frac):
    params = PhysicalParams(h=2.0, sigma=0.05)
    u_fn = compatible_profile(params, ub, 0.4, 0.3, frac)
    setup = make_setup(e0=0.4, u_fn=u_fn, ub=ub, params=params, n=2001)
    assert validate_setup(setup).runnable


def test_compatible_profile_rejects_sign_change():
    params = PhysicalParams(h=50.0)
    with pytest.raises(DomainError):
        compatible_profile(params, 2.0, 0.4, 0.0, 0.1)


def test_long_time_hypotheses():
    hyp = long_time_hypotheses(make_setup(ub=1.5, params=PhysicalParams(b1=0.5, b2=1.0)))
    assert hyp.comparison and hyp.moisture_floor
    hyp = long_time_hypotheses(make_setup(ub=OvenSchedule((0.0, 1.0), (1.0, 2.0))))
    assert not hyp.oven_constant and not hyp.comparison


def test_front_moisture_threshold_default():
    setup = make_setup(w_fn=lambda x: 0.5 + 0.5 * x)
    assert setup.front_moisture_threshold == pytest.approx(1e-3 * 0.5)
