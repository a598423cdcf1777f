import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsg_doa.model import (
    GridParams,
    NonPositiveRoot,
    NoRealRoot,
    PhaseState,
    VsgParams,
    active_power,
    droop_voltage_reference,
    dvpcc_ddelta,
    electrical_power,
    electrical_power_array,
    forward_rhs,
    make_array_field,
    make_field,
    paper_grid,
    paper_vsg,
    reactive_power,
    reversed_rhs,
    vpcc_array,
    vpcc_closed_form,
    vpcc_of_delta,
)

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def quadratic_residual(p, g, delta, v):
    k = 1.5 * p.droop_kq / g.z2
    a = k * g.xg
    b = 1.0 - k * g.vg * (g.xg * math.cos(delta) + g.rg * math.sin(delta))
    c = -(p.v0 + p.droop_kq * p.q_ref)
    return abs(a * v * v + b * v + c) / (abs(c) + abs(b * v) + abs(a * v * v))


def test_droop_disabled_returns_v0_exactly(grid):
    p = paper_vsg().with_(droop_kq=0.0)
    for d in np.linspace(-math.pi, math.pi, 17):
        assert vpcc_of_delta(p, grid, float(d)) == 311.0


def test_table_vpcc_at_zero_angle():
    p = paper_vsg()
    g = GridParams(vg=311.0, rg=0.2, xg=0.9425)
    v = vpcc_of_delta(p, g, 0.0)
    assert abs(v - 311.0) < 5.0
    assert quadratic_residual(p, g, 0.0, v) < 1e-10


@given(delta=angles, kq=st.floats(1e-7, 1e-2))
def test_vpcc_satisfies_quadratic(delta, kq):
    p = paper_vsg().with_(droop_kq=kq)
    g = paper_grid()
    v = vpcc_of_delta(p, g, delta)
    assert v > 0
    assert quadratic_residual(p, g, delta, v) < 1e-10


@given(delta=angles)
def test_vpcc_is_the_droop_fixed_point(delta):
    # V_PCC equals the droop reference produced by its own reactive power
    p, g = paper_vsg(), paper_grid()
    v = vpcc_of_delta(p, g, delta)
    q = reactive_power(p, g, delta, v)
    assert droop_voltage_reference(p, q) == pytest.approx(v, rel=1e-10)


def test_droop_slope_per_var_matches_kq():
    p = paper_vsg()
    v_lo = droop_voltage_reference(p, 0.0)
    v_hi = droop_voltage_reference(p, 1.0)
    assert v_lo - v_hi == pytest.approx(p.droop_kq, rel=1e-9)


def test_closed_form_matches_stable_solve_over_full_circle():
    p, g = paper_vsg(), paper_grid()
    worst = max(abs(vpcc_closed_form(p, g, d) / vpcc_of_delta(p, g, d) - 1.0)
                for d in np.linspace(-math.pi, math.pi, 2001))
    assert worst < 1e-8


@settings(max_examples=50)
@given(delta=angles, kq=st.floats(1e-5, 1e-2))
def test_closed_form_equivalence_property(delta, kq):
    p = paper_vsg().with_(droop_kq=kq)
    g = paper_grid()
    assert vpcc_closed_form(p, g, delta) == pytest.approx(vpcc_of_delta(p, g, delta), rel=1e-8)


def test_negative_discriminant_raises():
    p = paper_vsg().with_(q_ref=-1e7)
    with pytest.raises(NoRealRoot):
        vpcc_of_delta(p, paper_grid(), 0.0)


def test_both_roots_negative_raises():
    p = paper_vsg().with_(q_ref=-2e6)
    with pytest.raises(NonPositiveRoot):
        vpcc_of_delta(p, paper_grid(), math.pi)


def test_active_power_examples(vsg, lossless_grid):
    assert active_power(vsg, lossless_grid, 0.0, 311.0) == 0.0
    v = 311.0
    assert active_power(vsg, lossless_grid, math.pi / 2, v) == pytest.approx(1.5 * v * v / 0.9425, rel=1e-12)


def test_reactive_power_examples(vsg, lossless_grid):
    assert reactive_power(vsg, lossless_grid, 0.0, 311.0) == 0.0
    assert reactive_power(vsg, lossless_grid, math.pi / 2, 311.0) == pytest.approx(1.5 * 311.0 ** 2 / 0.9425)


def test_power_balance_at_sep(vsg, grid, pair):
    sep, _ = pair
    assert electrical_power(vsg, grid, sep.delta0) == pytest.approx(1e5, rel=1e-6)


def test_constant_voltage_model_when_droop_disabled(grid):
    p = paper_vsg().with_(droop_kq=0.0)
    for d in np.linspace(-3, 3, 13):
        d = float(d)
        v = p.v0
        expected = 1.5 * v / grid.z2 * (grid.rg * (v - grid.vg * math.cos(d)) + grid.xg * grid.vg * math.sin(d))
        assert electrical_power(p, grid, d) == expected


@given(delta=st.floats(-3.0, 3.0))
def test_dvpcc_matches_central_difference(delta):
    p, g = paper_vsg(), paper_grid()
    h = 1e-6
    fd = (vpcc_of_delta(p, g, delta + h) - vpcc_of_delta(p, g, delta - h)) / (2 * h)
    assert dvpcc_ddelta(p, g, delta) == pytest.approx(fd, rel=1e-5, abs=1e-6)


@given(delta=st.floats(-7.0, 7.0), domega=st.floats(-200.0, 200.0))
def test_fast_field_is_bit_identical(delta, domega):
    p, g = paper_vsg(), paper_grid()
    s = PhaseState(delta, domega)
    assert make_field(p, g)(delta, domega) == forward_rhs(p, g, s)
    assert make_field(p, g, reverse=True)(delta, domega) == reversed_rhs(p, g, s)


def test_array_field_matches_scalar(vsg, grid):
    d = np.linspace(-6, 6, 101)
    w = np.linspace(-100, 100, 101)
    fd, fw = make_array_field(vsg, grid)(d, w)
    scalar = np.array([forward_rhs(vsg, grid, PhaseState(a, b)) for a, b in zip(d, w)])
    np.testing.assert_allclose(fd, scalar[:, 0], rtol=0, atol=0)
    np.testing.assert_allclose(fw, scalar[:, 1], rtol=1e-12, atol=1e-9)
    rd, rw = make_array_field(vsg, grid, reverse=True)(d, w)
    np.testing.assert_array_equal(rd, -fd)
    np.testing.assert_array_equal(rw, -fw)


def test_vectorised_vpcc_matches_scalar(vsg, grid):
    d = np.linspace(-math.pi, math.pi, 257)
    np.testing.assert_allclose(vpcc_array(vsg, grid, d), [vpcc_of_delta(vsg, grid, x) for x in d], rtol=1e-14)
    np.testing.assert_allclose(electrical_power_array(vsg, grid, d),
                               [electrical_power(vsg, grid, x) for x in d], rtol=1e-12, atol=1e-6)


@pytest.mark.parametrize("field,value", [("inertia_2h", 0.0), ("damping_d", -1.0), ("droop_kq", -1e-4),
                                         ("v0", 0.0), ("omega0", -1.0)])
def test_vsg_invariants(field, value):
    with pytest.raises(ValueError, match=field):
        paper_vsg().with_(**{field: value})


@pytest.mark.parametrize("field,value", [("vg", -1.0), ("rg", -0.1), ("xg", 0.0)])
def test_grid_invariants(field, value):
    with pytest.raises(ValueError, match=field):
        paper_grid().with_(**{field: value})


def test_phase_state_rejects_non_finite():
    with pytest.raises(ValueError):
        PhaseState(float("nan"), 0.0)


def test_paper_grid_amplitude_and_sag():
    g = paper_grid(0.57)
    assert g.vg == pytest.approx(0.57 * 220 * math.sqrt(2))
    assert g.xg == pytest.approx(2 * math.pi * 50 * 3e-3)
    assert paper_grid().scaled(0.5).vg == pytest.approx(paper_grid(0.5).vg)


def test_inertia_property():
    assert paper_vsg().inertia_h == pytest.approx(7.85)
    assert isinstance(paper_vsg(), VsgParams)
