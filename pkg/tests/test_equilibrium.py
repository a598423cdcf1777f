import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsg_doa.equilibrium import (
    Equilibrium,
    Kind,
    VpccMode,
    classify,
    companion_eigenvalues,
    eigen_residual,
    find_equilibria,
    jacobian_at,
    operating_pair,
    stable_eigenvector,
    unstable_eigenvector,
)
from vsg_doa.model import (
    active_power,
    forward_rhs,
    PhaseState,
    paper_grid,
    paper_vsg,
    vpcc_of_delta,
)


def test_lossless_unloaded_equilibria(lossless_grid):
    p = paper_vsg().with_(droop_kq=0.0, p_ref=0.0)
    eqs = find_equilibria(p, lossless_grid)
    angles = [e.delta0 for e in eqs]
    assert angles == pytest.approx([-math.pi, 0.0, math.pi], abs=1e-9)
    assert [e.kind for e in eqs] == [Kind.UEP, Kind.SEP, Kind.UEP]


def test_table_equilibria(vsg, grid):
    eqs = find_equilibria(vsg, grid)
    assert [e.kind for e in eqs] == [Kind.SEP, Kind.UEP]
    sep, uep = eqs
    # hand estimate is about 0.65 rad; the bisection value is 0.6946
    assert sep.delta0 == pytest.approx(0.65, abs=0.05)
    assert sep.delta0 == pytest.approx(0.6946073, abs=1e-6)
    assert math.pi / 2 < uep.delta0 < math.pi


def test_no_equilibrium_at_half_voltage(vsg):
    assert find_equilibria(vsg, paper_grid(0.5)) == []


@pytest.mark.parametrize("sag", [1.0, 0.8, 0.6, 0.57])
def test_residuals_within_tolerance(vsg, sag):
    g = paper_grid(sag)
    for e in find_equilibria(vsg, g):
        assert abs(forward_rhs(vsg, g, PhaseState(e.delta0, 0.0))[1]) * vsg.inertia_2h < 1e-6 * vsg.p_ref


@settings(max_examples=30, deadline=None)
@given(sag=st.floats(0.3, 1.2), p_ref=st.floats(-5e4, 1.8e5))
def test_kinds_alternate(sag, p_ref):
    p = paper_vsg().with_(p_ref=p_ref)
    eqs = find_equilibria(p, paper_grid(sag), mode=VpccMode.DROOP)
    kinds = [e.kind for e in eqs if e.kind != Kind.DEGENERATE]
    for a, b in zip(kinds, kinds[1:]):
        assert a != b


@settings(max_examples=20, deadline=None)
@given(h=st.floats(0.5, 30.0), d=st.floats(0.0, 3000.0))
def test_equilibria_independent_of_inertia_and_damping(h, d):
    base = find_equilibria(paper_vsg(), paper_grid())
    other = find_equilibria(paper_vsg().with_(inertia_2h=2 * h, damping_d=d), paper_grid())
    assert [e.delta0 for e in other] == [e.delta0 for e in base]


def test_existence_threshold_between_half_and_six_tenths(vsg):
    lo, hi = 0.5, 0.6
    assert not find_equilibria(vsg, paper_grid(lo))
    assert find_equilibria(vsg, paper_grid(hi))
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        if find_equilibria(vsg, paper_grid(mid)):
            hi = mid
        else:
            lo = mid
    assert 0.5 < hi < 0.6
    for s in np.linspace(hi + 1e-3, 1.0, 8):
        assert find_equilibria(vsg, paper_grid(float(s)))


def test_modes_agree_on_angles(vsg, grid):
    a = find_equilibria(vsg, grid, mode=VpccMode.CONSTANT)
    b = find_equilibria(vsg, grid, mode=VpccMode.DROOP)
    assert [e.delta0 for e in a] == [e.delta0 for e in b]
    assert [e.vpcc_at for e in a] == [e.vpcc_at for e in b]


def test_droop_linearisation_finds_saddle_for_large_kq(grid):
    p = paper_vsg().with_(droop_kq=3e-3)
    eqs = find_equilibria(p, grid, mode=VpccMode.DROOP)
    assert [e.kind for e in eqs] == [Kind.SEP, Kind.UEP]


def test_jacobian_zero_stiffness_at_quarter_turn(lossless_grid):
    p = paper_vsg().with_(droop_kq=0.0)
    j = jacobian_at(p, lossless_grid, math.pi / 2)
    assert j[1, 0] == pytest.approx(0.0, abs=1e-9)


def test_jacobian_printed_form_for_lossless_grid(lossless_grid):
    p = paper_vsg()
    d0 = 0.4
    v = vpcc_of_delta(p, lossless_grid, d0)
    j = jacobian_at(p, lossless_grid, d0)
    expected = 3 * v * lossless_grid.xg * lossless_grid.vg * math.cos(d0) / (2 * p.inertia_2h * lossless_grid.z2)
    assert -j[1, 0] == pytest.approx(expected, rel=1e-12)
    assert j[1, 1] == -p.damping_d / p.inertia_2h


def _fd_jacobian(field, d0, h=1e-6):
    cols = []
    for dd, dw in ((h, 0.0), (0.0, h)):
        plus = np.array(field(d0 + dd, dw))
        minus = np.array(field(d0 - dd, -dw))
        cols.append((plus - minus) / (2 * h))
    return np.column_stack(cols)


def test_jacobian_matches_finite_difference_constant_vpcc(vsg, grid, pair):
    sep, _ = pair
    v = vpcc_of_delta(vsg, grid, sep.delta0)

    def frozen(d, w):
        pe = active_power(vsg, grid, d, v)
        return w, (vsg.p_ref - pe - vsg.damping_d * w) / vsg.inertia_2h

    fd = _fd_jacobian(frozen, sep.delta0)
    j = jacobian_at(vsg, grid, sep.delta0, VpccMode.CONSTANT)
    np.testing.assert_allclose(j, fd, rtol=1e-4, atol=1e-9)


@pytest.mark.parametrize("which", [0, 1])
def test_droop_jacobian_matches_finite_difference(vsg, grid, pair, which):
    e = pair[which]
    fd = _fd_jacobian(lambda d, w: forward_rhs(vsg, grid, PhaseState(d, w)), e.delta0)
    j = jacobian_at(vsg, grid, e.delta0, VpccMode.DROOP)
    np.testing.assert_allclose(j, fd, rtol=1e-4, atol=1e-9)


def test_zero_damping_gives_zero_trace_and_centre(grid):
    p = paper_vsg().with_(damping_d=0.0)
    sep = find_equilibria(p, grid)[0]
    j = jacobian_at(p, grid, sep.delta0)
    assert np.trace(j) == 0.0
    assert all(z.real == 0.0 and z.imag != 0.0 for z in sep.eigenvalues)


def test_sep_eigenvalues_complex_with_expected_decay(vsg, grid, pair):
    sep = find_equilibria(vsg, grid)[0]
    assert not sep.real_eigenvalues
    for z in sep.eigenvalues:
        assert z.real == pytest.approx(-vsg.damping_d / (2 * vsg.inertia_2h), rel=1e-12)
        assert z.real == pytest.approx(-16.2, abs=0.05)


def test_uep_is_a_saddle(vsg, grid):
    uep = find_equilibria(vsg, grid)[1]
    lam1, lam2 = uep.eigenvalues
    assert lam1.real > 0 > lam2.real
    assert lam1.imag == lam2.imag == 0.0


@settings(max_examples=200)
@given(k=st.floats(-1e5, 1e5).filter(lambda x: abs(x) > 1e-6), c=st.floats(0.0, 200.0))
def test_closed_form_eigenvalues_match_generic_solver(k, c):
    j = np.array([[0.0, 1.0], [-k, -c]])
    assert eigen_residual(j, companion_eigenvalues(j)) < 1e-10


def test_degenerate_when_stiffness_vanishes():
    cls = classify(np.array([[0.0, 1.0], [-1e-12, -32.4]]))
    assert cls.kind == Kind.DEGENERATE


def test_eigenvectors_satisfy_definition(vsg, grid, pair):
    _, uep = pair
    j = jacobian_at(vsg, grid, uep.delta0, VpccMode.DROOP)
    lam_u, lam_s = (z.real for z in companion_eigenvalues(j))
    for vec, lam in ((stable_eigenvector(j), lam_s), (unstable_eigenvector(j), lam_u)):
        np.testing.assert_allclose(j @ np.array(vec), lam * np.array(vec), rtol=1e-10, atol=1e-8)
    with pytest.raises(ValueError):
        stable_eigenvector(jacobian_at(vsg, grid, pair[0].delta0))


def test_operating_pair_uses_periodicity():
    p = paper_vsg()
    g = paper_grid()
    ref = find_equilibria(p, g)[1].delta0
    sep, uep = operating_pair(p, g, window=(-math.pi, 1.0))
    assert uep.delta0 == pytest.approx(ref, abs=1e-9)
    below = [e for e in find_equilibria(p, g, window=(-4.0, 1.0))]
    sep2, uep2 = operating_pair(p, g, equilibria=below)
    assert uep2.delta0 == pytest.approx(ref, abs=1e-9)
    assert uep2.delta0 > sep2.delta0


def test_shifted_equilibrium():
    e = Equilibrium(1.0, Kind.UEP, (1 + 0j, -1 + 0j), 300.0, True)
    assert e.shifted(1).delta0 == pytest.approx(1.0 + 2 * math.pi)


def test_empty_window_rejected(vsg, grid):
    with pytest.raises(ValueError):
        find_equilibria(vsg, grid, window=(1.0, 1.0))
