import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from vsg_doa.quadrature import adaptive_simpson


def test_polynomial_exact():
    assert adaptive_simpson(lambda x: x ** 3 - 2 * x, 0.0, 2.0, 1e-12) == pytest.approx(0.0, abs=1e-12)


def test_sine():
    assert adaptive_simpson(math.sin, 0.0, math.pi, 1e-10) == pytest.approx(2.0, abs=1e-10)


def test_reversed_and_empty_limits():
    f = math.exp
    assert adaptive_simpson(f, 1.0, 0.0, 1e-10) == pytest.approx(-(math.e - 1.0), abs=1e-10)
    assert adaptive_simpson(f, 0.3, 0.3, 1e-10) == 0.0


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-3.0, 3.0), width=st.floats(0.01, 4.0), k=st.floats(0.5, 5.0))
def test_matches_reference(a, width, k):
    f = lambda x: k * math.sin(k * x) + math.cos(x) ** 2
    b = a + width
    ref, _ = quad(f, a, b, epsabs=1e-13)
    assert adaptive_simpson(f, a, b, 1e-9) == pytest.approx(ref, abs=1e-8)


def test_power_scale_tolerance(vsg, grid):
    from vsg_doa.model import electrical_power
    f = lambda d: vsg.p_ref - electrical_power(vsg, grid, d)
    tol = 1e-3 * vsg.p_ref
    ref, _ = quad(f, 0.0, 2.5, epsabs=1e-6)
    assert adaptive_simpson(f, 0.0, 2.5, tol) == pytest.approx(ref, abs=tol)
