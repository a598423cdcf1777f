"""Adaptive Simpson quadrature for the equal-area integrals."""

from __future__ import annotations

from typing import Callable

MAX_DEPTH = 50


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Integral of ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Reversed limits give the negated integral, as in ordinary calculus.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _refine(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)


def _refine(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        # Richardson correction
        return left + right + delta / 15.0
    return (_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))
