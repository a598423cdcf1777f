"""Equilibria of the power-angle dynamics and their linear classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import AnalysisError
from .model import (
    GridParams,
    VsgParams,
    dvpcc_ddelta,
    electrical_power,
    electrical_power_array,
    vpcc_of_delta,
)

SCAN_STEP = 1e-3
ROOT_XTOL = 1e-10
DEGENERATE_TOL = 1e-9


class NoEquilibrium(AnalysisError):
    """The grid state admits no equilibrium (P_ref never meets P_e)."""


class VpccMode(str, enum.Enum):
    # V_PCC frozen at its self-consistent value at the root
    CONSTANT = "constant"
    # V_PCC follows the droop loop as a function of delta
    DROOP = "droop"


class Kind(str, enum.Enum):
    SEP = "SEP"
    UEP = "UEP"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class Classification:
    kind: Kind
    eigenvalues: Tuple[complex, complex]
    real_eigenvalues: bool


@dataclass(frozen=True)
class Equilibrium:
    delta0: float
    kind: Kind
    eigenvalues: Tuple[complex, complex]
    vpcc_at: float
    real_eigenvalues: bool = False

    def shifted(self, turns: int) -> "Equilibrium":
        """Same equilibrium translated by ``turns`` full revolutions."""
        return Equilibrium(
            self.delta0 + 2.0 * math.pi * turns,
            self.kind,
            self.eigenvalues,
            self.vpcc_at,
            self.real_eigenvalues,
        )


def power_mismatch(p: VsgParams, g: GridParams, delta: float) -> float:
    return p.p_ref - electrical_power(p, g, delta)


def _bisect(f, lo: float, hi: float, flo: float, xtol: float = ROOT_XTOL) -> float:
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _residual_tol(p: VsgParams) -> float:
    return 1e-6 * abs(p.p_ref) if p.p_ref != 0.0 else 1e-3


def stiffness(p: VsgParams, g: GridParams, delta0: float, mode: VpccMode = VpccMode.CONSTANT) -> float:
    """dP_e/d(delta) at ``delta0``; partial at frozen V_PCC or total with the droop."""
    v = vpcc_of_delta(p, g, delta0)
    s, c = math.sin(delta0), math.cos(delta0)
    dpe = 1.5 * v / g.z2 * (g.rg * g.vg * s + g.xg * g.vg * c)
    if mode == VpccMode.DROOP:
        dpe_dv = 1.5 / g.z2 * (g.rg * (2.0 * v - g.vg * c) + g.xg * g.vg * s)
        dpe += dpe_dv * dvpcc_ddelta(p, g, delta0, v)
    return dpe


def jacobian_at(p: VsgParams, g: GridParams, delta0: float, mode: VpccMode = VpccMode.CONSTANT) -> np.ndarray:
    """Linearisation of the swing dynamics about ``(delta0, 0)``.

    Returns ``[[0, 1], [-k, -D/2H]]`` with ``k = dP_e/ddelta / 2H``.  In
    ``CONSTANT`` mode the derivative is taken with V_PCC frozen, which keeps the
    resistive ``R_g V_g sin`` contribution; for ``R_g = 0`` this reduces to the
    familiar ``3 V_PCC X_g V_g cos(delta0) / (4H |Z|^2)``.
    """
    k = stiffness(p, g, delta0, mode) / p.inertia_2h
    return np.array([[0.0, 1.0], [-k, -p.damping_d / p.inertia_2h]])


def companion_eigenvalues(j) -> Tuple[complex, complex]:
    """Closed-form eigenvalues of ``[[0, 1], [-k, -c]]``, larger real part first."""
    k = -float(j[1][0])
    c = -float(j[1][1])
    disc = c * c - 4.0 * k
    if disc >= 0.0:
        sq = math.sqrt(disc)
        if c == 0.0:
            lam1, lam2 = 0.5 * sq, -0.5 * sq
        else:
            # avoid cancellation: the larger-magnitude root first, the other via the product k
            big = -0.5 * (c + math.copysign(sq, c))
            small = k / big if big != 0.0 else 0.0
            lam1, lam2 = sorted((big, small), reverse=True)
        return complex(lam1), complex(lam2)
    im = 0.5 * math.sqrt(-disc)
    return complex(-0.5 * c, im), complex(-0.5 * c, -im)


def classify(j, stiffness_scale: float = 1.0) -> Classification:
    """Classify an equilibrium from its companion-form Jacobian.

    ``stiffness_scale`` sets the magnitude below which the restoring term is
    treated as zero (saddle-node coalescence).
    """
    k = -float(j[1][0])
    c = -float(j[1][1])
    eig = companion_eigenvalues(j)
    if abs(k) < DEGENERATE_TOL * stiffness_scale:
        kind = Kind.DEGENERATE
    elif k > 0.0:
        kind = Kind.SEP
    else:
        kind = Kind.UEP
    return Classification(kind, eig, c * c >= 4.0 * k)


def _stiffness_scale(p: VsgParams, g: GridParams, v: float) -> float:
    return 1.5 * v * g.vg * math.sqrt(g.z2) / g.z2 / p.inertia_2h


def make_equilibrium(p: VsgParams, g: GridParams, delta0: float, vpcc_at: float,
                     mode: VpccMode = VpccMode.CONSTANT) -> Equilibrium:
    j = jacobian_at(p, g, delta0, mode)
    cls = classify(j, _stiffness_scale(p, g, vpcc_at) if g.vg > 0 else 1.0)
    return Equilibrium(delta0, cls.kind, cls.eigenvalues, vpcc_at, cls.real_eigenvalues)


def find_equilibria(
    p: VsgParams,
    g: GridParams,
    window: Tuple[float, float] = (-math.pi, math.pi),
    mode: VpccMode = VpccMode.CONSTANT,
) -> List[Equilibrium]:
    """All equilibria ``(delta0, 0)`` with ``delta0`` in ``window``, sorted by angle.

    A uniform scan brackets sign changes of ``P_ref - P_e`` which are then
    bisected.  Returns an empty list when P_ref and P_e never meet.
    """
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"empty equilibrium window {window}")
    mode = VpccMode(mode)
    n = int(math.ceil((hi - lo) / SCAN_STEP)) + 1
    grid = np.linspace(lo, hi, n)
    f = p.p_ref - electrical_power_array(p, g, grid)
    tol = _residual_tol(p)

    def mismatch(d):
        return power_mismatch(p, g, d)

    roots: List[float] = []
    for i in (0, n - 1):
        if abs(f[i]) <= tol:
            roots.append(float(grid[i]))
    exact = np.nonzero(f[1:-1] == 0.0)[0] + 1
    roots.extend(float(grid[i]) for i in exact)
    brackets = np.nonzero(f[:-1] * f[1:] < 0.0)[0]
    for i in brackets:
        roots.append(_bisect(mismatch, float(grid[i]), float(grid[i + 1]), float(f[i])))

    roots.sort()
    unique: List[float] = []
    for r in roots:
        if not unique or r - unique[-1] > 1e-8:
            unique.append(r)

    out = []
    for d in unique:
        # a droop root is already self-consistent, so freezing V_PCC there
        # leaves the angle unchanged; only the linearisation depends on the mode
        v = vpcc_of_delta(p, g, d)
        if abs(mismatch(d)) > tol:
            continue
        out.append(make_equilibrium(p, g, d, v, mode))
    return out


def operating_pair(
    p: VsgParams,
    g: GridParams,
    window: Tuple[float, float] = (-math.pi, math.pi),
    mode: VpccMode = VpccMode.CONSTANT,
    equilibria: Optional[Sequence[Equilibrium]] = None,
) -> Tuple[Equilibrium, Equilibrium]:
    """The stable equilibrium and the saddle bounding it from above in angle.

    Uses 2*pi periodicity when the bounding saddle lies outside ``window``.
    Raises :class:`NoEquilibrium` when no SEP exists.
    """
    eqs = list(find_equilibria(p, g, window, mode) if equilibria is None else equilibria)
    seps = [e for e in eqs if e.kind == Kind.SEP]
    if not seps:
        raise NoEquilibrium("no stable equilibrium for this grid state")
    sep = seps[0]
    ueps = [e for e in eqs if e.kind == Kind.UEP]
    if not ueps and equilibria is None:
        # the bounding saddle may sit outside a narrow window
        span = (sep.delta0, sep.delta0 + 2.0 * math.pi)
        ueps = [e for e in find_equilibria(p, g, span, mode) if e.kind == Kind.UEP]
    if not ueps:
        raise NoEquilibrium("no unstable equilibrium bounds the stable one")
    above = [e for e in ueps if e.delta0 > sep.delta0]
    if above:
        return sep, above[0]
    below = [e for e in ueps if e.delta0 < sep.delta0]
    return sep, below[0].shifted(1)


def eigen_residual(j, eigenvalues: Sequence[complex]) -> float:
    """Largest relative mismatch between given eigenvalues and a generic solve."""
    ref = sorted(np.linalg.eigvals(np.asarray(j, dtype=float)), key=lambda z: (-z.real, -z.imag))
    got = sorted(eigenvalues, key=lambda z: (-z.real, -z.imag))
    scale = max(abs(z) for z in ref) or 1.0
    return max(abs(a - b) for a, b in zip(ref, got)) / scale


def stable_eigenvector(j) -> Tuple[float, float]:
    """Eigenvector of the negative real eigenvalue of a saddle Jacobian, ``(1, lambda_s)``."""
    lam = companion_eigenvalues(j)[1]
    if lam.imag != 0.0 or lam.real >= 0.0:
        raise ValueError("Jacobian is not a saddle")
    return 1.0, lam.real


def unstable_eigenvector(j) -> Tuple[float, float]:
    lam = companion_eigenvalues(j)[0]
    if lam.imag != 0.0 or lam.real <= 0.0:
        raise ValueError("Jacobian is not a saddle")
    return 1.0, lam.real

