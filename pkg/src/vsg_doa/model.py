"""Large-signal power-angle model of a grid-connected VSG.

All voltages are peak phase amplitudes, powers are in W / var, angles in rad
and frequency deviations in rad/s.  The swing equation is evaluated in SI with
the controller constants plugged in directly::

    inertia_2h * d2delta = p_ref - P_e(delta) - damping_d * ddelta

where P_e uses the PCC voltage obtained from the Q-V droop loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Tuple

import numpy as np

from .errors import AnalysisError

SQRT2 = math.sqrt(2.0)

Field = Callable[[float, float], Tuple[float, float]]


class NoRealRoot(AnalysisError):
    """The PCC-voltage quadratic has a negative discriminant."""


class NonPositiveRoot(AnalysisError):
    """Both roots of the PCC-voltage quadratic are non-positive."""


@dataclass(frozen=True)
class VsgParams:
    inertia_2h: float
    damping_d: float
    droop_kq: float
    p_ref: float
    q_ref: float
    v0: float
    omega0: float

    def __post_init__(self):
        if not self.inertia_2h > 0:
            raise ValueError(f"inertia_2h must be > 0, got {self.inertia_2h}")
        if not self.damping_d >= 0:
            raise ValueError(f"damping_d must be >= 0, got {self.damping_d}")
        if not self.droop_kq >= 0:
            raise ValueError(f"droop_kq must be >= 0, got {self.droop_kq}")
        if not self.v0 > 0:
            raise ValueError(f"v0 must be > 0, got {self.v0}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")

    @property
    def inertia_h(self) -> float:
        return self.inertia_2h / 2.0

    def with_(self, **changes) -> "VsgParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class GridParams:
    vg: float
    rg: float
    xg: float

    def __post_init__(self):
        if not self.vg >= 0:
            raise ValueError(f"vg must be >= 0, got {self.vg}")
        if not self.rg >= 0:
            raise ValueError(f"rg must be >= 0, got {self.rg}")
        if not self.xg > 0:
            raise ValueError(f"xg must be > 0, got {self.xg}")

    @property
    def z2(self) -> float:
        return self.rg * self.rg + self.xg * self.xg

    def scaled(self, factor: float) -> "GridParams":
        """Same impedance, grid voltage multiplied by ``factor`` (a sag in p.u.)."""
        return replace(self, vg=self.vg * factor)

    def with_(self, **changes) -> "GridParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PhaseState:
    delta: float
    domega: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.domega)):
            raise ValueError(f"non-finite phase state ({self.delta}, {self.domega})")

    def __iter__(self):
        yield self.delta
        yield self.domega


# Reference design values.
PAPER_VG_RMS = 220.0
PAPER_F0 = 50.0
PAPER_VN = 311.0
PAPER_D = 509.3
PAPER_H = 7.85
PAPER_KQ = 0.0003
PAPER_PREF = 100e3
PAPER_QREF = 0.0
PAPER_LG = 3e-3
PAPER_RG = 0.2


def paper_vsg() -> VsgParams:
    return VsgParams(
        inertia_2h=2.0 * PAPER_H,
        damping_d=PAPER_D,
        droop_kq=PAPER_KQ,
        p_ref=PAPER_PREF,
        q_ref=PAPER_QREF,
        v0=PAPER_VN,
        omega0=2.0 * math.pi * PAPER_F0,
    )


def paper_grid(sag: float = 1.0) -> GridParams:
    """Grid of the reference design with the voltage at ``sag`` p.u."""
    omega0 = 2.0 * math.pi * PAPER_F0
    return GridParams(vg=sag * PAPER_VG_RMS * SQRT2, rg=PAPER_RG, xg=omega0 * PAPER_LG)


def _quadratic(p: VsgParams, g: GridParams, cos_d: float, sin_d: float):
    # a*V^2 + b*V + c = 0 from substituting Q_e into the droop law
    z2 = g.z2
    k = 1.5 * p.droop_kq / z2
    a = k * g.xg
    b = 1.0 - k * g.vg * (g.xg * cos_d + g.rg * sin_d)
    c = -(p.v0 + p.droop_kq * p.q_ref)
    return a, b, c


def vpcc_of_delta(p: VsgParams, g: GridParams, delta: float) -> float:
    """PCC voltage amplitude consistent with the Q-V droop at angle ``delta``.

    Takes the larger root of the droop/reactive-power quadratic using the
    cancellation-free form of the quadratic formula.
    """
    if p.droop_kq == 0.0:
        return p.v0
    a, b, c = _quadratic(p, g, math.cos(delta), math.sin(delta))
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NoRealRoot(f"PCC voltage quadratic has no real root at delta={delta!r}")
    sq = math.sqrt(disc)
    if b >= 0.0:
        # larger root is -(b - sq)/2a = 2c / (-b - sq)
        denom = -b - sq
        root = 2.0 * c / denom if denom != 0.0 else 0.0
    else:
        root = (-b + sq) / (2.0 * a)
    if root <= 0.0:
        raise NonPositiveRoot(f"PCC voltage quadratic has no positive root at delta={delta!r}")
    return root


def vpcc_closed_form(p: VsgParams, g: GridParams, delta: float) -> float:
    """Textbook closed form of the positive PCC-voltage root.

    Ill-conditioned for small ``droop_kq``; kept as an independent cross-check
    of :func:`vpcc_of_delta`.
    """
    kq, xg, z2 = p.droop_kq, g.xg, g.z2
    m = 1.5 * kq * g.vg * (xg * math.cos(delta) + g.rg * math.sin(delta)) - z2
    rad = m * m + 6.0 * kq * xg * (p.v0 + kq * p.q_ref) * z2
    return (m + math.sqrt(rad)) / (3.0 * kq * xg)


def dvpcc_ddelta(p: VsgParams, g: GridParams, delta: float, vpcc: float | None = None) -> float:
    """Derivative of :func:`vpcc_of_delta` by implicit differentiation."""
    if p.droop_kq == 0.0:
        return 0.0
    if vpcc is None:
        vpcc = vpcc_of_delta(p, g, delta)
    a, b, _ = _quadratic(p, g, math.cos(delta), math.sin(delta))
    db = -1.5 * p.droop_kq * g.vg * (-g.xg * math.sin(delta) + g.rg * math.cos(delta)) / g.z2
    return -db * vpcc / (2.0 * a * vpcc + b)


def active_power(p: VsgParams, g: GridParams, delta: float, vpcc: float) -> float:
    return 1.5 * vpcc / g.z2 * (g.rg * (vpcc - g.vg * math.cos(delta)) + g.xg * g.vg * math.sin(delta))


def reactive_power(p: VsgParams, g: GridParams, delta: float, vpcc: float) -> float:
    return 1.5 * vpcc / g.z2 * (g.xg * (vpcc - g.vg * math.cos(delta)) - g.rg * g.vg * math.sin(delta))


def droop_voltage_reference(p: VsgParams, q_e: float) -> float:
    """Voltage magnitude reference produced by the Q-V droop loop."""
    return p.v0 + p.droop_kq * (p.q_ref - q_e)


def electrical_power(p: VsgParams, g: GridParams, delta: float) -> float:
    """P_e(delta) with the PCC voltage following the droop loop."""
    return active_power(p, g, delta, vpcc_of_delta(p, g, delta))


def vpcc_array(p: VsgParams, g: GridParams, delta: np.ndarray) -> np.ndarray:
    """Vectorised :func:`vpcc_of_delta` (same root selection)."""
    delta = np.asarray(delta, dtype=float)
    if p.droop_kq == 0.0:
        return np.full_like(delta, p.v0)
    a, b, c = _quadratic(p, g, np.cos(delta), np.sin(delta))
    disc = b * b - 4.0 * a * c
    if np.any(disc < 0.0):
        raise NoRealRoot("PCC voltage quadratic has no real root on part of the grid")
    sq = np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(b >= 0.0, 2.0 * c / (-b - sq), (-b + sq) / (2.0 * a))
    if np.any(~(root > 0.0)):
        raise NonPositiveRoot("PCC voltage quadratic has no positive root on part of the grid")
    return root


def electrical_power_array(p: VsgParams, g: GridParams, delta: np.ndarray, vpcc=None) -> np.ndarray:
    """Vectorised P_e; ``vpcc`` may be a frozen scalar, otherwise the droop root is used."""
    delta = np.asarray(delta, dtype=float)
    v = vpcc_array(p, g, delta) if vpcc is None else vpcc
    return 1.5 * v / g.z2 * (g.rg * (v - g.vg * np.cos(delta)) + g.xg * g.vg * np.sin(delta))


def forward_rhs(p: VsgParams, g: GridParams, s: PhaseState) -> Tuple[float, float]:
    pe = electrical_power(p, g, s.delta)
    return s.domega, (p.p_ref - pe - p.damping_d * s.domega) / p.inertia_2h


def reversed_rhs(p: VsgParams, g: GridParams, s: PhaseState) -> Tuple[float, float]:
    d_delta, d_domega = forward_rhs(p, g, s)
    return -d_delta, -d_domega


def make_field(p: VsgParams, g: GridParams, reverse: bool = False) -> Field:
    """Fast scalar vector field ``(delta, domega) -> (d_delta, d_domega)``.

    Bit-for-bit identical to :func:`forward_rhs` / :func:`reversed_rhs`; the
    constants are hoisted out of the inner loop for the integrator.
    """
    z2 = g.z2
    kq = p.droop_kq
    k = 1.5 * kq / z2
    a = k * g.xg
    two_a = 2.0 * a
    c = -(p.v0 + kq * p.q_ref)
    kvg = k * g.vg
    xg, rg, vg = g.xg, g.rg, g.vg
    p_ref, damp, two_h = p.p_ref, p.damping_d, p.inertia_2h
    v0 = p.v0
    sqrt, cos, sin = math.sqrt, math.cos, math.sin

    def vpcc(cd: float, sd: float) -> float:
        if kq == 0.0:
            return v0
        b = 1.0 - kvg * (xg * cd + rg * sd)
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            raise NoRealRoot("PCC voltage quadratic has no real root")
        sq = sqrt(disc)
        if b >= 0.0:
            denom = -b - sq
            root = 2.0 * c / denom if denom != 0.0 else 0.0
        else:
            root = (-b + sq) / two_a
        if root <= 0.0:
            raise NonPositiveRoot("PCC voltage quadratic has no positive root")
        return root

    def field(delta: float, domega: float) -> Tuple[float, float]:
        cd = cos(delta)
        sd = sin(delta)
        v = vpcc(cd, sd)
        pe = 1.5 * v / z2 * (rg * (v - vg * cd) + xg * vg * sd)
        acc = (p_ref - pe - damp * domega) / two_h
        return domega, acc

    if not reverse:
        return field

    def reversed_field(delta: float, domega: float) -> Tuple[float, float]:
        d_delta, d_domega = field(delta, domega)
        return -d_delta, -d_domega

    return reversed_field


def make_array_field(p: VsgParams, g: GridParams, reverse: bool = False):
    """Vectorised vector field over arrays of states (batch integration)."""
    sign = -1.0 if reverse else 1.0

    def field(delta: np.ndarray, domega: np.ndarray):
        pe = electrical_power_array(p, g, delta)
        return sign * domega, sign * (p.p_ref - pe - p.damping_d * domega) / p.inertia_2h

    return field
