"""Fault scenarios, disturbance taxonomy and critical clearing angles.

A scenario runs the VSG from its pre-fault SEP through a grid sag and an
optional clearing back to a post-fault grid.  The critical clearing angle is
obtained three ways: where the fault-on trajectory leaves the post-fault
basin, from the static equal-area balance, and by bisecting full
simulations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .doa import DoaBoundary, estimate_doa
from .equilibrium import (
    Equilibrium,
    NoEquilibrium,
    VpccMode,
    find_equilibria,
    operating_pair,
)
from .errors import AnalysisError
from .geometry import points_in_polygon
from .integrator import (
    AngleEvent,
    IntegratorConfig,
    PhaseState,
    Termination,
    TimeEvent,
    Trajectory,
    Window,
    _rk4,
    concatenate,
    integrate,
)
from .model import GridParams, VsgParams, active_power, make_field, vpcc_of_delta
from .quadrature import adaptive_simpson

TWO_PI = 2.0 * math.pi
POST_HORIZON = 10.0
# frequency excursions during deep sags exceed the portrait range; only the
# angle bound decides loss of synchronism
SIM_DOMEGA_LIMIT = 1.0e3
CCA_DOA_TOL = 1e-6
CCA_BRUTE_TOL = 1e-4
EAC_SCAN_STEP = 1e-2
EAC_ROOT_TOL = 1e-10


class NoPreFaultSep(AnalysisError):
    """The pre-fault grid has no stable operating point."""


class NoIntersection(AnalysisError):
    """The fault-on trajectory never leaves the post-fault basin."""


class NoSolution(AnalysisError):
    """The equal-area balance has no root for any clearing angle."""


class AllStable(AnalysisError):
    """Every clearing angle in the bracket leads to a stable recovery."""


class AllUnstable(AnalysisError):
    """No clearing angle in the bracket leads to a stable recovery."""


class FaultType(str, enum.Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"


@dataclass(frozen=True)
class AtAngle:
    delta: float


@dataclass(frozen=True)
class AtTime:
    t: float


@dataclass(frozen=True)
class Never:
    pass


Clearing = Union[AtAngle, AtTime, Never]


def _pre_sep(vsg: VsgParams, pre: GridParams) -> Equilibrium:
    try:
        sep, _ = operating_pair(vsg, pre, mode=VpccMode.DROOP)
    except NoEquilibrium as exc:
        raise NoPreFaultSep("pre-fault grid has no stable equilibrium") from exc
    return sep


@dataclass(frozen=True)
class FaultScenario:
    vsg: VsgParams
    pre: GridParams
    fault: GridParams
    post: GridParams
    fault_time: float = 0.0
    clearing: Clearing = Never()

    def __post_init__(self):
        if not self.fault_time >= 0.0:
            raise ValueError(f"fault_time must be >= 0, got {self.fault_time}")
        if isinstance(self.clearing, AtAngle):
            sep = _pre_sep(self.vsg, self.pre)
            if not self.clearing.delta > sep.delta0:
                raise ValueError(
                    f"clearing angle {self.clearing.delta} must exceed the pre-fault SEP {sep.delta0}")
        if isinstance(self.clearing, AtTime) and not self.clearing.t >= self.fault_time:
            raise ValueError("clearing time precedes the fault")

    @classmethod
    def sag(cls, vsg: VsgParams, grid: GridParams, depth: float, clearing: Clearing = Never(),
            fault_time: float = 0.0) -> "FaultScenario":
        """Sag of the grid voltage to ``depth`` p.u. with full recovery on clearing."""
        return cls(vsg, grid, grid.scaled(depth), grid, fault_time, clearing)


@dataclass(frozen=True, eq=False)
class StabilityVerdict:
    fault_type: FaultType
    stable: bool
    trajectory: Trajectory
    final_sep: Optional[Equilibrium] = None
    clearing_state: Optional[Tuple[float, float, float]] = None

    def to_dict(self) -> dict:
        fin = self.trajectory.final
        return {
            "fault_type": self.fault_type.value,
            "stable": self.stable,
            "termination": self.trajectory.termination.value,
            "final_sep": None if self.final_sep is None else self.final_sep.delta0,
            "clearing": None if self.clearing_state is None else
            dict(zip(("t", "delta", "domega"), self.clearing_state)),
            "final_state": {"t": float(self.trajectory.t[-1]), "delta": fin.delta, "domega": fin.domega},
            "samples": len(self.trajectory),
        }


def _sim_window(center: float) -> Window:
    return Window.around(center, domega_max=SIM_DOMEGA_LIMIT)


def _sep_or_none(vsg: VsgParams, g: GridParams) -> Optional[Equilibrium]:
    try:
        return operating_pair(vsg, g, mode=VpccMode.DROOP)[0]
    except NoEquilibrium:
        return None


def _fault_on(vsg: VsgParams, pre: GridParams, fault: GridParams, window: Window,
              step: float = 1e-4, max_time: float = POST_HORIZON) -> Trajectory:
    """Fault-on trajectory from the pre-fault SEP, stopped at convergence or window exit."""
    start = _pre_sep(vsg, pre)
    fsep = _sep_or_none(vsg, fault)
    target = None if fsep is None else PhaseState(fsep.delta0, 0.0)
    cfg = IntegratorConfig(step=step, max_time=max_time, window=window)
    return integrate(make_field(vsg, fault), PhaseState(start.delta0, 0.0), cfg, target=target)


def classify_fault(vsg: VsgParams, pre: GridParams, fault: GridParams) -> FaultType:
    """Type I: stays in the fault-on basin; Type II: leaves it; Type III: no basin."""
    start = _pre_sep(vsg, pre)
    eqs = find_equilibria(vsg, fault, mode=VpccMode.DROOP)
    if not eqs:
        return FaultType.TYPE_III
    doa = estimate_doa(vsg, fault, equilibria=eqs)
    if not doa.window.contains(start.delta0, 0.0):
        return FaultType.TYPE_II
    traj = _fault_on(vsg, pre, fault, doa.window)
    inside = points_in_polygon(doa.closed_polygon, traj.points)
    return FaultType.TYPE_I if inside.all() else FaultType.TYPE_II


def simulate_scenario(sc: FaultScenario, cfg: Optional[IntegratorConfig] = None,
                      fault_type: Optional[FaultType] = None) -> StabilityVerdict:
    """Run pre-fault, fault-on and post-clearing phases back to back.

    ``cfg`` supplies the step and the per-phase time budget.  The verdict is
    stable when the final phase converges to that grid's SEP.
    """
    cfg = cfg or IntegratorConfig(step=1e-4, max_time=POST_HORIZON)
    h = cfg.step
    vsg = sc.vsg
    if fault_type is None:
        fault_type = classify_fault(vsg, sc.pre, sc.fault)
    sep0 = _pre_sep(vsg, sc.pre)
    state = PhaseState(sep0.delta0, 0.0)
    parts: List[Trajectory] = []
    t = 0.0

    if sc.fault_time > 0.0:
        pre_cfg = IntegratorConfig(step=h, max_time=sc.fault_time)
        pre_traj = integrate(make_field(vsg, sc.pre), state, pre_cfg, t0=t)
        parts.append(pre_traj)
        state, t = pre_traj.final, float(pre_traj.t[-1])

    fsep = _sep_or_none(vsg, sc.fault)
    events = ()
    budget = cfg.max_time
    if isinstance(sc.clearing, AtAngle):
        events = (AngleEvent("clear", sc.clearing.delta),)
    elif isinstance(sc.clearing, AtTime):
        budget = max(sc.clearing.t - t, 0.0)
        events = (TimeEvent("clear", sc.clearing.t),)
    center = fsep.delta0 if fsep is not None else sep0.delta0
    fault_cfg = IntegratorConfig(step=h, max_time=max(budget, h), window=_sim_window(center), events=events)
    target = None if fsep is None else PhaseState(fsep.delta0, 0.0)
    if isinstance(sc.clearing, AtTime) and budget <= 0.0:
        fault_traj = None
    else:
        fault_traj = integrate(make_field(vsg, sc.fault), state, fault_cfg, target=target, t0=t)
        parts.append(fault_traj)
        state, t = fault_traj.final, float(fault_traj.t[-1])

    cleared = fault_traj is None or fault_traj.termination == Termination.EVENT
    if not cleared or isinstance(sc.clearing, Never):
        traj = concatenate(parts, fault_traj.termination, fault_traj.event_id)
        stable = fault_traj.termination == Termination.CONVERGED
        return StabilityVerdict(fault_type, stable, traj, fsep if stable else None)

    clearing_state = (t, state.delta, state.domega)
    psep = _sep_or_none(vsg, sc.post)
    win = _sim_window(psep.delta0 if psep is not None else state.delta)
    if not win.contains(state.delta, state.domega):
        traj = concatenate(parts, Termination.LEFT_WINDOW, None)
        return StabilityVerdict(fault_type, False, traj, None, clearing_state)
    post_cfg = IntegratorConfig(step=h, max_time=cfg.max_time, window=win)
    post_target = None if psep is None else PhaseState(psep.delta0, 0.0)
    post_traj = integrate(make_field(vsg, sc.post), state, post_cfg, target=post_target, t0=t)
    parts.append(post_traj)
    traj = concatenate(parts, post_traj.termination, post_traj.event_id)
    stable = post_traj.termination == Termination.CONVERGED
    return StabilityVerdict(fault_type, stable, traj, psep if stable else None, clearing_state)


def cca_doa(vsg: VsgParams, pre: GridParams, fault: GridParams, post: GridParams,
            boundary: Optional[DoaBoundary] = None, step: float = 1e-4) -> float:
    """Angle at which the fault-on trajectory first leaves the post-fault basin."""
    b = boundary if boundary is not None else estimate_doa(vsg, post)
    traj = _fault_on(vsg, pre, fault, b.window, step=step)
    inside = points_in_polygon(b.closed_polygon, traj.points)
    if inside.all():
        raise NoIntersection("fault-on trajectory stays inside the post-fault basin")
    k = int(np.argmin(inside))
    if k == 0:
        raise NoIntersection("pre-fault SEP lies outside the post-fault basin")
    rhs = make_field(vsg, fault)
    d, w = float(traj.delta[k - 1]), float(traj.domega[k - 1])
    h = float(traj.t[k] - traj.t[k - 1])
    lo, hi = 0.0, h
    d_lo, d_hi = d, float(traj.delta[k])
    # refine the exit along the RK4 sub-step until the angle bracket is tight
    while abs(d_hi - d_lo) > CCA_DOA_TOL:
        mid = 0.5 * (lo + hi)
        md, mw = _rk4(rhs, d, w, mid)
        if points_in_polygon(b.closed_polygon, np.array([[md, mw]]))[0]:
            lo, d_lo = mid, md
        else:
            hi, d_hi = mid, md
    return 0.5 * (d_lo + d_hi)


def _power_curve(vsg: VsgParams, g: GridParams, mode: VpccMode,
                 anchor: float) -> Callable[[float], float]:
    """Static P_e(delta) curve, either droop-coupled or with V_PCC frozen at ``anchor``."""
    if VpccMode(mode) == VpccMode.DROOP:
        return lambda d: active_power(vsg, g, d, vpcc_of_delta(vsg, g, d))
    v = vpcc_of_delta(vsg, g, anchor)
    return lambda d: active_power(vsg, g, d, v)


def _anchor(vsg: VsgParams, g: GridParams, fallback: float) -> float:
    sep = _sep_or_none(vsg, g)
    return sep.delta0 if sep is not None else fallback


def _area_tol(vsg: VsgParams) -> float:
    return 1e-3 * max(abs(vsg.p_ref), 1.0)


def eac_areas(vsg: VsgParams, grid: GridParams, delta_start: float, delta_end: float,
              mode: VpccMode = VpccMode.CONSTANT) -> Tuple[float, float]:
    """Acceleration and deceleration areas of ``grid``'s curve over an angle interval."""
    if not delta_start <= delta_end:
        raise ValueError("delta_start must not exceed delta_end")
    if delta_start == delta_end:
        return 0.0, 0.0
    pe = _power_curve(vsg, grid, mode, _anchor(vsg, grid, delta_start))
    cuts = [delta_start]
    for e in find_equilibria(vsg, grid, (delta_start, delta_end), mode=VpccMode.DROOP):
        if delta_start < e.delta0 < delta_end:
            cuts.append(e.delta0)
    cuts.append(delta_end)
    tol = _area_tol(vsg) / (len(cuts) - 1)
    s_acc = s_dec = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val = adaptive_simpson(lambda d: vsg.p_ref - pe(d), a, b, tol)
        if val >= 0.0:
            s_acc += val
        else:
            s_dec -= val
    return s_acc, s_dec


@dataclass(frozen=True)
class EacFirstSwing:
    s_acc: float
    s_dec_max: float

    @property
    def predicts_stable(self) -> bool:
        return self.s_acc <= self.s_dec_max


def eac_first_swing(vsg: VsgParams, pre: GridParams, fault: GridParams,
                    mode: VpccMode = VpccMode.CONSTANT) -> EacFirstSwing:
    """Sustained-fault EAC test: acceleration up to the fault-on SEP vs the area up to its UEP."""
    start = _pre_sep(vsg, pre)
    eqs = find_equilibria(vsg, fault, mode=VpccMode.DROOP)
    if not eqs:
        return EacFirstSwing(math.inf, 0.0)
    fsep, fuep = operating_pair(vsg, fault, mode=VpccMode.DROOP, equilibria=eqs)
    s_acc, _ = eac_areas(vsg, fault, start.delta0, fsep.delta0, mode)
    _, s_dec = eac_areas(vsg, fault, fsep.delta0, fuep.delta0, mode)
    return EacFirstSwing(s_acc, s_dec)


def eac_margin(vsg: VsgParams, pre: GridParams, fault: GridParams, post: GridParams,
               mode: VpccMode = VpccMode.CONSTANT) -> Tuple[Callable[[float], float], float, float]:
    """Deceleration minus acceleration area as a function of the clearing angle.

    Returns ``(margin, delta0, delta4)``.  With fault-on equilibria the balance
    is ``int_{d0}^{d2}(P_ref - P_e) = int_{d2}^{d3}(P_e* - P_e) +
    int_{d3}^{d4}(P_e* - P_ref)`` where ``d3`` is the fault-on saddle and
    ``d4`` the post-fault saddle; without them it is
    ``int_{d0}^{d2}(P_ref - P_e) = int_{d2}^{d3}(P_e* - P_ref)`` with ``d3``
    the post-fault saddle.
    """
    d0 = _pre_sep(vsg, pre).delta0
    try:
        _, post_uep = operating_pair(vsg, post, mode=VpccMode.DROOP)
    except NoEquilibrium as exc:
        raise NoSolution("post-fault grid has no equilibrium") from exc
    pe_f = _power_curve(vsg, fault, mode, _anchor(vsg, fault, d0))
    pe_post = _power_curve(vsg, post, mode, _anchor(vsg, post, d0))
    tol = _area_tol(vsg)
    pref = vsg.p_ref

    def accel(d2):
        return adaptive_simpson(lambda d: pref - pe_f(d), d0, d2, tol)

    fault_eqs = find_equilibria(vsg, fault, mode=VpccMode.DROOP)
    if fault_eqs:
        _, fault_uep = operating_pair(vsg, fault, mode=VpccMode.DROOP, equilibria=fault_eqs)
        d3, d4 = fault_uep.delta0, post_uep.delta0
        tail = adaptive_simpson(lambda d: pe_post(d) - pref, d3, d4, tol)

        def margin(d2):
            gap = adaptive_simpson(lambda d: pe_post(d) - pe_f(d), d2, d3, tol)
            return gap + tail - accel(d2)
    else:
        d4 = post_uep.delta0

        def margin(d2):
            return adaptive_simpson(lambda d: pe_post(d) - pref, d2, d4, tol) - accel(d2)

    return margin, d0, d4


def cca_eac(vsg: VsgParams, pre: GridParams, fault: GridParams, post: GridParams,
            mode: VpccMode = VpccMode.CONSTANT) -> float:
    """Largest clearing angle whose equal-area margin is non-negative."""
    margin, d0, d4 = eac_margin(vsg, pre, fault, post, mode)
    grid = np.linspace(d0, d4, max(int(math.ceil((d4 - d0) / EAC_SCAN_STEP)), 1) + 1)
    vals = np.array([margin(float(d)) for d in grid])
    ok = np.nonzero(vals >= 0.0)[0]
    if len(ok) == 0:
        raise NoSolution("acceleration area exceeds the available deceleration area for every clearing angle")
    i = int(ok[-1])
    if i == len(grid) - 1:
        return float(grid[-1])
    lo, hi = float(grid[i]), float(grid[i + 1])
    while hi - lo > EAC_ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if margin(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cca_bruteforce(vsg: VsgParams, pre: GridParams, fault: GridParams, post: GridParams,
                   cfg: Optional[IntegratorConfig] = None, tol: float = CCA_BRUTE_TOL) -> float:
    """Bisect the clearing angle on full simulations (stable below, unstable above)."""
    cfg = cfg or IntegratorConfig(step=1e-4, max_time=POST_HORIZON)
    sep0 = _pre_sep(vsg, pre)
    psep = _sep_or_none(vsg, post)
    window = _sim_window(psep.delta0 if psep is not None else sep0.delta0)
    reach = _fault_on(vsg, pre, fault, window, step=cfg.step, max_time=cfg.max_time)
    lo = sep0.delta0 + tol
    hi = min(float(np.max(reach.delta)), window.delta_max) - tol
    ftype = classify_fault(vsg, pre, fault)

    def stable(angle: float) -> bool:
        sc = FaultScenario(vsg, pre, fault, post, 0.0, AtAngle(angle))
        return simulate_scenario(sc, cfg, fault_type=ftype).stable

    if hi <= lo:
        raise AllStable("fault-on trajectory never leaves the pre-fault SEP")
    s_lo, s_hi = stable(lo), stable(hi)
    if s_lo and s_hi:
        raise AllStable("every clearing angle up to the fault-on excursion is stable")
    if not s_lo and not s_hi:
        raise AllUnstable("no clearing angle yields a stable recovery")
    if not s_lo:
        raise AnalysisError("stability is not monotone in the clearing angle")
    verdicts = [(lo, True), (hi, False)]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok = stable(mid)
        verdicts.append((mid, ok))
        if ok:
            lo = mid
        else:
            hi = mid
    stable_max = max(a for a, ok in verdicts if ok)
    unstable_min = min(a for a, ok in verdicts if not ok)
    assert stable_max < unstable_min, "stable/unstable split is not monotone"
    return 0.5 * (lo + hi)
