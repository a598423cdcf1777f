"""Fixed-step RK4 integration of the phase-plane dynamics.

One integrator serves phase portraits, reverse-time boundary tracing and the
piecewise fault simulations.  Integration stops on the first of: an event,
leaving the window, convergence to a target state, or ``max_time``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AnalysisError
from .model import PhaseState

OMEGA_SCALE = 100.0
CONVERGENCE_TOL = 1e-6
CONVERGENCE_HOLD = 0.1
EVENT_TOL = 1e-10


class NonFiniteState(AnalysisError):
    """The vector field produced NaN or infinity."""


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    LEFT_WINDOW = "LeftWindow"
    TIMEOUT = "TimeOut"
    EVENT = "EventFired"


class Direction(str, enum.Enum):
    FORWARD = "Forward"
    REVERSED = "Reversed"


def scaled_norm(d_delta: float, d_domega: float) -> float:
    """max(|d_delta| / 1 rad, |d_domega| / 100 rad/s)."""
    return max(abs(d_delta), abs(d_domega) / OMEGA_SCALE)


@dataclass(frozen=True)
class Window:
    delta_min: float
    delta_max: float
    domega_min: float
    domega_max: float

    def __post_init__(self):
        if not (self.delta_min < self.delta_max and self.domega_min < self.domega_max):
            raise ValueError(f"empty window {self}")

    @classmethod
    def around(cls, delta_center: float, half_width: float = 2.0 * math.pi,
               domega_max: float = 150.0) -> "Window":
        return cls(delta_center - half_width, delta_center + half_width, -domega_max, domega_max)

    def contains(self, delta: float, domega: float) -> bool:
        return (self.delta_min <= delta <= self.delta_max
                and self.domega_min <= domega <= self.domega_max)

    def corners(self) -> np.ndarray:
        """Counter-clockwise starting at the lower-left corner."""
        return np.array([
            [self.delta_min, self.domega_min],
            [self.delta_max, self.domega_min],
            [self.delta_max, self.domega_max],
            [self.delta_min, self.domega_max],
        ])

    def as_dict(self) -> dict:
        return {
            "delta_min": self.delta_min,
            "delta_max": self.delta_max,
            "domega_min": self.domega_min,
            "domega_max": self.domega_max,
        }


@dataclass(frozen=True)
class AngleEvent:
    """Fires when delta crosses ``delta`` while increasing."""
    id: str
    delta: float


@dataclass(frozen=True)
class TimeEvent:
    id: str
    t: float


Event = Union[AngleEvent, TimeEvent]


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-4
    max_time: float = 10.0
    window: Optional[Window] = None
    events: Tuple[Event, ...] = ()

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if not self.max_time >= self.step:
            raise ValueError(f"max_time must be >= step, got {self.max_time}")
        object.__setattr__(self, "events", tuple(self.events))

    def replace(self, **changes) -> "IntegratorConfig":
        kw = dict(step=self.step, max_time=self.max_time, window=self.window, events=self.events)
        kw.update(changes)
        return IntegratorConfig(**kw)


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    delta: np.ndarray
    domega: np.ndarray
    termination: Termination
    direction: Direction = Direction.FORWARD
    event_id: Optional[str] = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final(self) -> PhaseState:
        return PhaseState(float(self.delta[-1]), float(self.domega[-1]))

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.delta, self.domega])

    def state(self, i: int) -> PhaseState:
        return PhaseState(float(self.delta[i]), float(self.domega[i]))

    def to_csv(self, dest=None) -> str:
        """Write ``t,delta,domega`` rows at full precision; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "delta", "domega"])
        for row in zip(self.t.tolist(), self.delta.tolist(), self.domega.tolist()):
            w.writerow([repr(x) for x in row])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, src, termination: Termination = Termination.TIMEOUT,
                 direction: Direction = Direction.FORWARD) -> "Trajectory":
        text = Path(src).read_text() if not isinstance(src, io.StringIO) else src.getvalue()
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["t", "delta", "domega"]:
            raise ValueError(f"unexpected trajectory header {rows[0]}")
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, 3)
        return cls(data[:, 0], data[:, 1], data[:, 2], termination, direction)


def _rk4(rhs, d, w, h):
    k1d, k1w = rhs(d, w)
    k2d, k2w = rhs(d + 0.5 * h * k1d, w + 0.5 * h * k1w)
    k3d, k3w = rhs(d + 0.5 * h * k2d, w + 0.5 * h * k2w)
    k4d, k4w = rhs(d + h * k3d, w + h * k3w)
    return (d + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w))


def _locate_angle(rhs, d0, w0, h, target):
    """Sub-step tau in (0, h] where an RK4 step from (d0, w0) lands on ``target``.

    Starts from the linear-interpolation guess and refines by Illinois regula falsi.
    """
    lo, hi = 0.0, h
    glo = d0 - target
    d1, w1 = _rk4(rhs, d0, w0, h)
    ghi = d1 - target
    best = (h, d1, w1)
    side = 0
    for _ in range(60):
        tau = lo + (hi - lo) * (-glo) / (ghi - glo) if ghi != glo else 0.5 * (lo + hi)
        if not lo < tau <= hi:
            tau = 0.5 * (lo + hi)
        d, w = _rk4(rhs, d0, w0, tau)
        g = d - target
        best = (tau, d, w)
        if abs(g) <= EVENT_TOL or hi - lo <= 1e-15:
            break
        if g < 0.0:
            lo, glo = tau, g
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi, ghi = tau, g
            if side == 1:
                glo *= 0.5
            side = 1
    return best


def integrate(
    rhs: Callable[[float, float], Tuple[float, float]],
    init: PhaseState,
    cfg: IntegratorConfig,
    target: Optional[PhaseState] = None,
    direction: Direction = Direction.FORWARD,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate ``rhs`` from ``init`` with classic fixed-step RK4.

    ``rhs`` maps ``(delta, domega)`` to their time derivatives.  When ``target``
    is given, the run is declared converged once the state has stayed within
    1e-6 (scaled norm) of it for 0.1 s.  Reverse-time runs pass the reversed
    field and ``direction=Reversed``; the step is always positive.
    """
    h = cfg.step
    d, w = float(init.delta), float(init.domega)
    if cfg.window is not None and not cfg.window.contains(d, w):
        raise ValueError(f"initial state ({d}, {w}) outside integration window")
    win = cfg.window
    angle_events = [e for e in cfg.events if isinstance(e, AngleEvent)]
    time_events = sorted((e for e in cfg.events if isinstance(e, TimeEvent)), key=lambda e: e.t)
    stop_t = t0 + cfg.max_time
    stop_id = None
    for e in time_events:
        if t0 < e.t <= stop_t:
            stop_t, stop_id = e.t, e.id
            break
    hold = int(round(CONVERGENCE_HOLD / h))

    ts: List[float] = [t0]
    ds: List[float] = [d]
    ws: List[float] = [w]
    termination = Termination.TIMEOUT
    event_id = None
    near = 0
    if target is not None:
        td, tw = target.delta, target.domega
        if scaled_norm(d - td, w - tw) < CONVERGENCE_TOL:
            near = 1
    n = 0
    t = t0
    while True:
        t_next = t0 + (n + 1) * h
        step = h
        last = False
        if t_next >= stop_t - 1e-12 * max(1.0, abs(stop_t)):
            step = stop_t - t
            t_next = stop_t
            last = True
        if step <= 0.0:
            break
        nd, nw = _rk4(rhs, d, w, step)
        if not (math.isfinite(nd) and math.isfinite(nw)):
            raise NonFiniteState(f"non-finite state after t={t}")

        fired = None
        for e in angle_events:
            if d < e.delta <= nd:
                tau, ed, ew = _locate_angle(rhs, d, w, step, e.delta)
                if fired is None or tau < fired[0]:
                    fired = (tau, ed, ew, e.id)
        if fired is not None:
            tau, nd, nw, event_id = fired
            ts.append(t + tau)
            ds.append(nd)
            ws.append(nw)
            termination = Termination.EVENT
            break

        ts.append(t_next)
        ds.append(nd)
        ws.append(nw)
        d, w, t = nd, nw, t_next
        n += 1

        if win is not None and not (win.delta_min <= d <= win.delta_max
                                    and win.domega_min <= w <= win.domega_max):
            termination = Termination.LEFT_WINDOW
            break
        if target is not None:
            if max(abs(d - td), abs(w - tw) / OMEGA_SCALE) < CONVERGENCE_TOL:
                near += 1
                if near > hold:
                    termination = Termination.CONVERGED
                    break
            else:
                near = 0
        if last:
            if stop_id is not None:
                termination = Termination.EVENT
                event_id = stop_id
            break

    return Trajectory(np.array(ts), np.array(ds), np.array(ws), termination, Direction(direction), event_id)


def event_crossing(traj: Trajectory, target_delta: float) -> Optional[Tuple[float, PhaseState]]:
    """First increasing crossing of ``target_delta``, linearly interpolated."""
    d = traj.delta
    idx = np.nonzero((d[:-1] < target_delta) & (d[1:] >= target_delta))[0]
    if len(idx) == 0:
        return None
    i = int(idx[0])
    frac = (target_delta - d[i]) / (d[i + 1] - d[i])
    t = traj.t[i] + frac * (traj.t[i + 1] - traj.t[i])
    w = traj.domega[i] + frac * (traj.domega[i + 1] - traj.domega[i])
    return float(t), PhaseState(float(target_delta), float(w))


def concatenate(parts: Sequence[Trajectory], termination: Termination,
                event_id: Optional[str] = None) -> Trajectory:
    """Join consecutive trajectory pieces, dropping the duplicated joint samples."""
    ts, ds, ws = [parts[0].t], [parts[0].delta], [parts[0].domega]
    for piece in parts[1:]:
        ts.append(piece.t[1:])
        ds.append(piece.delta[1:])
        ws.append(piece.domega[1:])
    return Trajectory(np.concatenate(ts), np.concatenate(ds), np.concatenate(ws),
                      termination, parts[0].direction, event_id)


@dataclass
class BatchResult:
    converged: np.ndarray
    left_window: np.ndarray
    final: np.ndarray = field(repr=False)


def integrate_batch(
    rhs: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]],
    init: np.ndarray,
    step: float,
    max_time: float,
    window: Window,
    target: PhaseState,
) -> BatchResult:
    """Vectorised RK4 over many initial states with the same stopping rules.

    Each state is frozen once it leaves ``window`` or satisfies the convergence
    rule of :func:`integrate`.  Only verdicts and final states are kept.
    """
    y = np.array(init, dtype=float).reshape(-1, 2)
    d, w = y[:, 0].copy(), y[:, 1].copy()
    n = len(d)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    left = np.zeros(n, dtype=bool)
    near = np.zeros(n, dtype=np.int64)
    hold = int(round(CONVERGENCE_HOLD / step))
    steps = int(math.ceil(max_time / step - 1e-9))
    h = step
    for _ in range(steps):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        dd, ww = d[idx], w[idx]
        k1d, k1w = rhs(dd, ww)
        k2d, k2w = rhs(dd + 0.5 * h * k1d, ww + 0.5 * h * k1w)
        k3d, k3w = rhs(dd + 0.5 * h * k2d, ww + 0.5 * h * k2w)
        k4d, k4w = rhs(dd + h * k3d, ww + h * k3w)
        dd = dd + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        ww = ww + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        if not (np.all(np.isfinite(dd)) and np.all(np.isfinite(ww))):
            raise NonFiniteState("non-finite state in batch integration")
        d[idx], w[idx] = dd, ww
        out = ~((window.delta_min <= dd) & (dd <= window.delta_max)
                & (window.domega_min <= ww) & (ww <= window.domega_max))
        close = np.maximum(np.abs(dd - target.delta), np.abs(ww - target.domega) / OMEGA_SCALE) < CONVERGENCE_TOL
        nn = np.where(close, near[idx] + 1, 0)
        near[idx] = nn
        done_conv = (nn > hold) & ~out
        left[idx[out]] = True
        converged[idx[done_conv]] = True
        active[idx[out | done_conv]] = False
    return BatchResult(converged, left, np.column_stack([d, w]))
