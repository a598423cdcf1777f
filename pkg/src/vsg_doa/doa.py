"""Domain-of-attraction boundary by reverse-time integration from the saddle.

The basin of the operating SEP is bounded by the stable manifold of the UEP
and, on the left, by that of the same saddle one revolution earlier.
Integrating the time-reversed field from seeds next to each saddle traces
those manifolds in a band taller than the window, since a branch can leave
through the top edge and come back further left.  The window is cut along the
full curves and the face holding the SEP is kept.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import LineString, Point, box
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.ops import split

from .equilibrium import (
    Equilibrium,
    Kind,
    NoEquilibrium,
    VpccMode,
    find_equilibria,
    jacobian_at,
    operating_pair,
    stable_eigenvector,
)
from .errors import AnalysisError
from .geometry import (
    point_in_polygon,
    polyline_self_intersects,
    shoelace_area,
)
from .integrator import (
    OMEGA_SCALE,
    Direction,
    IntegratorConfig,
    Window,
    integrate,
)
from .model import GridParams, PhaseState, VsgParams, make_field

TWO_PI = 2.0 * math.pi
DEFAULT_HORIZON = 5.0
DEDUP_TOL = 1e-6
TRACE_DOMEGA = 1000.0
TRACE_DOMEGA_FACTOR = 5.0
TRACE_DELTA_MARGIN = 0.5
RING_DEPARTURE = 50.0


class DegenerateUep(AnalysisError):
    """The bounding saddle has coalesced with the SEP."""


class DoaConstructionError(AnalysisError):
    """The traced manifolds could not be closed into a simple polygon."""


class SeedMode(str, enum.Enum):
    RING = "ring"
    SEPARATRIX_PAIR = "separatrix"


@dataclass(frozen=True)
class SeedConfig:
    count: int = 200
    radius: float = 1e-3
    mode: SeedMode = SeedMode.SEPARATRIX_PAIR

    def __post_init__(self):
        object.__setattr__(self, "mode", SeedMode(self.mode))
        if not self.radius > 0:
            raise ValueError(f"seed radius must be > 0, got {self.radius}")
        if self.mode == SeedMode.RING and self.count < 4:
            raise ValueError(f"ring seeding needs at least 4 points, got {self.count}")


@dataclass(frozen=True, eq=False)
class DoaBoundary:
    branches: Tuple[np.ndarray, ...]
    uep: Equilibrium
    sep: Equilibrium
    window: Window
    closed_polygon: np.ndarray
    branch_names: Tuple[str, ...] = ()
    seeds: SeedConfig = field(default_factory=SeedConfig)

    @property
    def area(self) -> float:
        return doa_area(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["branch_id", "delta", "domega"])
        for i, br in enumerate(self.branches):
            for d, om in br.tolist():
                w.writerow([i, repr(d), repr(om)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def eq(e: Equilibrium) -> dict:
            return {
                "delta0": e.delta0,
                "kind": e.kind.value,
                "eigenvalues": [[z.real, z.imag] for z in e.eigenvalues],
                "vpcc": e.vpcc_at,
            }

        return {
            "branches": [
                {"id": i, "name": name, "points": br.tolist()}
                for i, (name, br) in enumerate(zip(self.branch_names, self.branches))
            ],
            "polygon": self.closed_polygon.tolist(),
            "window": self.window.as_dict(),
            "equilibria": {"sep": eq(self.sep), "uep": eq(self.uep)},
            "area": self.area,
            "seeding": {"mode": self.seeds.mode.value, "count": self.seeds.count,
                        "radius": self.seeds.radius},
        }


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, len(points)):
        prev = points[keep[-1]]
        if max(abs(points[i, 0] - prev[0]), abs(points[i, 1] - prev[1]) / OMEGA_SCALE) >= DEDUP_TOL:
            keep.append(i)
    return points[keep]


def _trace(rhs, seed: Tuple[float, float], cfg: IntegratorConfig) -> np.ndarray:
    traj = integrate(rhs, PhaseState(*seed), cfg, direction=Direction.REVERSED)
    return traj.points


def _scaled_unit(v: Tuple[float, float], radius: float) -> np.ndarray:
    vd, vw = v
    norm = max(abs(vd), abs(vw) / OMEGA_SCALE)
    return np.array([vd, vw]) * (radius / norm)


def _ring_branches(rhs, base: float, v_s: np.ndarray, seeds: SeedConfig,
                   cfg: IntegratorConfig) -> Tuple[np.ndarray, np.ndarray]:
    # split the reverse trajectories by the side of the saddle they depart on,
    # read off where each first gets well clear of the seed circle
    s_dir = np.array([v_s[0], v_s[1] / OMEGA_SCALE])
    groups = {1: [], -1: []}
    for k in range(seeds.count):
        theta = TWO_PI * k / seeds.count
        seed = (base + seeds.radius * math.cos(theta),
                seeds.radius * OMEGA_SCALE * math.sin(theta))
        pts = _trace(rhs, seed, cfg)
        rel = np.column_stack([pts[:, 0] - base, pts[:, 1] / OMEGA_SCALE])
        dist = np.max(np.abs(rel), axis=1)
        clear = np.nonzero(dist > RING_DEPARTURE * seeds.radius)[0]
        probe = rel[clear[0]] if len(clear) else rel[-1]
        side = 1 if float(probe @ s_dir) > 0 else -1
        reach = float(np.max(dist))
        groups[side].append((reach, k, pts))
    if not groups[1] or not groups[-1]:
        raise DoaConstructionError("ring seeds did not split into two manifold branches")
    # farthest-reaching trajectory per branch; earliest seed index breaks ties
    lower = max(groups[1], key=lambda item: (item[0], -item[1]))[2]
    upper = max(groups[-1], key=lambda item: (item[0], -item[1]))[2]
    return upper, lower


def _pair_branches(rhs, base: float, v_s: np.ndarray,
                   cfg: IntegratorConfig) -> Tuple[np.ndarray, np.ndarray]:
    # v_s points right-and-down (negative eigenvalue), so -v_s seeds the upper branch
    upper = _trace(rhs, (base - v_s[0], -v_s[1]), cfg)
    lower = _trace(rhs, (base + v_s[0], v_s[1]), cfg)
    return upper, lower


def _trace_window(window: Window) -> Window:
    """Taller band for tracing: manifolds may leave the window and re-enter it."""
    span = max(TRACE_DOMEGA, TRACE_DOMEGA_FACTOR * max(abs(window.domega_min), abs(window.domega_max)))
    return Window(window.delta_min - TRACE_DELTA_MARGIN, window.delta_max + TRACE_DELTA_MARGIN, -span, span)


def _basin_polygon(curves: Sequence[np.ndarray], window: Window, sep: Equilibrium) -> np.ndarray:
    """Face of the window, cut by the manifold curves, that holds the SEP."""
    pieces = [box(window.delta_min, window.domega_min, window.delta_max, window.domega_max)]
    for curve in curves:
        cutter = LineString(curve)
        nxt = []
        for piece in pieces:
            nxt.extend(g for g in split(piece, cutter).geoms if isinstance(g, ShapelyPolygon))
        pieces = nxt
    target = Point(sep.delta0, 0.0)
    hits = [pc for pc in pieces if pc.contains(target)]
    if len(hits) != 1:
        raise DoaConstructionError("could not isolate the basin face containing the SEP")
    poly = np.asarray(hits[0].exterior.coords)[:-1]
    poly = _dedupe(poly)
    if polyline_self_intersects(poly, closed=True):
        raise DoaConstructionError("basin polygon is not simple")
    return poly


def estimate_doa(
    p: VsgParams,
    g: GridParams,
    seeds: Optional[SeedConfig] = None,
    window: Optional[Window] = None,
    cfg: Optional[IntegratorConfig] = None,
    equilibria: Optional[Sequence[Equilibrium]] = None,
) -> DoaBoundary:
    """Estimate the basin of the operating SEP for grid state ``g``.

    Raises :class:`NoEquilibrium` when the grid admits no equilibrium and
    :class:`DegenerateUep` at saddle-node coalescence.
    """
    seeds = seeds or SeedConfig()
    # the traced flow is droop-coupled, so its own linearisation decides which
    # root is the saddle; a frozen-V_PCC slope can miss it for large K_q
    eqs = list(find_equilibria(p, g, mode=VpccMode.DROOP) if equilibria is None else equilibria)
    if not eqs:
        raise NoEquilibrium("no equilibrium: the domain of attraction does not exist")
    if any(e.kind == Kind.DEGENERATE for e in eqs):
        raise DegenerateUep("equilibria have coalesced (saddle-node)")
    sep, uep = operating_pair(p, g, equilibria=eqs)

    if window is None:
        window = Window.around(sep.delta0)
    trace = _trace_window(window)
    if cfg is None:
        cfg = IntegratorConfig(max_time=DEFAULT_HORIZON, window=trace)
    else:
        cfg = cfg.replace(window=trace, events=())

    rhs = make_field(p, g, reverse=True)
    # seed along the linearisation of the field actually integrated
    v_s = _scaled_unit(stable_eigenvector(jacobian_at(p, g, uep.delta0, VpccMode.DROOP)), seeds.radius)

    curves = []
    branches: List[np.ndarray] = []
    names: List[str] = []
    for label, base in (("uep", uep.delta0), ("uep_shifted", uep.delta0 - TWO_PI)):
        if seeds.mode == SeedMode.RING:
            upper, lower = _ring_branches(rhs, base, v_s, seeds, cfg)
        else:
            upper, lower = _pair_branches(rhs, base, v_s, cfg)
        branches += [upper, lower]
        names += [f"{label}_upper", f"{label}_lower"]
        for br in (upper, lower):
            if window.contains(*br[-1]):
                raise DoaConstructionError(
                    f"manifold branch from delta={base:.6f} did not leave the window within {cfg.max_time} s")
        curve = np.vstack([upper[::-1], [[base, 0.0]], lower])
        curves.append(_dedupe(curve))

    # solutions are unique, so distinct manifolds can neither cross nor loop
    lines = [LineString(c) for c in curves]
    if not all(line.is_simple for line in lines) or lines[0].crosses(lines[1]):
        raise DoaConstructionError("traced manifolds intersect")
    polygon = _basin_polygon(curves, window, sep)
    return DoaBoundary(tuple(branches), uep, sep, window, polygon, tuple(names), seeds)


def contains(b: DoaBoundary, s: PhaseState) -> bool:
    """Membership of ``s`` in the estimated basin (boundary counts as inside)."""
    return point_in_polygon(b.closed_polygon, s.delta, s.domega, tol=1e-9)


def doa_area(b: DoaBoundary) -> float:
    return shoelace_area(b.closed_polygon)
