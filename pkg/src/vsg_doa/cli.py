"""Command-line front end: ``vsg-doa <subcommand> --config <path>``.

Exit status is 0 on success, 1 for configuration errors and 2 when an
analysis cannot produce a required result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import jsonschema
import numpy as np

from .config import SCHEMA_VERSION, RunConfig, Scenario, load_config
from .doa import DoaBoundary, estimate_doa
from .equilibrium import Equilibrium, NoEquilibrium, VpccMode, find_equilibria, operating_pair
from .errors import AnalysisError, ConfigError
from .integrator import IntegratorConfig, PhaseState, Window, integrate
from .model import GridParams, VsgParams, make_field
from .transient import (
    FaultScenario,
    cca_bruteforce,
    cca_doa,
    cca_eac,
    classify_fault,
    simulate_scenario,
)

THREADS_ENV = "VSG_DOA_THREADS"
DEFAULT_OUT = "vsg_doa_out"

_NUM = {"type": "number"}
_NULLABLE_NUM = {"type": ["number", "null"]}
_EQ = {
    "type": "object",
    "required": ["delta0", "kind", "eigenvalues", "vpcc"],
    "properties": {
        "delta0": _NUM,
        "kind": {"enum": ["SEP", "UEP", "Degenerate"]},
        "eigenvalues": {"type": "array", "minItems": 2, "maxItems": 2,
                        "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
        "vpcc": _NUM,
        "real_eigenvalues": {"type": "boolean"},
    },
}


def _envelope(command: str, body: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "type": "object",
        "required": ["schema_version", "command"] + list(body),
        "properties": {"schema_version": {"const": SCHEMA_VERSION}, "command": {"const": command}, **body},
    }


def _array_of(item: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "array", "items": item}


_CCA_ENTRY = {
    "type": "object",
    "required": ["value", "error"],
    "properties": {"value": _NULLABLE_NUM, "error": {"type": ["string", "null"]}},
}

OUTPUT_SCHEMAS: Dict[str, Dict[str, Any]] = {
    "equilibria": _envelope("equilibria", {
        "mode": {"enum": [m.value for m in VpccMode]},
        "grid_states": _array_of({
            "type": "object",
            "required": ["label", "sag", "vg", "equilibria"],
            "properties": {"label": {"type": "string"}, "sag": _NUM, "vg": _NUM, "equilibria": _array_of(_EQ)},
        }),
    }),
    "portrait": _envelope("portrait", {
        "sag": _NUM,
        "csv": {"type": "string"},
        "trajectories": _array_of({
            "type": "object",
            "required": ["id", "init", "termination", "final"],
            "properties": {"id": {"type": "integer"}, "termination": {"type": "string"}},
        }),
    }),
    "doa": _envelope("doa", {
        "grid_states": _array_of({
            "type": "object",
            "required": ["label", "sag", "exists", "area"],
            "properties": {
                "label": {"type": "string"},
                "sag": _NUM,
                "exists": {"type": "boolean"},
                "area": _NUM,
                "csv": {"type": ["string", "null"]},
                "boundary": {"type": ["object", "null"]},
                "reason": {"type": ["string", "null"]},
            },
        }),
    }),
    "simulate": _envelope("simulate", {
        "scenarios": _array_of({
            "type": "object",
            "required": ["name", "sag", "fault_type", "stable", "csv"],
            "properties": {"name": {"type": "string"}, "stable": {"type": "boolean"},
                           "fault_type": {"enum": ["TypeI", "TypeII", "TypeIII"]}},
        }),
    }),
    "cca": _envelope("cca", {
        "scenarios": _array_of({
            "type": "object",
            "required": ["name", "sag", "fault_type", "eac", "doa", "bruteforce"],
            "properties": {"name": {"type": "string"}, "sag": _NUM,
                           "fault_type": {"enum": ["TypeI", "TypeII", "TypeIII"]},
                           "eac": _CCA_ENTRY, "doa": _CCA_ENTRY, "bruteforce": _CCA_ENTRY},
        }),
    }),
    "sweep": _envelope("sweep", {
        "sweeps": _array_of({
            "type": "object",
            "required": ["parameter", "summary_csv", "points"],
            "properties": {
                "parameter": {"type": "string"},
                "summary_csv": {"type": "string"},
                "points": _array_of({
                    "type": "object",
                    "required": ["param_value", "doa_area", "sep_delta", "uep_delta", "no_equilibrium"],
                    "properties": {"param_value": _NUM, "doa_area": _NUM, "sep_delta": _NULLABLE_NUM,
                                   "uep_delta": _NULLABLE_NUM, "no_equilibrium": {"type": "boolean"}},
                }),
            },
        }),
    }),
}


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(THREADS_ENV, f"expected a positive integer, got {raw!r}")
    return n


def parallel_map(fn: Callable, items: Sequence, threads: Optional[int] = None) -> List:
    """Ordered map, fanned out over worker processes when more than one is allowed."""
    items = list(items)
    n = min(threads or _threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _eq_dict(e: Equilibrium) -> Dict[str, Any]:
    return {
        "delta0": e.delta0,
        "kind": e.kind.value,
        "eigenvalues": [[z.real, z.imag] for z in e.eigenvalues],
        "vpcc": e.vpcc_at,
        "real_eigenvalues": e.real_eigenvalues,
    }


def _write_json(path: Path, command: str, doc: Dict[str, Any]) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, **doc}
    jsonschema.validate(doc, OUTPUT_SCHEMAS[command])
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _grid_states(cfg: RunConfig) -> List[tuple]:
    states = [("nominal", 1.0)]
    seen = {1.0}
    for sc in cfg.scenarios:
        if sc.sag not in seen:
            seen.add(sc.sag)
            states.append((f"sag_{sc.sag!r}", sc.sag))
    return states


def _doa_kwargs(cfg: RunConfig, sep_delta: float) -> Dict[str, Any]:
    window = Window.around(sep_delta, cfg.doa.half_width, cfg.doa.domega_max)
    icfg = IntegratorConfig(step=cfg.integrator.step, max_time=cfg.doa.max_time)
    return {"seeds": cfg.doa.seeds, "window": window, "cfg": icfg}


def _estimate(cfg: RunConfig, vsg: VsgParams, grid: GridParams) -> DoaBoundary:
    eqs = find_equilibria(vsg, grid, mode=VpccMode.DROOP)
    if not eqs:
        raise NoEquilibrium("no equilibrium: the domain of attraction does not exist")
    sep, _ = operating_pair(vsg, grid, mode=VpccMode.DROOP, equilibria=eqs)
    return estimate_doa(vsg, grid, equilibria=eqs, **_doa_kwargs(cfg, sep.delta0))


# -- subcommands ---------------------------------------------------------------


def cmd_equilibria(cfg: RunConfig, out: Path) -> None:
    states = []
    for label, sag in _grid_states(cfg):
        g = cfg.grid.scaled(sag)
        eqs = find_equilibria(cfg.vsg, g, mode=cfg.equilibrium_mode)
        states.append({"label": label, "sag": sag, "vg": g.vg, "equilibria": [_eq_dict(e) for e in eqs]})
        print(f"{label}: {len(eqs)} equilibria " + " ".join(f"{e.kind.value}@{e.delta0:.6f}" for e in eqs))
    _write_json(out / "equilibria.json", "equilibria",
                {"mode": cfg.equilibrium_mode.value, "grid_states": states})


def _portrait_job(args):
    vsg, grid, init, icfg, target, every = args
    traj = integrate(make_field(vsg, grid), init, icfg, target=target)
    keep = np.arange(0, len(traj), every)
    if keep[-1] != len(traj) - 1:
        keep = np.append(keep, len(traj) - 1)
    return traj.t[keep], traj.delta[keep], traj.domega[keep], traj.termination.value


def cmd_portrait(cfg: RunConfig, out: Path) -> None:
    spec = cfg.portrait
    g = cfg.grid.scaled(spec.sag)
    eqs = find_equilibria(cfg.vsg, g, mode=VpccMode.DROOP)
    target = None
    center = 0.5 * (spec.delta_range[0] + spec.delta_range[1])
    if eqs:
        sep, _ = operating_pair(cfg.vsg, g, mode=VpccMode.DROOP, equilibria=eqs)
        target, center = PhaseState(sep.delta0, 0.0), sep.delta0
    lo = min(spec.delta_range[0], center - 2.0 * math.pi)
    hi = max(spec.delta_range[1], center + 2.0 * math.pi)
    wmax = max(150.0, 1.5 * max(abs(v) for v in spec.domega_range))
    icfg = IntegratorConfig(step=cfg.integrator.step, max_time=spec.max_time,
                            window=Window(lo - 1e-9, hi + 1e-9, -wmax, wmax))
    inits = [PhaseState(float(d), float(w))
             for d in np.linspace(*spec.delta_range, spec.n_delta)
             for w in np.linspace(*spec.domega_range, spec.n_domega)]
    results = parallel_map(_portrait_job, [(cfg.vsg, g, s, icfg, target, spec.sample_every) for s in inits])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["traj_id", "t", "delta", "domega"])
    summary = []
    for i, (s, (t, d, om, term)) in enumerate(zip(inits, results)):
        for row in zip(t.tolist(), d.tolist(), om.tolist()):
            w.writerow([i, *map(repr, row)])
        summary.append({"id": i, "init": [s.delta, s.domega], "termination": term,
                        "final": [float(d[-1]), float(om[-1])]})
    (out / "portrait.csv").write_text(buf.getvalue())
    _write_json(out / "portrait.json", "portrait", {"sag": spec.sag, "csv": "portrait.csv",
                                                    "trajectories": summary})
    print(f"portrait: {len(inits)} trajectories at sag {spec.sag}")


def _doa_job(args):
    cfg, vsg, grid = args
    try:
        return _estimate(cfg, vsg, grid), None
    except NoEquilibrium as exc:
        return None, str(exc)


def cmd_doa(cfg: RunConfig, out: Path) -> None:
    states = _grid_states(cfg)
    results = parallel_map(_doa_job, [(cfg, cfg.vsg, cfg.grid.scaled(sag)) for _, sag in states])
    entries = []
    for (label, sag), (b, reason) in zip(states, results):
        if b is None:
            if label == "nominal":
                raise NoEquilibrium(f"nominal grid: {reason}")
            entries.append({"label": label, "sag": sag, "exists": False, "area": 0.0,
                            "csv": None, "boundary": None, "reason": reason})
            print(f"{label}: no DOA ({reason})")
            continue
        name = f"doa_{label}.csv"
        (out / name).write_text(b.to_csv())
        entries.append({"label": label, "sag": sag, "exists": True, "area": b.area,
                        "csv": name, "boundary": b.to_dict(), "reason": None})
        print(f"{label}: DOA area {b.area:.6g}, SEP {b.sep.delta0:.6f}, UEP {b.uep.delta0:.6f}")
    _write_json(out / "doa.json", "doa", {"grid_states": entries})


def _fault_scenario(cfg: RunConfig, sc: Scenario) -> FaultScenario:
    return FaultScenario(cfg.vsg, cfg.grid, cfg.grid.scaled(sc.sag), cfg.grid.scaled(sc.post_sag),
                         sc.fault_time, sc.clearing)


def _simulate_job(args):
    cfg, sc = args
    return simulate_scenario(_fault_scenario(cfg, sc), cfg.integrator)


def cmd_simulate(cfg: RunConfig, out: Path) -> None:
    if not cfg.scenarios:
        raise ConfigError("scenarios", "simulate needs at least one scenario")
    verdicts = parallel_map(_simulate_job, [(cfg, sc) for sc in cfg.scenarios])
    entries = []
    for sc, v in zip(cfg.scenarios, verdicts):
        name = f"simulate_{sc.name}.csv"
        v.trajectory.to_csv(out / name)
        entries.append({"name": sc.name, "sag": sc.sag, "csv": name, **v.to_dict()})
        print(f"{sc.name}: {v.fault_type.value} {'stable' if v.stable else 'LOS'}")
    _write_json(out / "simulate.json", "simulate", {"scenarios": entries})


def _attempt(fn, *args, **kwargs) -> Dict[str, Any]:
    try:
        return {"value": fn(*args, **kwargs), "error": None}
    except AnalysisError as exc:
        return {"value": None, "error": f"{type(exc).__name__}: {exc}"}


def _cca_job(args):
    cfg, sc = args
    vsg, pre = cfg.vsg, cfg.grid
    fault, post = pre.scaled(sc.sag), pre.scaled(sc.post_sag)
    return {
        "name": sc.name,
        "sag": sc.sag,
        "fault_type": classify_fault(vsg, pre, fault).value,
        "eac": _attempt(cca_eac, vsg, pre, fault, post, cfg.eac_mode),
        "doa": _attempt(cca_doa, vsg, pre, fault, post, step=cfg.integrator.step),
        "bruteforce": _attempt(cca_bruteforce, vsg, pre, fault, post, cfg.integrator),
    }


def cmd_cca(cfg: RunConfig, out: Path) -> None:
    if not cfg.scenarios:
        raise ConfigError("scenarios", "cca needs at least one scenario")
    rows = parallel_map(_cca_job, [(cfg, sc) for sc in cfg.scenarios])
    for r in rows:
        cells = " ".join(f"{k}={r[k]['value']:.6f}" if r[k]["value"] is not None else f"{k}=n/a"
                         for k in ("eac", "doa", "bruteforce"))
        print(f"{r['name']}: {r['fault_type']} {cells}")
    _write_json(out / "cca.json", "cca", {"scenarios": rows})


def swept(vsg: VsgParams, grid: GridParams, parameter: str, value: float):
    """Apply one sweep value; ``R_g/X_g`` keeps the impedance magnitude fixed."""
    if parameter == "D":
        return vsg.with_(damping_d=value), grid
    if parameter == "H":
        return vsg.with_(inertia_2h=2.0 * value), grid
    if parameter == "K_q":
        return vsg.with_(droop_kq=value), grid
    if parameter == "P_ref":
        return vsg.with_(p_ref=value), grid
    if parameter == "sag":
        return vsg, grid.scaled(value)
    if parameter == "R_g/X_g":
        z = math.sqrt(grid.z2)
        xg = z / math.sqrt(1.0 + value * value)
        return vsg, grid.with_(rg=value * xg, xg=xg)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def _sweep_job(args):
    cfg, parameter, value = args
    vsg, grid = swept(cfg.vsg, cfg.grid, parameter, value)
    try:
        b = _estimate(cfg, vsg, grid)
    except NoEquilibrium:
        return value, None
    return value, b


def cmd_sweep(cfg: RunConfig, out: Path) -> None:
    if not cfg.sweeps:
        raise ConfigError("sweeps", "sweep needs at least one sweep specification")
    jobs = [(cfg, p, v) for p, values in cfg.sweeps for v in values]
    results = iter(parallel_map(_sweep_job, jobs))
    sweeps = []
    for parameter, values in cfg.sweeps:
        slug = parameter.replace("/", "_over_")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param_value", "doa_area", "sep_delta", "uep_delta"])
        points = []
        for i, _ in enumerate(values):
            value, b = next(results)
            if b is None:
                points.append({"param_value": value, "doa_area": 0.0, "sep_delta": None,
                               "uep_delta": None, "no_equilibrium": True, "boundary_csv": None})
                w.writerow([repr(value), repr(0.0), "", ""])
                print(f"{parameter}={value!r}: no equilibrium (area 0)")
                continue
            name = f"sweep_{slug}_{i}.csv"
            (out / name).write_text(b.to_csv())
            points.append({"param_value": value, "doa_area": b.area, "sep_delta": b.sep.delta0,
                           "uep_delta": b.uep.delta0, "no_equilibrium": False, "boundary_csv": name})
            w.writerow([repr(value), repr(b.area), repr(b.sep.delta0), repr(b.uep.delta0)])
            print(f"{parameter}={value!r}: area {b.area:.6g}")
        summary = f"sweep_{slug}.csv"
        (out / summary).write_text(buf.getvalue())
        sweeps.append({"parameter": parameter, "summary_csv": summary, "points": points})
    _write_json(out / "sweep.json", "sweep", {"sweeps": sweeps})


COMMANDS = {
    "equilibria": cmd_equilibria,
    "portrait": cmd_portrait,
    "doa": cmd_doa,
    "simulate": cmd_simulate,
    "cca": cmd_cca,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vsg-doa", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (default: config output_dir or ./vsg_doa_out)")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted config override, value parsed as JSON; repeatable")
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        out = Path(args.out or cfg.output_dir or DEFAULT_OUT)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AnalysisError as exc:
        print(f"analysis error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # parameter invariants rejected by the model types
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
