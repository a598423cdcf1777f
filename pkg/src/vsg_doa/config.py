"""Run configuration: JSON file, reference defaults, dotted overrides and validation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import jsonschema

from .doa import SeedConfig, SeedMode
from .equilibrium import VpccMode
from .errors import ConfigError
from .integrator import IntegratorConfig
from .model import (
    PAPER_D,
    PAPER_F0,
    PAPER_H,
    PAPER_KQ,
    PAPER_LG,
    PAPER_PREF,
    PAPER_QREF,
    PAPER_RG,
    PAPER_VG_RMS,
    PAPER_VN,
    SQRT2,
    GridParams,
    VsgParams,
)
from .transient import AtAngle, AtTime, Clearing, Never

SCHEMA_VERSION = 1

SWEEP_PARAMETERS = ("D", "H", "K_q", "P_ref", "sag", "R_g/X_g")

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_RANGE = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "defaults": {"enum": ["paper", "none"]},
        "vsg": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"H": _POS, "D": _NONNEG, "K_q": _NONNEG, "P_ref": {"type": "number"},
                           "Q_ref": {"type": "number"}, "V_0": _POS, "f_0": _POS},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "voltage_unit": {"enum": ["rms", "amplitude", "pu"]},
                "V_g": _NONNEG,
                "base": _POS,
                "R_g": _NONNEG,
                "L_g": _POS,
                "X_g": _POS,
            },
        },
        "equilibrium_mode": {"enum": [m.value for m in VpccMode]},
        "eac_mode": {"enum": [m.value for m in VpccMode]},
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"step": _POS, "max_time": _POS},
        },
        "doa": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed_mode": {"enum": [m.value for m in SeedMode]},
                "seed_count": {"type": "integer", "minimum": 4},
                "seed_radius": _POS,
                "max_time": _POS,
                "half_width": _POS,
                "domega_max": _POS,
            },
        },
        "portrait": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sag": _POS,
                "delta_range": _RANGE,
                "domega_range": _RANGE,
                "n_delta": {"type": "integer", "minimum": 1},
                "n_domega": {"type": "integer", "minimum": 1},
                "max_time": _POS,
                "sample_every": {"type": "integer", "minimum": 1},
            },
        },
        "scenarios": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["sag"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "sag": _NONNEG,
                    "post_sag": _NONNEG,
                    "fault_time": _NONNEG,
                    "clearing": {
                        "oneOf": [
                            {"const": "never"},
                            {"type": "object", "additionalProperties": False,
                             "required": ["angle"], "properties": {"angle": {"type": "number"}}},
                            {"type": "object", "additionalProperties": False,
                             "required": ["time"], "properties": {"time": _NONNEG}},
                        ]
                    },
                },
            },
        },
        "sweeps": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["parameter", "values"],
                "properties": {
                    "parameter": {"enum": list(SWEEP_PARAMETERS)},
                    "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                },
            },
        },
        "output_dir": {"type": "string"},
    },
}


def paper_defaults() -> Dict[str, Any]:
    """Reference design values as a config fragment."""
    return {
        "vsg": {"H": PAPER_H, "D": PAPER_D, "K_q": PAPER_KQ, "P_ref": PAPER_PREF,
                "Q_ref": PAPER_QREF, "V_0": PAPER_VN, "f_0": PAPER_F0},
        "grid": {"voltage_unit": "rms", "V_g": PAPER_VG_RMS, "R_g": PAPER_RG, "L_g": PAPER_LG},
        "scenarios": [
            {"name": "sag_0.7", "sag": 0.7, "fault_time": 1.5, "clearing": "never"},
            {"name": "sag_0.57", "sag": 0.57, "fault_time": 1.5, "clearing": "never"},
            {"name": "sag_0.5", "sag": 0.5, "fault_time": 1.5, "clearing": "never"},
        ],
    }


@dataclass(frozen=True)
class Scenario:
    name: str
    sag: float
    post_sag: float = 1.0
    fault_time: float = 0.0
    clearing: Clearing = Never()


@dataclass(frozen=True)
class PortraitSpec:
    sag: float = 1.0
    delta_range: Tuple[float, float] = (-math.pi, 2.0 * math.pi)
    domega_range: Tuple[float, float] = (-100.0, 100.0)
    n_delta: int = 7
    n_domega: int = 5
    max_time: float = 3.0
    sample_every: int = 10


@dataclass(frozen=True)
class DoaSpec:
    seeds: SeedConfig = field(default_factory=SeedConfig)
    max_time: float = 5.0
    half_width: float = 2.0 * math.pi
    domega_max: float = 150.0


@dataclass(frozen=True)
class RunConfig:
    vsg: VsgParams
    grid: GridParams
    scenarios: Tuple[Scenario, ...] = ()
    sweeps: Tuple[Tuple[str, Tuple[float, ...]], ...] = ()
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    doa: DoaSpec = field(default_factory=DoaSpec)
    portrait: PortraitSpec = field(default_factory=PortraitSpec)
    equilibrium_mode: VpccMode = VpccMode.CONSTANT
    eac_mode: VpccMode = VpccMode.CONSTANT
    output_dir: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict, compare=False)


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``key.path=value`` overrides; values are parsed as JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--override", f"expected key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        if not all(parts):
            raise ConfigError("--override", f"malformed key {key!r}")
        node = doc
        for i, part in enumerate(parts[:-1]):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    raise ConfigError(".".join(parts[:i + 1]), "no such list element") from None
                continue
            node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(".".join(parts[:i + 1]), "cannot override inside a scalar")
        last = parts[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = _parse_value(text)
            except (ValueError, IndexError):
                raise ConfigError(key, "no such list element") from None
        else:
            node[last] = _parse_value(text)
    return doc


def _path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate_document(doc: Dict[str, Any]) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        raise ConfigError(_path(err), err.message)


def _require(section: Dict[str, Any], key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}.{key}", "required value is missing")
    return section[key]


def _grid_from(doc: Dict[str, Any], omega0: float) -> GridParams:
    g = doc.get("grid", {})
    unit = _require(g, "voltage_unit", "grid")
    vg = float(_require(g, "V_g", "grid"))
    if unit == "rms":
        amplitude = vg * SQRT2
    elif unit == "amplitude":
        amplitude = vg
    else:
        amplitude = vg * float(_require(g, "base", "grid"))
    if unit != "pu" and "base" in g:
        raise ConfigError("grid.base", "a base voltage is only meaningful with voltage_unit 'pu'")
    if ("L_g" in g) == ("X_g" in g):
        raise ConfigError("grid.X_g", "give exactly one of L_g or X_g")
    xg = float(g["X_g"]) if "X_g" in g else omega0 * float(g["L_g"])
    return GridParams(vg=amplitude, rg=float(_require(g, "R_g", "grid")), xg=xg)


def _vsg_from(doc: Dict[str, Any]) -> VsgParams:
    v = doc.get("vsg", {})
    keys = ("H", "D", "K_q", "P_ref", "Q_ref", "V_0", "f_0")
    for k in keys:
        _require(v, k, "vsg")
    return VsgParams(
        inertia_2h=2.0 * float(v["H"]),
        damping_d=float(v["D"]),
        droop_kq=float(v["K_q"]),
        p_ref=float(v["P_ref"]),
        q_ref=float(v["Q_ref"]),
        v0=float(v["V_0"]),
        omega0=2.0 * math.pi * float(v["f_0"]),
    )


def _clearing_from(spec: Any) -> Clearing:
    if spec is None or spec == "never":
        return Never()
    if "angle" in spec:
        return AtAngle(float(spec["angle"]))
    return AtTime(float(spec["time"]))


def build_config(doc: Dict[str, Any]) -> RunConfig:
    """Validate a raw document (after defaults/overrides) and build a :class:`RunConfig`."""
    validate_document(doc)
    if doc.get("defaults") == "paper":
        base = paper_defaults()
        user_grid = doc.get("grid", {})
        # a user-chosen reactance form replaces the default one instead of clashing with it
        if "X_g" in user_grid:
            base["grid"].pop("L_g")
        doc = _merge(base, {k: v for k, v in doc.items() if k != "defaults"})
        validate_document(doc)
    vsg = _vsg_from(doc)
    grid = _grid_from(doc, vsg.omega0)

    scenarios = []
    names = set()
    for i, s in enumerate(doc.get("scenarios", [])):
        name = s.get("name", f"scenario_{i}")
        if name in names:
            raise ConfigError(f"scenarios.{i}.name", f"duplicate scenario name {name!r}")
        names.add(name)
        clearing = _clearing_from(s.get("clearing"))
        fault_time = float(s.get("fault_time", 0.0))
        if isinstance(clearing, AtTime) and clearing.t < fault_time:
            raise ConfigError(f"scenarios.{i}.clearing.time", "clearing time precedes the fault")
        scenarios.append(Scenario(name, float(s["sag"]), float(s.get("post_sag", 1.0)), fault_time, clearing))

    sweeps = tuple((sw["parameter"], tuple(float(x) for x in sw["values"])) for sw in doc.get("sweeps", []))

    it = doc.get("integrator", {})
    step = float(it.get("step", 1e-4))
    max_time = float(it.get("max_time", 10.0))
    if max_time < step:
        raise ConfigError("integrator.max_time", "must be at least one step")
    integrator = IntegratorConfig(step=step, max_time=max_time)

    d = doc.get("doa", {})
    seeds = SeedConfig(count=int(d.get("seed_count", 200)), radius=float(d.get("seed_radius", 1e-3)),
                       mode=SeedMode(d.get("seed_mode", SeedMode.SEPARATRIX_PAIR.value)))
    doa = DoaSpec(seeds, float(d.get("max_time", 5.0)), float(d.get("half_width", 2.0 * math.pi)),
                  float(d.get("domega_max", 150.0)))

    pt = doc.get("portrait", {})
    base = PortraitSpec()
    portrait = PortraitSpec(
        sag=float(pt.get("sag", base.sag)),
        delta_range=tuple(pt.get("delta_range", base.delta_range)),
        domega_range=tuple(pt.get("domega_range", base.domega_range)),
        n_delta=int(pt.get("n_delta", base.n_delta)),
        n_domega=int(pt.get("n_domega", base.n_domega)),
        max_time=float(pt.get("max_time", base.max_time)),
        sample_every=int(pt.get("sample_every", base.sample_every)),
    )
    for key, rng in (("delta_range", portrait.delta_range), ("domega_range", portrait.domega_range)):
        if not rng[0] <= rng[1]:
            raise ConfigError(f"portrait.{key}", "lower bound exceeds upper bound")

    return RunConfig(
        vsg=vsg,
        grid=grid,
        scenarios=tuple(scenarios),
        sweeps=sweeps,
        integrator=integrator,
        doa=doa,
        portrait=portrait,
        equilibrium_mode=VpccMode(doc.get("equilibrium_mode", VpccMode.CONSTANT.value)),
        eac_mode=VpccMode(doc.get("eac_mode", VpccMode.CONSTANT.value)),
        output_dir=doc.get("output_dir"),
        raw=doc,
    )


def load_config(path, overrides: Sequence[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    doc = apply_overrides(doc, overrides)
    try:
        return build_config(doc)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<root>", str(exc)) from None
