"""Domain-of-attraction and transient-stability analysis of a grid-connected VSG."""

from .doa import DoaBoundary, SeedConfig, SeedMode, contains, doa_area, estimate_doa
from .equilibrium import (
    Equilibrium,
    Kind,
    NoEquilibrium,
    VpccMode,
    classify,
    find_equilibria,
    jacobian_at,
    operating_pair,
)
from .errors import AnalysisError, ConfigError
from .integrator import IntegratorConfig, Trajectory, Window, integrate
from .model import GridParams, PhaseState, VsgParams, paper_grid, paper_vsg
from .transient import (
    AtAngle,
    AtTime,
    FaultScenario,
    FaultType,
    Never,
    StabilityVerdict,
    cca_bruteforce,
    cca_doa,
    cca_eac,
    classify_fault,
    simulate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "AtAngle",
    "AtTime",
    "cca_bruteforce",
    "cca_doa",
    "cca_eac",
    "classify",
    "classify_fault",
    "ConfigError",
    "contains",
    "doa_area",
    "DoaBoundary",
    "Equilibrium",
    "estimate_doa",
    "FaultScenario",
    "FaultType",
    "find_equilibria",
    "GridParams",
    "integrate",
    "IntegratorConfig",
    "jacobian_at",
    "Kind",
    "Never",
    "NoEquilibrium",
    "operating_pair",
    "paper_grid",
    "paper_vsg",
    "PhaseState",
    "SeedConfig",
    "SeedMode",
    "simulate_scenario",
    "StabilityVerdict",
    "Trajectory",
    "VpccMode",
    "VsgParams",
    "Window",
]
