"""Cosymplectic and mechanical presymplectic mechanics on coordinate charts,
with momentum maps and reduction of evolution dynamics."""

from .errors import (
    CosymError, EmptyLevelSet, InputError, InvariantError, NumericError, ParseError,
    ValidationError,
)
from .fields import (
    CoordinateChart, ExcludedSet, OneFormField, ScalarField, SmoothMap, TwoFormField, VectorField,
    darboux_chart,
)
from .integrate import RunConfig, Trajectory, rk4_integrate
from .reports import Report
from .scenarios import BUILTINS, Scenario, load_scenario
from .structures import (
    CosymplecticStructure, HamiltonianSectionData, MechanicalPresymplecticStructure,
)
from .symmetry import AbelianAction, Cocycle, MomentumMap

__version__ = "0.1.0"

__all__ = [
    "CosymError", "EmptyLevelSet", "InputError", "InvariantError", "NumericError", "ParseError",
    "ValidationError", "CoordinateChart", "ExcludedSet", "OneFormField", "ScalarField",
    "SmoothMap", "TwoFormField", "VectorField", "darboux_chart", "RunConfig", "Trajectory",
    "rk4_integrate", "Report", "BUILTINS", "Scenario", "load_scenario", "CosymplecticStructure",
    "HamiltonianSectionData", "MechanicalPresymplecticStructure", "AbelianAction", "Cocycle",
    "MomentumMap",
]
