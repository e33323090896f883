"""Coupled atom-membrane optomechanics: model, dynamics and virtual experiments."""

__version__ = "0.1.0"

from .errors import AtomemError, ConfigError, NumericalError
from .constants import PhysicalConstants, AtomSpecies, CODATA, RB87_D2
from .params import (
    LatticeConfig,
    MembraneConfig,
    AtomConfig,
    DerivedParams,
    dipole_depth,
    trap_frequency,
    coupling_constant,
    membrane_at_power,
    derive,
)

__all__ = [
    "AtomemError",
    "ConfigError",
    "NumericalError",
    "PhysicalConstants",
    "AtomSpecies",
    "CODATA",
    "RB87_D2",
    "LatticeConfig",
    "MembraneConfig",
    "AtomConfig",
    "DerivedParams",
    "dipole_depth",
    "trap_frequency",
    "coupling_constant",
    "membrane_at_power",
    "derive",
]
