"""Physical constants and atomic species data (SI units, angular frequencies)."""

from dataclasses import dataclass
import math

import scipy.constants as sc

from .errors import ConfigError


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = sc.hbar
    c: float = sc.c
    kB: float = sc.k

    def __post_init__(self):
        for name in ("hbar", "c", "kB"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"physical constant {name} must be positive, got {value!r}")


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level description of the trapping transition.

    ``line_strength`` scales the two-level dipole potential. For an alkali
    atom in linearly polarized light detuned far from D2 but much less than
    the fine-structure splitting, only the D2 line contributes and it carries
    2/3 of the two-level strength. Set it to 1 for a pure two-level atom.
    """

    mass: float
    wavelength: float
    linewidth: float
    line_strength: float = 2.0 / 3.0
    c: float = sc.c

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"atomic mass must be positive, got {self.mass!r}")
        if not self.wavelength > 0:
            raise ConfigError(f"transition wavelength must be positive, got {self.wavelength!r}")
        if not self.linewidth > 0:
            raise ConfigError(f"natural linewidth must be positive, got {self.linewidth!r}")
        if not 0 < self.line_strength <= 1:
            raise ConfigError(f"line strength must lie in (0, 1], got {self.line_strength!r}")

    @property
    def omega0(self) -> float:
        """Transition angular frequency (rad/s)."""
        return 2 * math.pi * self.c / self.wavelength


CODATA = PhysicalConstants()

# 87Rb D2 line (Steck, "Rubidium 87 D Line Data")
RB87_D2 = AtomSpecies(
    mass=86.909180527 * sc.atomic_mass,
    wavelength=780.241209686e-9,
    linewidth=2 * math.pi * 6.0666e6,
)
