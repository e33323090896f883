"""Laboratory parameters and the model coefficients derived from them.

Every frequency and rate is stored as an angular quantity (rad/s). Conversion
to Hz happens only at the CLI/CSV boundary.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from .constants import CODATA, RB87_D2, AtomSpecies, PhysicalConstants
from .errors import (
    ConfigError,
    DetuningTooSmallError,
    NonFiniteResultError,
    OutOfCalibrationRangeError,
)


@dataclass(frozen=True)
class LatticeConfig:
    """Lattice laser and membrane mirror.

    Attributes
    ----------
    power : float
        Incoming beam power at the atoms (W).
    detuning : float
        Laser detuning from the atomic transition (rad/s), negative = red.
    wavelength : float
        Laser wavelength (m).
    waist : float
        1/e^2 intensity radius at the atoms (m).
    reflectivity : float
        Intensity reflectivity of the membrane.
    transmittivity : float
        One-way intensity transmittivity of the optics between atoms and membrane.
    """

    power: float
    detuning: float
    wavelength: float
    waist: float
    reflectivity: float
    transmittivity: float

    def __post_init__(self):
        if not self.power >= 0:
            raise ConfigError(f"laser power must be >= 0, got {self.power!r}")
        if not self.waist > 0:
            raise ConfigError(f"beam waist must be > 0, got {self.waist!r}")
        if not self.wavelength > 0:
            raise ConfigError(f"laser wavelength must be > 0, got {self.wavelength!r}")
        if not 0 <= self.reflectivity <= 1:
            raise ConfigError(f"reflectivity must lie in [0, 1], got {self.reflectivity!r}")
        if not 0 <= self.transmittivity <= 1:
            raise ConfigError(f"transmittivity must lie in [0, 1], got {self.transmittivity!r}")
        if self.detuning == 0 or not math.isfinite(self.detuning):
            raise ConfigError(f"detuning must be finite and non-zero, got {self.detuning!r}")

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    def omega(self, constants: PhysicalConstants = CODATA) -> float:
        """Laser angular frequency."""
        return 2 * math.pi * constants.c / self.wavelength

    @property
    def rt(self) -> float:
        return self.reflectivity * self.transmittivity

    def at_power(self, power: float) -> "LatticeConfig":
        return replace(self, power=power)


def _check_table(name, table):
    if len(table) == 0:
        raise ConfigError(f"{name} calibration table is empty")
    powers = [p for p, _ in table]
    values = [v for _, v in table]
    if any(b <= a for a, b in zip(powers, powers[1:])):
        raise ConfigError(f"{name} calibration powers must be strictly increasing: {powers}")
    if any(not p >= 0 for p in powers):
        raise ConfigError(f"{name} calibration powers must be >= 0: {powers}")
    if any(not v > 0 for v in values):
        raise ConfigError(f"{name} calibration values must be > 0: {values}")


@dataclass(frozen=True)
class MembraneConfig:
    """Membrane mode with empirical power dependence.

    ``frequency_table`` holds ``(P [W], omega_m [rad/s])`` pairs and
    ``quality_table`` ``(P [W], Q)`` pairs, both strictly increasing in P.
    """

    mass: float
    frequency_table: tuple
    quality_table: tuple

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"membrane mass must be > 0, got {self.mass!r}")
        object.__setattr__(self, "frequency_table", tuple((float(p), float(v)) for p, v in self.frequency_table))
        object.__setattr__(self, "quality_table", tuple((float(p), float(v)) for p, v in self.quality_table))
        _check_table("frequency", self.frequency_table)
        _check_table("quality", self.quality_table)

    @property
    def power_range(self) -> tuple:
        """Interval of P covered by both calibration tables."""
        lo = max(self.frequency_table[0][0], self.quality_table[0][0])
        hi = min(self.frequency_table[-1][0], self.quality_table[-1][0])
        return lo, hi


@dataclass(frozen=True)
class AtomConfig:
    number: float
    temperature: float
    cooling_rate: float
    dephasing_rate: float

    def __post_init__(self):
        if not self.number >= 0:
            raise ConfigError(f"atom number must be >= 0, got {self.number!r}")
        if not self.temperature >= 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature!r}")
        if not self.cooling_rate >= 0:
            raise ConfigError(f"cooling rate must be >= 0, got {self.cooling_rate!r}")
        if not self.dephasing_rate >= 0:
            raise ConfigError(f"dephasing rate must be >= 0, got {self.dephasing_rate!r}")

    @property
    def gamma_at(self) -> float:
        return self.cooling_rate + self.dephasing_rate


@dataclass(frozen=True)
class DerivedParams:
    """Coefficients of the coupled atom-membrane model.

    Attributes
    ----------
    V0 : float
        Peak-to-peak modulation depth of the lattice potential (J).
    omega_at, omega_m : float
        Atomic trap and membrane mode angular frequencies.
    gamma_m, gamma_at : float
        Motional damping rates of membrane and atoms.
    delta : float
        ``omega_at - omega_m``.
    g : float
        Coupling constant.
    rt : float
        Product of membrane reflectivity and optics transmittivity.
    N, m, M, k : float
        Atom number, atomic mass, membrane effective mass, lattice wavenumber.
    """

    V0: float
    omega_at: float
    omega_m: float
    gamma_m: float
    gamma_at: float
    delta: float
    g: float
    rt: float
    N: float
    m: float
    M: float
    k: float

    @classmethod
    def build(cls, *, omega_at, omega_m, gamma_m, gamma_at, rt, N, m, M, k, V0=float("nan")):
        """Assemble from independent inputs, computing ``delta`` and ``g``."""
        return cls(
            V0=V0,
            omega_at=omega_at,
            omega_m=omega_m,
            gamma_m=gamma_m,
            gamma_at=gamma_at,
            delta=omega_at - omega_m,
            g=coupling_constant(N, m, omega_at, M, omega_m),
            rt=rt,
            N=N,
            m=m,
            M=M,
            k=k,
        )

    def with_(self, **changes) -> "DerivedParams":
        """Copy with changes; ``delta`` and ``g`` are recomputed unless given."""
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        if "delta" not in changes:
            fields["delta"] = fields["omega_at"] - fields["omega_m"]
        if "g" not in changes:
            fields["g"] = coupling_constant(fields["N"], fields["m"], fields["omega_at"], fields["M"], fields["omega_m"])
        return DerivedParams(**fields)


def dipole_depth(lattice: LatticeConfig, species: AtomSpecies = RB87_D2,
                 constants: PhysicalConstants = CODATA) -> float:
    """Peak-to-peak depth V0 of the sinusoidal lattice modulation (J).

    The membrane returns a beam of intensity ``r t^2 I_in`` to the atoms, so
    the interference term has amplitude ``2 t sqrt(r) I_in`` and the
    potential ``-(V0/2) cos(2kz)`` has ``V0 = 4 t sqrt(r) I_in |U|``, with
    ``I_in = 2P/(pi w0^2)`` and the far-detuned dipole coefficient
    ``U = line_strength * (3 pi c^2 / 2 omega0^3) (Gamma / Delta)``.
    """
    if not abs(lattice.detuning) > 100 * species.linewidth:
        raise DetuningTooSmallError(
            f"|detuning| = {abs(lattice.detuning):.3e} rad/s must exceed 100 linewidths "
            f"({100 * species.linewidth:.3e} rad/s)"
        )
    c = constants.c
    omega0 = 2 * math.pi * c / species.wavelength
    u_coef = species.line_strength * 3 * math.pi * c**2 / (2 * omega0**3) * species.linewidth / lattice.detuning
    intensity = 2 * lattice.power / (math.pi * lattice.waist**2)
    v0 = abs(u_coef) * 4 * lattice.transmittivity * math.sqrt(lattice.reflectivity) * intensity
    if not math.isfinite(v0):
        raise NonFiniteResultError(f"dipole depth overflowed: {v0!r}")
    return v0


def trap_frequency(V0, species: AtomSpecies = RB87_D2, k: float = None):
    """Harmonic trap frequency ``k sqrt(2 V0 / m)`` of a lattice well (rad/s).

    Works elementwise on arrays. ``k`` defaults to the transition wavenumber.
    """
    if k is None:
        k = 2 * math.pi / species.wavelength
    V0 = np.asarray(V0, dtype=float)
    if np.any(V0 < 0):
        raise ConfigError("lattice depth must be >= 0")
    out = k * np.sqrt(2 * V0 / species.mass)
    return float(out) if out.ndim == 0 else out


def coupling_constant(N, m, omega_at, M, omega_m):
    """``g = (omega_at/2) sqrt(N m omega_at / (M omega_m))``; array-friendly."""
    if np.any(np.asarray(M) <= 0) or np.any(np.asarray(omega_m) <= 0):
        raise ConfigError("membrane mass and frequency must be > 0")
    g = 0.5 * omega_at * np.sqrt(N * m * omega_at / (M * omega_m))
    return float(g) if np.ndim(g) == 0 else g


def _interp(power, table, name):
    powers = [p for p, _ in table]
    values = [v for _, v in table]
    if not powers[0] <= power <= powers[-1]:
        raise OutOfCalibrationRangeError(
            f"P = {power * 1e3:g} mW outside the {name} calibration range "
            f"[{powers[0] * 1e3:g}, {powers[-1] * 1e3:g}] mW"
        )
    return float(np.interp(power, powers, values))


def membrane_at_power(power: float, membrane: MembraneConfig) -> tuple:
    """Membrane ``(omega_m, gamma_m)`` at lattice power ``power``.

    Piecewise-linear in P over the calibration tables; extrapolation is
    refused. ``gamma_m = omega_m / Q``.
    """
    omega_m = _interp(power, membrane.frequency_table, "frequency")
    quality = _interp(power, membrane.quality_table, "quality")
    return omega_m, omega_m / quality


def derive(lattice: LatticeConfig, membrane: MembraneConfig, atoms: AtomConfig,
           species: AtomSpecies = RB87_D2, constants: PhysicalConstants = CODATA,
           detuning_override: float = None) -> DerivedParams:
    """Model coefficients for one laboratory configuration.

    ``detuning_override`` pins ``omega_at = omega_m + detuning_override``
    instead of the value computed from the lattice depth, for experiments
    prepared at a chosen detuning (e.g. exactly on resonance).
    """
    V0 = dipole_depth(lattice, species, constants)
    omega_m, gamma_m = membrane_at_power(lattice.power, membrane)
    if detuning_override is None:
        omega_at = trap_frequency(V0, species, lattice.k)
    else:
        omega_at = omega_m + detuning_override
        if not omega_at > 0:
            raise ConfigError("detuning override leaves a non-positive trap frequency")
    if not omega_at > 0:
        raise ConfigError("trap frequency is zero; lattice power must be > 0")
    return DerivedParams.build(
        V0=V0,
        omega_at=omega_at,
        omega_m=omega_m,
        gamma_m=gamma_m,
        gamma_at=atoms.gamma_at,
        rt=lattice.rt,
        N=atoms.number,
        m=species.mass,
        M=membrane.mass,
        k=lattice.k,
    )
