"""Finite-temperature ensemble in the transverse Gaussian lattice profile.

Each atom sits at a radius ``rho`` where the local lattice depth is
``V0 exp(-2 rho^2 / w0^2)`` and therefore oscillates at its own trap
frequency. The membrane damping contributed by the ensemble is the sum of the
single-atom adiabatic rates, with the atomic damping set to the laser-cooling
rate alone.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate

from .constants import CODATA, RB87_D2, AtomSpecies, PhysicalConstants
from .errors import ConfigError, DegenerateDistributionError, EmptySampleError, ZeroDampingError
from .params import (
    AtomConfig,
    LatticeConfig,
    MembraneConfig,
    coupling_constant,
    dipole_depth,
    membrane_at_power,
    trap_frequency,
)
from .results import SweepResult

import logging

log = logging.getLogger(__name__)

# Default truncation: atoms inside the 1/e^2 beam radius.
DEFAULT_TRUNCATION_FRACTION = 1 - math.exp(-2)


@dataclass(frozen=True)
class ThermalSample:
    rho: float
    depth: float
    omega: float
    weight: float


@dataclass(frozen=True)
class ThermalSamples:
    """Sample set stored column-wise; indexing yields :class:`ThermalSample`."""

    rho: np.ndarray
    depth: np.ndarray
    omega: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.rho)

    def __getitem__(self, i) -> ThermalSample:
        return ThermalSample(float(self.rho[i]), float(self.depth[i]), float(self.omega[i]), float(self.weight[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class EnsembleConfig:
    """Thermal sampling settings.

    ``truncation_energy`` bounds the transverse potential energy
    ``V0 - V0_loc(rho)`` of sampled positions. ``None`` truncates at the beam
    radius ``w0``, i.e. at ``V0 (1 - e^-2)`` for whatever ``V0`` applies.
    """

    temperature: float
    samples: int = 10_000
    seed: int = 0
    truncation_energy: float = None
    reseed_per_point: bool = False

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"ensemble temperature must be > 0, got {self.temperature!r}")
        if int(self.samples) != self.samples or self.samples < 1000:
            raise ConfigError(f"sample count must be an integer >= 1000, got {self.samples!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.truncation_energy is not None and not self.truncation_energy >= 0:
            raise ConfigError("truncation energy must be >= 0")


def local_depth(rho, V0, w0):
    """Lattice depth at radial distance ``rho`` from the beam axis."""
    return V0 * np.exp(-2 * np.asarray(rho) ** 2 / w0**2)


def truncation_s(V0, truncation_energy=None):
    """Truncation in ``s = rho^2 / w0^2`` for a given depth."""
    if truncation_energy is None:
        return 1.0
    if V0 <= 0 or truncation_energy <= 0:
        raise DegenerateDistributionError("truncation radius is zero")
    if truncation_energy >= V0:
        raise DegenerateDistributionError(
            "truncation energy must be below the lattice depth; the transverse "
            "Boltzmann density is not normalisable otherwise")
    return -0.5 * math.log1p(-truncation_energy / V0)


def _sample_s(beta, s_max, n, rng):
    # Target density in s is exp(-beta u(s)), u(s) = 1 - exp(-2s), concave.
    # A truncated exponential along the chord of beta*u lies above it, so
    # rejection with acceptance exp(-beta u(s) + c s) <= 1 is exact.
    c = beta * -math.expm1(-2 * s_max) / s_max
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(64, int(1.3 * (n - filled)) + 16)
        u = rng.random(m)
        if c * s_max < 1e-12:
            s = u * s_max
        else:
            s = -np.log1p(u * np.expm1(-c * s_max)) / c
        accept = rng.random(m) < np.exp(-beta * -np.expm1(-2 * s) + c * s)
        take = s[accept][: n - filled]
        out[filled:filled + take.size] = take
        filled += take.size
    return out


def sample_thermal(V0, w0, ensemble: EnsembleConfig, species: AtomSpecies = RB87_D2, k=None,
                   constants: PhysicalConstants = CODATA) -> ThermalSamples:
    """Draw atom positions from the 2D Boltzmann density in the transverse profile.

    The radial density is ``rho exp(-(V0 - V0_loc(rho)) / k_B T)`` up to the
    truncation radius. Deterministic for a fixed seed; all weights equal.
    """
    if not w0 > 0:
        raise ConfigError("beam waist must be > 0")
    if not V0 > 0:
        raise DegenerateDistributionError("lattice depth is zero; no trapped distribution")
    kT = constants.kB * ensemble.temperature
    if V0 <= kT:
        log.warning("lattice depth %.3g uK does not exceed k_B T = %.3g uK",
                    V0 / constants.kB * 1e6, ensemble.temperature * 1e6)
    s_max = truncation_s(V0, ensemble.truncation_energy)
    rng = np.random.Generator(np.random.PCG64(ensemble.seed))
    s = _sample_s(V0 / kT, s_max, int(ensemble.samples), rng)
    rho = w0 * np.sqrt(s)
    depth = V0 * np.exp(-2 * s)
    omega = trap_frequency(depth, species, k)
    n = len(s)
    return ThermalSamples(rho=rho, depth=depth, omega=omega, weight=np.full(n, 1.0 / n))


def _single_atom_rates(omega_loc, omega_m, M, gamma_c, rt, m):
    g1 = coupling_constant(1.0, m, omega_loc, M, omega_m)
    delta = omega_loc - omega_m
    return gamma_c * g1**2 * rt / (delta**2 + (gamma_c / 2) ** 2)


def ensemble_gamma(samples: ThermalSamples, N, omega_m, M, gamma_c, rt, m=RB87_D2.mass, *, with_error=False):
    """Membrane damping added by ``N`` atoms distributed as ``samples`` (1/s).

    Sum over samples of the weighted single-atom rate
    ``gamma_c g1^2 rt / (delta_i^2 + (gamma_c/2)^2)``, scaled by ``N``.
    With ``with_error`` also returns the Monte Carlo standard error.
    """
    if len(samples) == 0:
        raise EmptySampleError("no thermal samples")
    if not gamma_c > 0:
        raise ZeroDampingError("cooling rate must be > 0")
    rates = _single_atom_rates(np.asarray(samples.omega), omega_m, M, gamma_c, rt, m)
    w = np.asarray(samples.weight)
    value = N * float(np.sum(w * rates))
    if not with_error:
        return value
    n = len(rates)
    mean = float(np.sum(w * rates))
    var = float(np.sum(w * (rates - mean) ** 2)) * n / (n - 1)
    return value, N * math.sqrt(var / n)


def ensemble_gamma_quadrature(V0, w0, temperature, N, omega_m, M, gamma_c, rt,
                              species: AtomSpecies = RB87_D2, k=None, truncation_energy=None,
                              constants: PhysicalConstants = CODATA):
    """Deterministic counterpart of :func:`ensemble_gamma`.

    Integrates the single-atom rate against the truncated transverse
    Boltzmann density with adaptive quadrature in ``s = rho^2/w0^2``.
    """
    if not gamma_c > 0:
        raise ZeroDampingError("cooling rate must be > 0")
    omega_at = trap_frequency(V0, species, k)
    beta = V0 / (constants.kB * temperature)
    s_max = truncation_s(V0, truncation_energy)

    def weight(s):
        return math.exp(-beta * -math.expm1(-2 * s))

    def rate(s):
        return _single_atom_rates(omega_at * math.exp(-s), omega_m, M, gamma_c, rt, species.mass)

    points = [p for p in (1 / (2 * beta), math.log(omega_at / omega_m) if omega_at > omega_m else None)
              if p is not None and 0 < p < s_max]
    opts = dict(limit=500, epsabs=0, epsrel=1e-11, points=points or None)
    norm = integrate.quad(weight, 0, s_max, **opts)[0]
    num = integrate.quad(lambda s: weight(s) * rate(s), 0, s_max, **opts)[0]
    return N * num / norm


def mean_frequency_ratio_quadrature(V0, temperature, truncation_energy=None, constants: PhysicalConstants = CODATA):
    """``<omega_loc / omega_at> = <exp(-s)>`` under the truncated density."""
    beta = V0 / (constants.kB * temperature)
    s_max = truncation_s(V0, truncation_energy)
    weight = lambda s: math.exp(-beta * -math.expm1(-2 * s))
    opts = dict(limit=500, epsabs=0, epsrel=1e-12)
    return integrate.quad(lambda s: math.exp(-s) * weight(s), 0, s_max, **opts)[0] / integrate.quad(weight, 0, s_max, **opts)[0]


def resonance_curve(powers, lattice: LatticeConfig, membrane: MembraneConfig, atoms: AtomConfig,
                    ensemble: EnsembleConfig, species: AtomSpecies = RB87_D2,
                    constants: PhysicalConstants = CODATA) -> SweepResult:
    """Ensemble damping ``delta_gamma`` as a function of lattice power.

    For every power the depth, trap and membrane frequencies are recomputed
    and the ensemble resampled. The same seed is reused at every point unless
    ``ensemble.reseed_per_point`` is set.
    """
    powers = np.asarray(powers, dtype=float)
    lo, hi = membrane.power_range
    bad = powers[(powers < lo) | (powers > hi)]
    if bad.size:
        from .errors import OutOfCalibrationRangeError
        raise OutOfCalibrationRangeError(f"powers {bad * 1e3} mW outside calibration range [{lo * 1e3}, {hi * 1e3}] mW")
    values, errors = [], []
    for i, P in enumerate(powers):
        point = lattice.at_power(float(P))
        V0 = dipole_depth(point, species, constants)
        omega_m, _ = membrane_at_power(float(P), membrane)
        cfg = ensemble
        if ensemble.reseed_per_point:
            cfg = EnsembleConfig(ensemble.temperature, ensemble.samples, (ensemble.seed + i) % 2**64,
                                 ensemble.truncation_energy, True)
        samples = sample_thermal(V0, lattice.waist, cfg, species, lattice.k, constants)
        value, err = ensemble_gamma(samples, atoms.number, omega_m, membrane.mass, atoms.cooling_rate,
                                    lattice.rt, species.mass, with_error=True)
        values.append(value)
        errors.append(err)
    return SweepResult("power_w", powers, np.array(values), np.array(errors),
                       metadata={"seed": ensemble.seed, "samples": ensemble.samples})
