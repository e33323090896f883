"""Full-coordinate dynamics of the coupled atom-membrane system.

Linear model: atomic centre of mass (total momentum ``p_at``, mass ``N m``)
and membrane mode coupled through the lattice, with the membrane seeing only
the fraction ``rt`` of the atomic backaction. A nonlinear single-atom model in
the sinusoidal lattice drives the heating experiment.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .constants import CODATA, RB87_D2, AtomSpecies, PhysicalConstants
from .errors import ConfigError, EmptySampleError, NonFiniteStateError
from .integrate import dopri5_linear
from .params import DerivedParams, LatticeConfig


@dataclass(frozen=True)
class FullState:
    t: float
    x_at: float
    p_at: float
    x_m: float
    p_m: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.x_at, self.p_at, self.x_m, self.p_m)):
            raise ConfigError(f"non-finite state {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_at, self.p_at, self.x_m, self.p_m])

    def energies(self, params: DerivedParams) -> tuple:
        """Mechanical energies ``(E_atoms, E_membrane)`` in J."""
        Nm = params.N * params.m
        e_at = 0.0
        if Nm > 0:
            e_at = self.p_at**2 / (2 * Nm) + 0.5 * Nm * params.omega_at**2 * self.x_at**2
        e_m = self.p_m**2 / (2 * params.M) + 0.5 * params.M * params.omega_m**2 * self.x_m**2
        return e_at, e_m


@dataclass(frozen=True)
class DriveSpec:
    """Membrane drive ``x = amplitude * sin(frequency t + phase)``.

    In the linear model this enters as the force
    ``M omega_m^2 amplitude sin(frequency t + phase)``; in the heating model
    it prescribes the membrane displacement directly.
    """

    kind: str = "none"
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "resonant_sine"):
            raise ConfigError(f"unknown drive kind {self.kind!r}")
        if not self.amplitude >= 0:
            raise ConfigError(f"drive amplitude must be >= 0, got {self.amplitude!r}")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.amplitude > 0

    def displacement(self, t):
        if not self.active:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.amplitude * np.sin(self.frequency * t + self.phase)

    def velocity(self, t):
        if not self.active:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.amplitude * self.frequency * np.cos(self.frequency * t + self.phase)


NO_DRIVE = DriveSpec()


@dataclass
class Trajectory:
    t: np.ndarray
    x_at: np.ndarray
    p_at: np.ndarray
    x_m: np.ndarray
    p_m: np.ndarray
    n_steps: int = 0
    max_local_error: float = 0.0
    tolerance: float = field(default=float("nan"))

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> FullState:
        return FullState(float(self.t[i]), float(self.x_at[i]), float(self.p_at[i]),
                         float(self.x_m[i]), float(self.p_m[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def final(self) -> FullState:
        return self[-1]


@dataclass(frozen=True)
class DiagnosticForces:
    F_com: float
    F_d: float
    delta_P: float
    delta_F_rad: float
    n_dot: float


def system_matrix(params: DerivedParams) -> np.ndarray:
    """Generator of the linear model acting on ``(x_at, p_at, x_m, p_m)``."""
    Nm = params.N * params.m
    k_at = Nm * params.omega_at**2
    M = np.zeros((4, 4))
    if Nm > 0:
        M[0, 1] = 1 / Nm
        M[1, 0] = -k_at
        M[1, 1] = -params.gamma_at
        M[1, 2] = k_at
        M[3, 0] = params.rt * k_at
    M[2, 3] = 1 / params.M
    M[3, 2] = -params.M * params.omega_m**2
    M[3, 3] = -params.gamma_m
    return M


def linear_rhs(state: FullState, params: DerivedParams) -> np.ndarray:
    """Time derivative ``(dx_at, dp_at, dx_m, dp_m)`` of the undriven linear model.

    With ``N = 0`` the atomic derivatives vanish identically.
    """
    Nm = params.N * params.m
    k_at = Nm * params.omega_at**2
    if Nm > 0:
        dx_at = state.p_at / Nm
        dp_at = -params.gamma_at * state.p_at - k_at * state.x_at + k_at * state.x_m
    else:
        dx_at = dp_at = 0.0
    dx_m = state.p_m / params.M
    dp_m = -params.gamma_m * state.p_m - params.M * params.omega_m**2 * state.x_m + params.rt * k_at * state.x_at
    return np.array([dx_at, dp_at, dx_m, dp_m])


def diagnostics(state: FullState, params: DerivedParams, lattice: LatticeConfig,
                constants: PhysicalConstants = CODATA) -> DiagnosticForces:
    """Forces and photon bookkeeping of the coupling at one state."""
    spring = params.m * params.omega_at**2
    F_d = -spring * state.x_at
    delta_P = -(constants.c / 2) * params.N * F_d
    return DiagnosticForces(
        F_com=params.N * spring * state.x_m,
        F_d=F_d,
        delta_P=delta_P,
        delta_F_rad=(2 / constants.c) * params.rt * delta_P,
        n_dot=delta_P / (constants.hbar * lattice.omega(constants)),
    )


def _length_scale(state0: FullState, params: DerivedParams, drive: DriveSpec, *, membrane_only=False) -> float:
    Nm = params.N * params.m
    candidates = [abs(state0.x_m), abs(state0.p_m) / (params.M * params.omega_m)]
    if Nm > 0 and params.omega_at > 0 and not membrane_only:
        candidates += [abs(state0.x_at), abs(state0.p_at) / (Nm * params.omega_at)]
    if drive.active:
        candidates.append(drive.amplitude)
    scale = max(candidates)
    return scale if scale > 0 else 1e-12


def integrate(state0: FullState, params: DerivedParams, drive: DriveSpec = NO_DRIVE, *,
              duration: float, output_dt: float, tolerance: float = 1e-10) -> Trajectory:
    """Integrate the linear model on a uniform output grid.

    Adaptive Dormand-Prince 5(4). The relative tolerance is ``tolerance``;
    absolute tolerances are ``tolerance`` times the natural length scale of
    the initial state (and drive) in each coordinate.
    """
    if not duration > 0 or not output_dt > 0:
        raise ConfigError("duration and output_dt must be > 0")
    if not 1e-14 <= tolerance <= 1e-3:
        raise ConfigError(f"tolerance must lie in [1e-14, 1e-3], got {tolerance!r}")
    n_out = int(round(duration / output_dt))
    if n_out < 1:
        raise ConfigError("output_dt exceeds duration")
    t_out = state0.t + output_dt * np.arange(n_out + 1)

    if params.N == 0:
        state0 = FullState(state0.t, 0.0, 0.0, state0.x_m, state0.p_m)
    L = _length_scale(state0, params, drive)
    Nm = params.N * params.m
    atol = tolerance * L * np.array([1.0, max(Nm, params.m) * max(params.omega_at, params.omega_m),
                                     1.0, params.M * params.omega_m])
    forcing = None
    if drive.active:
        forcing = np.array([0.0, 0.0, 0.0, params.M * params.omega_m**2 * drive.amplitude])
    A = system_matrix(params)
    sol = dopri5_linear(A, state0.as_array(), t_out, t0=state0.t,
                        drive=forcing, drive_omega=drive.frequency, drive_phase=drive.phase,
                        rtol=tolerance, atol=atol)
    y = sol.y
    n_steps, max_err = sol.n_steps, sol.max_local_error
    if params.rt == 0:
        # One-way coupling: integrate the membrane on its own so that its step
        # sequence, and hence its trajectory, cannot depend on the atoms.
        L_m = _length_scale(state0, params, drive, membrane_only=True)
        mem = dopri5_linear(A[2:, 2:], state0.as_array()[2:], t_out, t0=state0.t,
                            drive=None if forcing is None else forcing[2:],
                            drive_omega=drive.frequency, drive_phase=drive.phase,
                            rtol=tolerance, atol=tolerance * L_m * np.array([1.0, params.M * params.omega_m]))
        y = y.copy()
        y[:, 2:] = mem.y
        n_steps += mem.n_steps
        max_err = max(max_err, mem.max_local_error)
    return Trajectory(t=sol.t, x_at=y[:, 0], p_at=y[:, 1], x_m=y[:, 2], p_m=y[:, 3],
                      n_steps=n_steps, max_local_error=max_err, tolerance=tolerance)


# --- nonlinear lattice ------------------------------------------------------

def nonlinear_atom_rhs(z, v, local_depth, k, x_m, species: AtomSpecies = RB87_D2):
    """Acceleration in the lattice ``V = -(V0/2) cos(2k(z - x_m))``.

    ``v`` is unused (the lattice force is conservative) and kept for the
    state-space signature. Broadcasts over arrays.
    """
    local_depth = np.asarray(local_depth)
    if np.any(local_depth < 0):
        raise ConfigError("local depth must be >= 0")
    return -(local_depth * k / species.mass) * np.sin(2 * k * (z - x_m))


def lattice_energy(z, v, local_depth, k, x_m, v_m, species: AtomSpecies = RB87_D2):
    """Axial energy in the co-moving lattice frame, zero at the well bottom."""
    u = z - x_m
    return 0.5 * species.mass * (v - v_m) ** 2 + 0.5 * local_depth * (1 - np.cos(2 * k * u))


@dataclass(frozen=True)
class HeatingResult:
    delta_T_ax: float
    delta_T_ax_err: float  # statistical and discretization errors in quadrature
    survival: float
    survival_err: float
    n_samples: int
    discretization_err: float = 0.0


def sample_axial(depths, temperature, k, species: AtomSpecies = RB87_D2, *, seed=0,
                 constants: PhysicalConstants = CODATA):
    """Thermal axial ``(u, v)`` in each lattice well, conditioned on being bound.

    Positions follow the Boltzmann weight of the sinusoidal potential within
    one well, velocities the Maxwell distribution; pairs with energy at or
    above the local depth are redrawn. Samples come in antithetic pairs:
    entry ``2j + 1`` is the mirror image ``(-u, -v)`` of entry ``2j``, which
    cancels the drive/thermal-motion cross term of the energy gain in the
    harmonic limit.
    """
    depths = np.asarray(depths, dtype=float)
    n = depths.size
    kT = constants.kB * temperature
    if not kT > 0:
        return np.zeros(n), np.zeros(n)
    rng = np.random.default_rng(seed)
    u = np.empty(n)
    v = np.empty(n)
    # Draw for even entries (using the lower depth of each pair) and mirror.
    lead = np.arange(0, n, 2)
    partner = np.minimum(lead + 1, n - 1)
    pair_depth = np.minimum(depths[lead], depths[partner])
    todo = np.arange(lead.size)
    half_well = math.pi / (2 * k)
    sigma_v = math.sqrt(kT / species.mass)
    while todo.size:
        d = pair_depth[todo]
        cand_u = rng.uniform(-half_well, half_well, todo.size)
        cand_v = rng.normal(0.0, sigma_v, todo.size)
        pot = 0.5 * d * (1 - np.cos(2 * k * cand_u))
        accept = rng.random(todo.size) < np.exp(-pot / kT)
        accept &= pot + 0.5 * species.mass * cand_v**2 < d
        u[lead[todo[accept]]] = cand_u[accept]
        v[lead[todo[accept]]] = cand_v[accept]
        todo = todo[~accept]
    odd = lead[lead + 1 < n] + 1
    u[odd] = -u[odd - 1]
    v[odd] = -v[odd - 1]
    return u, v


# Yoshida's fourth-order composition of the drift-kick-drift leapfrog.
_YOSHIDA_OUTER = 1 / (2 - 2 ** (1 / 3))
_YOSHIDA = (_YOSHIDA_OUTER, 1 - 2 * _YOSHIDA_OUTER, _YOSHIDA_OUTER)


def _symplectic_lattice(z, v, coef, k, drive: DriveSpec, duration, n_steps):
    """Fixed-step symplectic integration of ``z'' = -coef sin(2k(z - x_m(t)))``.

    Time is advanced with the drifts, i.e. treated as an extended-phase-space
    coordinate, so the scheme stays symplectic for the moving lattice.
    """
    z = z.copy()
    v = v.copy()
    h = duration / n_steps
    t = 0.0
    amp, freq, phase = drive.amplitude, drive.frequency, drive.phase
    moving = drive.active
    for _ in range(n_steps):
        for w in _YOSHIDA:
            half = 0.5 * w * h
            z += half * v
            t += half
            x_m = amp * math.sin(freq * t + phase) if moving else 0.0
            v -= (w * h) * coef * np.sin(2 * k * (z - x_m))
            z += half * v
            t += half
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(v))):
        raise NonFiniteStateError("heating trajectories became non-finite")
    return z, v


def simulate_heating(samples, drive: DriveSpec, duration: float, species: AtomSpecies = RB87_D2,
                     k: float = None, *, temperature: float, seed: int = 0, steps_per_period: int = 48,
                     constants: PhysicalConstants = CODATA) -> HeatingResult:
    """Axial heating of a collisionless thermal sample by a moving lattice.

    Each atom moves independently in its local well while the membrane
    displaces the lattice as ``drive.displacement(t)``. Atoms whose final
    co-moving energy reaches the local depth count as lost. ``delta_T_ax``
    is the mean energy gain of the surviving atoms divided by ``k_B`` (one
    axial degree of freedom carries ``k_B T`` of kinetic plus potential
    energy).

    The step is ``1/steps_per_period`` of the shortest harmonic period in the
    sample. The fourth-order symplectic scheme has no secular energy drift;
    its remaining bias is estimated by repeating the run with half the steps
    (Richardson, ``|fine - coarse| / 15``) and included in ``delta_T_ax_err``.
    """
    depths = np.asarray(samples.depth if hasattr(samples, "depth") else [s.depth for s in samples], dtype=float)
    n = depths.size
    if n == 0:
        raise EmptySampleError("no thermal samples to simulate")
    if not duration > 0:
        raise ConfigError("heating duration must be > 0")
    if int(steps_per_period) != steps_per_period or steps_per_period < 8:
        raise ConfigError("steps_per_period must be an integer >= 8")
    if k is None:
        k = 2 * math.pi / species.wavelength

    u0, w0 = sample_axial(depths, temperature, k, species, seed=seed, constants=constants)
    z0 = u0 + drive.displacement(0.0)
    v0 = w0 + drive.velocity(0.0)
    e0 = lattice_energy(z0, v0, depths, k, drive.displacement(0.0), drive.velocity(0.0), species)

    omega_max = float(np.max(k * np.sqrt(2 * depths / species.mass)))
    if drive.active:
        omega_max = max(omega_max, drive.frequency)
    n_steps = max(1, math.ceil(duration * omega_max / (2 * math.pi) * steps_per_period))
    coef = depths * k / species.mass
    x_end, v_end = drive.displacement(duration), drive.velocity(duration)
    z1, v1 = _symplectic_lattice(z0, v0, coef, k, drive, duration, n_steps)
    e1 = lattice_energy(z1, v1, depths, k, x_end, v_end, species)
    zc, vc = _symplectic_lattice(z0, v0, coef, k, drive, duration, max(1, n_steps // 2))
    e_coarse = lattice_energy(zc, vc, depths, k, x_end, v_end, species)

    bound = e1 < depths
    n_bound = int(np.count_nonzero(bound))
    survival = n_bound / n
    survival_err = math.sqrt(survival * (1 - survival) / n)
    if n_bound == 0:
        return HeatingResult(float("nan"), float("nan"), 0.0, survival_err, n)
    gain = (e1 - e0) / constants.kB
    mean = float(np.mean(gain[bound]))
    # Antithetic partners are correlated, so the error comes from pair means.
    pairs = np.arange(0, n - 1, 2)
    both = bound[pairs] & bound[pairs + 1]
    pair_means = 0.5 * (gain[pairs[both]] + gain[pairs[both] + 1])
    if pair_means.size > 1:
        err = float(np.std(pair_means, ddof=1) / math.sqrt(pair_means.size))
    else:
        err = float("nan")
    coarse = float(np.mean((e_coarse[bound] - e0[bound]) / constants.kB))
    disc = abs(mean - coarse) / 15
    return HeatingResult(mean, math.hypot(err, disc), survival, survival_err, n, disc)
