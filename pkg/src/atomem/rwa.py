"""Rotating-frame amplitude model and its closed-form solution.

In a frame rotating at the membrane frequency the slow amplitudes obey the
linear system ``d/dt (a, b) = A (a, b)`` with

    A = [[-i delta - gamma_at/2,  i g       ],
         [ i rt g,               -gamma_m/2 ]]

which is solved exactly through its 2x2 eigen-decomposition.
"""

from dataclasses import dataclass
import cmath
import math

import numpy as np

from .constants import CODATA, PhysicalConstants
from .errors import ConfigError, ZeroAtomNumberError, ZeroDampingError
from .full import FullState
from .params import DerivedParams


@dataclass(frozen=True)
class RwaState:
    t: float
    a: complex
    b: complex

    def __post_init__(self):
        if not (math.isfinite(self.t) and cmath.isfinite(self.a) and cmath.isfinite(self.b)):
            raise ConfigError(f"non-finite amplitude state {self!r}")

    @property
    def excitation(self) -> float:
        return abs(self.a) ** 2 + abs(self.b) ** 2


def _atom_scale(params, hbar):
    if not params.N > 0:
        raise ZeroAtomNumberError("amplitudes need N > 0")
    if not params.omega_at > 0:
        raise ConfigError("amplitudes need omega_at > 0")
    return math.sqrt(params.N * params.m * params.omega_at / (2 * hbar))


def to_amplitudes(state: FullState, params: DerivedParams, constants: PhysicalConstants = CODATA) -> RwaState:
    hbar = constants.hbar
    Nm = params.N * params.m
    rot = cmath.exp(1j * params.omega_m * state.t)
    a = rot * _atom_scale(params, hbar) * complex(state.x_at, state.p_at / (Nm * params.omega_at))
    b = rot * math.sqrt(params.M * params.omega_m / (2 * hbar)) * complex(state.x_m, state.p_m / (params.M * params.omega_m))
    return RwaState(state.t, a, b)


def from_amplitudes(rwa: RwaState, params: DerivedParams, constants: PhysicalConstants = CODATA) -> FullState:
    hbar = constants.hbar
    Nm = params.N * params.m
    unrot = cmath.exp(-1j * params.omega_m * rwa.t)
    za = unrot * rwa.a / _atom_scale(params, hbar)
    zb = unrot * rwa.b / math.sqrt(params.M * params.omega_m / (2 * hbar))
    return FullState(rwa.t, za.real, za.imag * Nm * params.omega_at, zb.real, zb.imag * params.M * params.omega_m)


def amplitude_arrays(t, x_at, p_at, x_m, p_m, params: DerivedParams, constants: PhysicalConstants = CODATA):
    """Vectorised :func:`to_amplitudes` over trajectory columns."""
    hbar = constants.hbar
    rot = np.exp(1j * params.omega_m * np.asarray(t))
    b = rot * math.sqrt(params.M * params.omega_m / (2 * hbar)) * (x_m + 1j * p_m / (params.M * params.omega_m))
    if params.N > 0:
        Nm = params.N * params.m
        a = rot * _atom_scale(params, hbar) * (x_at + 1j * p_at / (Nm * params.omega_at))
    else:
        a = np.zeros_like(b)
    return a, b


def generator(params: DerivedParams) -> np.ndarray:
    return np.array([
        [-1j * params.delta - params.gamma_at / 2, 1j * params.g],
        [1j * params.rt * params.g, -params.gamma_m / 2 + 0j],
    ])


def rwa_rhs(state: RwaState, params: DerivedParams) -> np.ndarray:
    """``(da/dt, db/dt)`` of the rotating-frame equations."""
    da = (-1j * params.delta - params.gamma_at / 2) * state.a + 1j * params.g * state.b
    db = -params.gamma_m / 2 * state.b + 1j * params.rt * params.g * state.a
    return np.array([da, db])


@dataclass(frozen=True)
class EigenSolution:
    """Eigen-decomposition of the rotating-frame generator.

    ``lambda_minus`` is the slow mode (smaller ``|Re|``, ties broken by
    smaller ``|Im|``, then by smaller ``Im``). For a (near-)defective
    generator ``degenerate`` is set and :meth:`propagator` switches to the
    Jordan form.
    """

    lambda_plus: complex
    lambda_minus: complex
    vectors: np.ndarray
    inverse: np.ndarray
    matrix: np.ndarray
    degenerate: bool = False

    def propagator(self, t) -> np.ndarray:
        """``exp(A t)``; for array ``t`` the result has shape ``(len(t), 2, 2)``."""
        t = np.asarray(t, dtype=float)
        if self.degenerate:
            lam = 0.5 * (self.lambda_plus + self.lambda_minus)
            nil = self.matrix - lam * np.eye(2)
            e = np.exp(lam * t)[..., None, None]
            return e * (np.eye(2) + t[..., None, None] * nil)
        d = np.exp(np.multiply.outer(t, np.array([self.lambda_plus, self.lambda_minus])))
        return np.einsum("ij,...j,jk->...ik", self.vectors, d, self.inverse)

    @property
    def splitting(self) -> float:
        """Frequency separation ``|Im(lambda_plus - lambda_minus)|`` of the normal modes."""
        return abs((self.lambda_plus - self.lambda_minus).imag)

    @property
    def slow_decay_rate(self) -> float:
        """Energy decay rate ``-2 Re(lambda_minus)`` of the slow mode."""
        return -2 * self.lambda_minus.real


def _slow_first(l1, l2):
    key = lambda z: (abs(z.real), abs(z.imag), z.imag)
    return (l1, l2) if key(l1) <= key(l2) else (l2, l1)


def eigen_solution(params: DerivedParams) -> EigenSolution:
    A = generator(params)
    alpha, beta = A[0, 0], A[1, 1]
    cross = A[0, 1] * A[1, 0]
    half_tr = 0.5 * (alpha + beta)
    half_diff = 0.5 * (alpha - beta)
    disc = half_diff * half_diff + cross
    norm2 = float(np.sum(np.abs(A) ** 2))
    if abs(disc) < 1e-12 * norm2 or norm2 == 0:
        lam = complex(half_tr)
        return EigenSolution(lam, lam, np.eye(2, dtype=complex), np.eye(2, dtype=complex), A, degenerate=True)

    root = cmath.sqrt(disc)
    # Larger-magnitude root from the non-cancelling sign, the other from Vieta.
    big = half_tr + root if abs(half_tr + root) >= abs(half_tr - root) else half_tr - root
    det = alpha * beta - cross
    small = det / big if big != 0 else half_tr - (big - half_tr)
    slow, fast = _slow_first(small, big)
    lam_minus, lam_plus = slow, fast
    if abs(fast.real) == abs(slow.real) and abs(fast.imag) == abs(slow.imag):
        lam_plus, lam_minus = (slow, fast) if slow.imag > fast.imag else (fast, slow)

    def vector(lam):
        # Two candidate null vectors of (A - lam); keep the better-scaled one.
        v1 = np.array([A[0, 1], lam - alpha])
        v2 = np.array([lam - beta, A[1, 0]])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        if np.linalg.norm(v) == 0:
            # Diagonal generator: pick the unit vector of the matching entry.
            v = np.array([1.0, 0.0]) if abs(lam - alpha) <= abs(lam - beta) else np.array([0.0, 1.0])
        return v / np.linalg.norm(v)

    V = np.column_stack([vector(lam_plus), vector(lam_minus)]).astype(complex)
    return EigenSolution(lam_plus, lam_minus, V, np.linalg.inv(V), A)


def adiabatic_gamma(params: DerivedParams) -> float:
    """Membrane energy decay rate with the atoms adiabatically eliminated.

    ``gamma_m + gamma_at g^2 rt / (delta^2 + (gamma_at/2)^2)``
    """
    if not params.gamma_at > 0:
        raise ZeroDampingError("adiabatic elimination needs gamma_at > 0")
    return params.gamma_m + params.gamma_at * params.g**2 * params.rt / (params.delta**2 + (params.gamma_at / 2) ** 2)


def propagate(rwa0: RwaState, params: DerivedParams, duration: float, eig: EigenSolution = None) -> RwaState:
    eig = eig or eigen_solution(params)
    U = eig.propagator(duration)
    a, b = U @ np.array([rwa0.a, rwa0.b])
    return RwaState(rwa0.t + duration, complex(a), complex(b))


def propagate_grid(rwa0: RwaState, params: DerivedParams, times, eig: EigenSolution = None):
    """Amplitudes ``(a(t), b(t))`` at offsets ``times`` from ``rwa0.t``."""
    eig = eig or eigen_solution(params)
    U = eig.propagator(np.asarray(times, dtype=float))
    y = U @ np.array([rwa0.a, rwa0.b])
    return y[..., 0], y[..., 1]
