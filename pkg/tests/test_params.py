import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomem import (CODATA, RB87_D2, AtomConfig, LatticeConfig, MembraneConfig, coupling_constant,
                    derive, dipole_depth, membrane_at_power, trap_frequency)
from atomem.errors import ConfigError, DetuningTooSmallError, OutOfCalibrationRangeError

TWO_PI = 2 * math.pi
mp.mp.dps = 40


def lattice(power=76e-3, **kw):
    base = dict(power=power, detuning=-TWO_PI * 21e9, wavelength=780.241209686e-9, waist=350e-6,
                reflectivity=0.28, transmittivity=0.82)
    base.update(kw)
    return LatticeConfig(**base)


MEMBRANE = MembraneConfig(
    mass=1e-11,
    frequency_table=((0.0, TWO_PI * 272e3), (76e-3, TWO_PI * 244e3), (140e-3, TWO_PI * 220.4e3)),
    quality_table=((0.0, 8.5e5), (76e-3, 1.5e6), (140e-3, 1.5e6)),
)
ATOMS = AtomConfig(number=2.3e6, temperature=100e-6, cooling_rate=TWO_PI * 30e3, dephasing_rate=TWO_PI * 100e3)


def mp_depth(P, w0, detuning_hz, r, t):
    # Independent evaluation with hard-coded constants.
    c = mp.mpf(299792458)
    lam = mp.mpf("780.241209686e-9")
    omega0 = 2 * mp.pi * c / lam
    gamma = 2 * mp.pi * mp.mpf("6.0666e6")
    delta = 2 * mp.pi * mp.mpf(detuning_hz)
    u = mp.mpf(2) / 3 * 3 * mp.pi * c**2 / (2 * omega0**3) * gamma / abs(delta)
    intensity = 2 * mp.mpf(P) / (mp.pi * mp.mpf(w0) ** 2)
    return u * 4 * mp.mpf(t) * mp.sqrt(mp.mpf(r)) * intensity


def mp_trap(V0, lam="780.241209686e-9"):
    mass = mp.mpf("86.909180527") * mp.mpf("1.66053906660e-27")
    k = 2 * mp.pi / mp.mpf(lam)
    return k * mp.sqrt(2 * mp.mpf(V0) / mass)


class TestDipoleDepth:
    def test_matches_extended_precision_oracle(self):
        expected = mp_depth("76e-3", "350e-6", "-21e9", "0.28", "0.82")
        assert dipole_depth(lattice()) == pytest.approx(float(expected), rel=1e-8)

    def test_depth_near_quoted_temperature(self):
        V0 = dipole_depth(lattice())
        assert abs(V0 / CODATA.kB / 290e-6 - 1) < 0.3

    def test_zero_power(self):
        assert dipole_depth(lattice(power=0.0)) == 0.0

    @given(st.floats(1e-4, 10.0))
    def test_linear_in_power(self, a):
        assert dipole_depth(lattice(power=a * 76e-3)) == pytest.approx(a * dipole_depth(lattice()), rel=1e-12)

    def test_doubling_power(self):
        assert dipole_depth(lattice(power=0.152)) == pytest.approx(2 * dipole_depth(lattice()), rel=1e-15)

    def test_small_detuning_rejected(self):
        with pytest.raises(DetuningTooSmallError):
            dipole_depth(lattice(detuning=-TWO_PI * 100e6))

    def test_sign_of_detuning_irrelevant_for_depth(self):
        assert dipole_depth(lattice(detuning=TWO_PI * 21e9)) == dipole_depth(lattice())


class TestTrapFrequency:
    def test_oracle_at_quoted_depth(self):
        V0 = CODATA.kB * 290e-6
        omega = trap_frequency(V0, RB87_D2)
        assert omega == pytest.approx(float(mp_trap(mp.mpf("1.380649e-23") * mp.mpf("290e-6"))), rel=1e-8)
        assert omega / TWO_PI == pytest.approx(302e3, abs=0.5e3)

    def test_zero_depth(self):
        assert trap_frequency(0.0) == 0.0

    def test_square_root_law(self):
        V0 = CODATA.kB * 290e-6
        assert trap_frequency(4 * V0) == pytest.approx(2 * trap_frequency(V0), rel=1e-15)

    @given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
    def test_power_scaling(self, p1, p2):
        w1 = trap_frequency(dipole_depth(lattice(power=p1)))
        w2 = trap_frequency(dipole_depth(lattice(power=p2)))
        assert w1 / w2 == pytest.approx(math.sqrt(p1 / p2), rel=1e-12)

    def test_negative_depth_rejected(self):
        with pytest.raises(ConfigError):
            trap_frequency(-1e-27)

    def test_array_input(self):
        out = trap_frequency(np.array([0.0, 1e-27, 4e-27]))
        assert out[2] == pytest.approx(2 * out[1], rel=1e-15)


class TestCouplingConstant:
    def test_oracle(self):
        N, m, w, M = mp.mpf("2.3e6"), mp.mpf("86.909180527") * mp.mpf("1.66053906660e-27"), 2 * mp.pi * 244000, mp.mpf("1e-11")
        expected = w / 2 * mp.sqrt(N * m * w / (M * w))
        g = coupling_constant(2.3e6, RB87_D2.mass, TWO_PI * 244e3, 1e-11, TWO_PI * 244e3)
        assert g == pytest.approx(float(expected), rel=1e-8)
        assert g == pytest.approx(1.40e2, rel=0.01)

    def test_zero_atoms(self):
        assert coupling_constant(0, RB87_D2.mass, 1e6, 1e-11, 1e6) == 0.0

    @given(st.floats(1.0, 1e9))
    def test_sqrt_n(self, N):
        g1 = coupling_constant(N, RB87_D2.mass, 1.5e6, 1e-11, 1.5e6)
        assert coupling_constant(4 * N, RB87_D2.mass, 1.5e6, 1e-11, 1.5e6) == pytest.approx(2 * g1, rel=1e-15)

    def test_invalid_membrane(self):
        with pytest.raises(ConfigError):
            coupling_constant(1, RB87_D2.mass, 1e6, 0.0, 1e6)


class TestMembraneCalibration:
    def test_knots(self):
        omega, gamma = membrane_at_power(76e-3, MEMBRANE)
        assert omega == TWO_PI * 244e3
        assert gamma == pytest.approx(1.022, abs=1e-3)
        assert membrane_at_power(0.0, MEMBRANE)[0] == TWO_PI * 272e3

    def test_interpolation_is_linear_and_monotone(self):
        powers = np.linspace(0, 76e-3, 50)
        omegas = [membrane_at_power(p, MEMBRANE)[0] for p in powers]
        assert np.all(np.diff(omegas) < 0)
        mid = membrane_at_power(38e-3, MEMBRANE)[0]
        assert mid == pytest.approx(TWO_PI * 258e3, rel=1e-12)

    @pytest.mark.parametrize("P", [-1e-3, 0.141])
    def test_out_of_range(self, P):
        with pytest.raises(OutOfCalibrationRangeError):
            membrane_at_power(P, MEMBRANE)

    def test_table_validation(self):
        with pytest.raises(ConfigError):
            MembraneConfig(mass=1e-11, frequency_table=((0.0, 1.0), (0.0, 2.0)), quality_table=((0.0, 1e6),))


class TestDerive:
    def test_paper_setup(self):
        p = derive(lattice(), MEMBRANE, ATOMS)
        assert p.delta / TWO_PI == pytest.approx(p.omega_at / TWO_PI - 244e3, rel=1e-12)
        assert p.delta / TWO_PI == pytest.approx(57e3, abs=6e3)
        assert p.delta + p.omega_m == p.omega_at
        assert p.gamma_at == pytest.approx(TWO_PI * 130e3, rel=1e-12)
        assert p.rt == pytest.approx(0.2296, rel=1e-12)

    def test_zero_atoms_only_changes_g(self):
        p = derive(lattice(), MEMBRANE, ATOMS)
        q = derive(lattice(), MEMBRANE, AtomConfig(0, 100e-6, TWO_PI * 30e3, TWO_PI * 100e3))
        assert q.g == 0.0
        assert (q.V0, q.omega_at, q.omega_m, q.gamma_m, q.delta) == (p.V0, p.omega_at, p.omega_m, p.gamma_m, p.delta)

    def test_detuning_override(self):
        p = derive(lattice(), MEMBRANE, ATOMS, detuning_override=0.0)
        assert p.delta == 0.0 and p.omega_at == p.omega_m

    def test_pure_function(self):
        assert derive(lattice(), MEMBRANE, ATOMS) == derive(lattice(), MEMBRANE, ATOMS)

    def test_with_recomputes_coupling(self):
        p = derive(lattice(), MEMBRANE, ATOMS)
        q = p.with_(N=4 * p.N)
        assert q.g == pytest.approx(2 * p.g, rel=1e-15)
        assert p.with_(omega_at=p.omega_m).delta == 0.0

    @pytest.mark.parametrize("kw", [dict(waist=0.0), dict(reflectivity=1.5), dict(transmittivity=-0.1),
                                    dict(power=-1.0), dict(detuning=0.0)])
    def test_invalid_lattice(self, kw):
        with pytest.raises(ConfigError):
            lattice(**kw)

    def test_zero_power_trap_frequency_rejected(self):
        with pytest.raises(ConfigError):
            derive(lattice(power=0.0), MEMBRANE, ATOMS)
