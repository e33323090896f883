import math
from pathlib import Path

import pytest

from atomem import RB87_D2, DerivedParams
from atomem.params import coupling_constant

ROOT = Path(__file__).resolve().parent.parent
PAPER_CFG = ROOT / "paper.cfg"
TWO_PI = 2 * math.pi


def resonant_params(**changes):
    """Homogeneous resonant configuration: N=2.3e6, delta=0, gamma_at=2pi*130 kHz."""
    base = dict(
        omega_at=TWO_PI * 244e3,
        omega_m=TWO_PI * 244e3,
        gamma_m=TWO_PI * 244e3 / 1.5e6,
        gamma_at=TWO_PI * 130e3,
        rt=0.28 * 0.82,
        N=2.3e6,
        m=RB87_D2.mass,
        M=1e-11,
        k=TWO_PI / 780.241209686e-9,
    )
    base.update(changes)
    return DerivedParams.build(**base)


@pytest.fixture
def paper_params():
    return resonant_params()


@pytest.fixture
def paper_cfg_path():
    return PAPER_CFG


def g_of(params):
    return coupling_constant(params.N, params.m, params.omega_at, params.M, params.omega_m)
