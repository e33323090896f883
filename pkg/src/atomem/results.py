"""Result containers shared by the ensemble model and the experiment harness."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

CONTROLS = ("power_w", "atom_number", "detuning_rad_s")


@dataclass
class SweepResult:
    control: str
    values: np.ndarray
    response: np.ndarray
    response_err: np.ndarray
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # further response columns, same length

    def __post_init__(self):
        if self.control not in CONTROLS:
            raise ConfigError(f"unknown sweep control {self.control!r}")
        self.values = np.asarray(self.values, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        self.response_err = np.asarray(self.response_err, dtype=float)
        n = len(self.values)
        if len(self.response) != n or len(self.response_err) != n or any(len(v) != n for v in self.extra.values()):
            raise ConfigError("sweep columns must have equal lengths")
        if n > 1 and np.any(np.diff(self.values) <= 0):
            raise ConfigError("sweep control values must be strictly increasing")


@dataclass
class RingdownResult:
    t: np.ndarray
    envelope: np.ndarray
    rate: float
    rate_err: float
    initial_value: float
    residual_rms: float
    discard_before: float
