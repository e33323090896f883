"""Run configuration: INI-style files with unit-suffixed keys.

Sections ``[lattice]``, ``[membrane]``, ``[atoms]``, ``[ensemble]`` and
``[experiment]`` (plus optional ``[species]`` and ``[constants]``) hold the
base parameters. A section named ``[<subcommand>:<section>]`` overrides keys
of ``<section>`` for that subcommand only, e.g. ``[sweep-power:lattice]``.
"""

import configparser
from dataclasses import dataclass, field
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import scipy.constants as sc

from .constants import CODATA, RB87_D2, AtomSpecies, PhysicalConstants
from .errors import ConfigError
from .params import AtomConfig, LatticeConfig, MembraneConfig
from .thermal import EnsembleConfig

SECTIONS = ("lattice", "membrane", "atoms", "ensemble", "experiment", "species", "constants")
SUBCOMMANDS = ("params", "ringdown", "sweep-power", "sweep-atoms", "heating")
MODES = ("homogeneous", "ensemble")
TWO_PI = 2 * math.pi

KNOWN_KEYS = {
    "lattice": {"power_mw", "wavelength_nm", "detuning_ghz", "waist_um", "reflectivity", "transmittivity"},
    "membrane": {"mass_kg", "freq_khz", "quality"},
    "atoms": {"number", "temperature_uk", "cooling_rate_khz", "dephasing_rate_khz"},
    "ensemble": {"samples", "seed", "truncation_uk", "reseed_per_point"},
    "experiment": {
        "mode", "detuning_override_khz", "ringdown_amplitude_pm", "ringdown_duration_s",
        "ringdown_points", "transient_discard_s", "power_sweep_mw", "atom_sweep",
        "heating_powers_mw", "heating_drive_pm", "heating_duration_ms", "heating_samples",
        "heating_steps_per_period", "workers",
    },
    "species": {"mass_amu", "wavelength_nm", "linewidth_mhz", "line_strength"},
    "constants": {"hbar", "c", "kb"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "homogeneous"
    detuning_override: float = None  # rad/s
    ringdown_amplitude: float = 540e-12
    ringdown_duration: float = 3.0
    ringdown_points: int = 301
    transient_discard: float = None
    power_sweep: tuple = ()
    atom_sweep: tuple = ()
    heating_powers: tuple = ()
    heating_drive: float = 330e-12
    heating_duration: float = 5e-3
    heating_samples: int = 1000
    heating_steps_per_period: int = 48
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.ringdown_amplitude > 0:
            raise ConfigError("ringdown amplitude must be > 0")
        if not self.ringdown_duration > 0:
            raise ConfigError("ringdown duration must be > 0")
        if int(self.ringdown_points) != self.ringdown_points or self.ringdown_points < 10:
            raise ConfigError("ringdown needs at least 10 points")
        if self.transient_discard is not None and not self.transient_discard >= 0:
            raise ConfigError("transient discard must be >= 0")
        if not self.heating_drive >= 0:
            raise ConfigError("heating drive amplitude must be >= 0")
        if not self.heating_duration > 0:
            raise ConfigError("heating duration must be > 0")
        if int(self.heating_samples) != self.heating_samples or self.heating_samples < 1000:
            raise ConfigError("heating needs at least 1000 samples")
        if int(self.heating_steps_per_period) != self.heating_steps_per_period or self.heating_steps_per_period < 8:
            raise ConfigError("heating_steps_per_period must be an integer >= 8")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        for name in ("power_sweep", "heating_powers"):
            values = getattr(self, name)
            if any(not p > 0 for p in values):
                raise ConfigError(f"{name} powers must be > 0")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
        if any(not n >= 0 for n in self.atom_sweep):
            raise ConfigError("atom numbers must be >= 0")
        if any(b <= a for a, b in zip(self.atom_sweep, self.atom_sweep[1:])):
            raise ConfigError("atom_sweep must be strictly increasing")


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeConfig
    membrane: MembraneConfig
    atoms: AtomConfig
    ensemble: EnsembleConfig
    experiment: ExperimentConfig
    species: AtomSpecies = RB87_D2
    constants: PhysicalConstants = CODATA
    selector: str = "params"
    output: str = None
    config_hash: str = field(default="", compare=False)


# --- value parsing ----------------------------------------------------------

def _float(section, key, raw):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key}: must be finite, got {raw!r}")
    return value


def _int(section, key, raw):
    value = _float(section, key, raw)
    if value != int(value):
        raise ConfigError(f"[{section}] {key}: must be an integer, got {raw!r}")
    return int(value)


def _list(section, key, raw):
    """Comma-separated values, or an inclusive ``start:stop:step`` range."""
    raw = raw.strip()
    if not raw:
        return ()
    if ":" in raw and "," not in raw:
        parts = [_float(section, key, p) for p in raw.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"[{section}] {key}: range must be start:stop:step, got {raw!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(np.round(start + i * step, 12)) for i in range(n))
    return tuple(_float(section, key, p) for p in raw.split(","))


def _table(section, key, raw):
    """``P_mW: value, P_mW: value, ...`` pairs."""
    pairs = []
    for item in raw.split(","):
        if ":" not in item:
            raise ConfigError(f"[{section}] {key}: expected 'power_mw: value' pairs, got {item.strip()!r}")
        p, v = item.split(":", 1)
        pairs.append((_float(section, key, p) * 1e-3, _float(section, key, v)))
    return tuple(pairs)


def _optional(raw):
    return raw is None or raw.strip().lower() in ("", "none")


# --- loading ----------------------------------------------------------------

def read_sections(path) -> dict:
    """Raw ``{section: {key: value}}`` including subcommand override sections."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return {name: dict(parser.items(name)) for name in parser.sections()}


def merge_for(sections: dict, selector: str) -> dict:
    merged = {}
    for name, values in sections.items():
        if ":" in name:
            continue
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        merged[name] = dict(values)
    for name, values in sections.items():
        if ":" not in name:
            continue
        target_cmd, target = name.split(":", 1)
        if target_cmd not in SUBCOMMANDS or target not in SECTIONS:
            raise ConfigError(f"unknown override section [{name}]")
        if target_cmd == selector:
            merged.setdefault(target, {}).update(values)
    for name, values in merged.items():
        unknown = set(values) - KNOWN_KEYS[name]
        if unknown:
            raise ConfigError(f"[{name}] unknown keys: {sorted(unknown)}")
    return merged


def config_hash(merged: dict) -> str:
    canonical = json.dumps(merged, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _require(sec, name, key):
    if key not in sec:
        raise ConfigError(f"[{name}] missing required key {key!r}")
    return sec[key]


def build(merged: dict, selector: str = "params", output=None) -> RunConfig:
    """Typed, validated :class:`RunConfig` from merged raw sections."""
    for name in ("lattice", "membrane", "atoms"):
        if name not in merged:
            raise ConfigError(f"missing section [{name}]")

    sp = merged.get("species", {})
    species = AtomSpecies(
        mass=_float("species", "mass_amu", sp["mass_amu"]) * sc.atomic_mass if "mass_amu" in sp else RB87_D2.mass,
        wavelength=_float("species", "wavelength_nm", sp["wavelength_nm"]) * 1e-9 if "wavelength_nm" in sp else RB87_D2.wavelength,
        linewidth=TWO_PI * _float("species", "linewidth_mhz", sp["linewidth_mhz"]) * 1e6 if "linewidth_mhz" in sp else RB87_D2.linewidth,
        line_strength=_float("species", "line_strength", sp["line_strength"]) if "line_strength" in sp else RB87_D2.line_strength,
    )
    cs = merged.get("constants", {})
    constants = PhysicalConstants(
        hbar=_float("constants", "hbar", cs["hbar"]) if "hbar" in cs else CODATA.hbar,
        c=_float("constants", "c", cs["c"]) if "c" in cs else CODATA.c,
        kB=_float("constants", "kb", cs["kb"]) if "kb" in cs else CODATA.kB,
    )

    la = merged["lattice"]
    lattice = LatticeConfig(
        power=_float("lattice", "power_mw", _require(la, "lattice", "power_mw")) * 1e-3,
        detuning=TWO_PI * _float("lattice", "detuning_ghz", _require(la, "lattice", "detuning_ghz")) * 1e9,
        wavelength=_float("lattice", "wavelength_nm", la["wavelength_nm"]) * 1e-9 if "wavelength_nm" in la else species.wavelength,
        waist=_float("lattice", "waist_um", _require(la, "lattice", "waist_um")) * 1e-6,
        reflectivity=_float("lattice", "reflectivity", _require(la, "lattice", "reflectivity")),
        transmittivity=_float("lattice", "transmittivity", _require(la, "lattice", "transmittivity")),
    )

    me = merged["membrane"]
    freq = _table("membrane", "freq_khz", _require(me, "membrane", "freq_khz"))
    membrane = MembraneConfig(
        mass=_float("membrane", "mass_kg", _require(me, "membrane", "mass_kg")),
        frequency_table=tuple((p, TWO_PI * f * 1e3) for p, f in freq),
        quality_table=_table("membrane", "quality", _require(me, "membrane", "quality")),
    )

    at = merged["atoms"]
    atoms = AtomConfig(
        number=_float("atoms", "number", _require(at, "atoms", "number")),
        temperature=_float("atoms", "temperature_uk", at.get("temperature_uk", "0")) * 1e-6,
        cooling_rate=TWO_PI * _float("atoms", "cooling_rate_khz", at.get("cooling_rate_khz", "0")) * 1e3,
        dephasing_rate=TWO_PI * _float("atoms", "dephasing_rate_khz", at.get("dephasing_rate_khz", "0")) * 1e3,
    )

    en = merged.get("ensemble", {})
    trunc = en.get("truncation_uk")
    ensemble_kwargs = dict(
        samples=_int("ensemble", "samples", en.get("samples", "10000")),
        seed=_int("ensemble", "seed", en.get("seed", "0")),
        truncation_energy=None if _optional(trunc) else _float("ensemble", "truncation_uk", trunc) * 1e-6 * constants.kB,
        reseed_per_point=en.get("reseed_per_point", "false").strip().lower() in ("1", "true", "yes", "on"),
    )

    ex = merged.get("experiment", {})
    override = ex.get("detuning_override_khz")
    discard = ex.get("transient_discard_s")
    experiment = ExperimentConfig(
        mode=ex.get("mode", "homogeneous").strip(),
        detuning_override=None if _optional(override) else TWO_PI * _float("experiment", "detuning_override_khz", override) * 1e3,
        ringdown_amplitude=_float("experiment", "ringdown_amplitude_pm", ex.get("ringdown_amplitude_pm", "540")) * 1e-12,
        ringdown_duration=_float("experiment", "ringdown_duration_s", ex.get("ringdown_duration_s", "3")),
        ringdown_points=_int("experiment", "ringdown_points", ex.get("ringdown_points", "301")),
        transient_discard=None if _optional(discard) else _float("experiment", "transient_discard_s", discard),
        power_sweep=tuple(p * 1e-3 for p in _list("experiment", "power_sweep_mw", ex.get("power_sweep_mw", ""))),
        atom_sweep=_list("experiment", "atom_sweep", ex.get("atom_sweep", "")),
        heating_powers=tuple(p * 1e-3 for p in _list("experiment", "heating_powers_mw", ex.get("heating_powers_mw", ""))),
        heating_drive=_float("experiment", "heating_drive_pm", ex.get("heating_drive_pm", "330")) * 1e-12,
        heating_duration=_float("experiment", "heating_duration_ms", ex.get("heating_duration_ms", "5")) * 1e-3,
        heating_samples=_int("experiment", "heating_samples", ex.get("heating_samples", "1000")),
        heating_steps_per_period=_int("experiment", "heating_steps_per_period",
                                      ex.get("heating_steps_per_period", "48")),
        workers=_int("experiment", "workers", ex.get("workers", "1")),
    )
    # Homogeneous runs never sample, so a zero temperature gets a placeholder.
    ensemble = EnsembleConfig(temperature=atoms.temperature or 1e-6, **ensemble_kwargs)

    cfg = RunConfig(lattice, membrane, atoms, ensemble, experiment, species, constants, selector, output,
                    config_hash(merged))
    validate(cfg)
    return cfg


def load(path, selector: str = "params", *, output=None, seed=None, samples=None, mode=None,
         workers=None) -> RunConfig:
    """Read, merge, apply command-line overrides and validate a config file."""
    if selector not in SUBCOMMANDS:
        raise ConfigError(f"unknown experiment {selector!r}")
    merged = merge_for(read_sections(path), selector)
    if seed is not None:
        merged.setdefault("ensemble", {})["seed"] = str(seed)
    if samples is not None:
        merged.setdefault("ensemble", {})["samples"] = str(samples)
        merged.setdefault("experiment", {})["heating_samples"] = str(samples)
    if mode is not None:
        merged.setdefault("experiment", {})["mode"] = mode
    if workers is not None:
        merged.setdefault("experiment", {})["workers"] = str(workers)
    return build(merged, selector, output)


def validate(cfg: RunConfig) -> None:
    """Check every precondition the selected experiment will rely on."""
    from .params import derive, dipole_depth

    lo, hi = cfg.membrane.power_range
    ex = cfg.experiment
    if cfg.selector in ("params", "ringdown", "sweep-atoms"):
        derive(cfg.lattice, cfg.membrane, cfg.atoms, cfg.species, cfg.constants, ex.detuning_override)
    else:
        dipole_depth(cfg.lattice, cfg.species, cfg.constants)
    needs_gamma = cfg.selector in ("ringdown", "sweep-power", "sweep-atoms")
    if needs_gamma and ex.mode == "homogeneous" and not cfg.atoms.gamma_at > 0:
        raise ConfigError("homogeneous mode needs cooling_rate_khz + dephasing_rate_khz > 0")
    if needs_gamma and ex.mode == "ensemble":
        if not cfg.atoms.cooling_rate > 0:
            raise ConfigError("ensemble mode needs cooling_rate_khz > 0")
        if not cfg.atoms.temperature > 0:
            raise ConfigError("ensemble mode needs temperature_uk > 0")
    if cfg.selector == "sweep-power":
        if len(ex.power_sweep) < 1:
            raise ConfigError("sweep-power needs experiment.power_sweep_mw")
        bad = [p for p in ex.power_sweep if not lo <= p <= hi]
        if bad:
            raise ConfigError(f"power_sweep_mw values {[p * 1e3 for p in bad]} outside calibration range "
                              f"[{lo * 1e3:g}, {hi * 1e3:g}] mW")
    if cfg.selector == "sweep-atoms" and len(ex.atom_sweep) < 1:
        raise ConfigError("sweep-atoms needs experiment.atom_sweep")
    if cfg.selector == "heating":
        if len(ex.heating_powers) < 1:
            raise ConfigError("heating needs experiment.heating_powers_mw")
        bad = [p for p in ex.heating_powers if not lo <= p <= hi]
        if bad:
            raise ConfigError(f"heating_powers_mw values {[p * 1e3 for p in bad]} outside calibration range")
        if not cfg.atoms.temperature > 0:
            raise ConfigError("heating needs temperature_uk > 0")
    if cfg.selector == "ringdown":
        discard = ex.transient_discard
        if discard is None:
            rate = cfg.atoms.cooling_rate if ex.mode == "ensemble" else cfg.atoms.gamma_at
            discard = 5 / rate
        dt = ex.ringdown_duration / (ex.ringdown_points - 1)
        if int(np.sum(np.arange(ex.ringdown_points) * dt >= discard)) < 10:
            raise ConfigError("fewer than 10 ringdown points remain after the transient discard")
