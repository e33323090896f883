"""Experiment protocols: ringdowns, parameter sweeps, heating and CSV output."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import RunConfig
from .fitting import fit_exponential_decay
from .full import NO_DRIVE, DriveSpec, simulate_heating
from .params import derive, dipole_depth, membrane_at_power
from .results import RingdownResult, SweepResult
from .rwa import RwaState, adiabatic_gamma, propagate_grid
from .thermal import EnsembleConfig, ensemble_gamma, resonance_curve, sample_thermal

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class RingdownOutcome:
    with_atoms: RingdownResult
    without_atoms: RingdownResult
    delta_gamma: float
    delta_gamma_err: float


def _ordered_map(fn, items, workers):
    """``[fn(x) for x in items]``, optionally across processes, in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _fit(t, envelope, discard):
    fit = fit_exponential_decay(t, envelope, discard_before=discard)
    return RingdownResult(t=t, envelope=envelope, rate=fit.rate, rate_err=fit.rate_err,
                          initial_value=fit.amplitude, residual_rms=fit.residual_rms,
                          discard_before=discard)


def run_ringdown(cfg: RunConfig, *, power: float = None, number: float = None,
                 use_override: bool = True) -> RingdownOutcome:
    """Membrane ringdowns with and without atoms, otherwise identical.

    The membrane starts displaced by ``ringdown_amplitude`` with the atoms at
    rest. In homogeneous mode the rotating-frame amplitudes are propagated
    exactly; in ensemble mode the membrane decays at ``gamma_m`` plus the
    thermally averaged atomic damping.
    """
    ex = cfg.experiment
    lattice = cfg.lattice if power is None else cfg.lattice.at_power(power)
    atoms = cfg.atoms if number is None else replace(cfg.atoms, number=number)
    override = ex.detuning_override if use_override else None
    params = derive(lattice, cfg.membrane, atoms, cfg.species, cfg.constants, override)
    b0 = math.sqrt(params.M * params.omega_m / (2 * cfg.constants.hbar)) * ex.ringdown_amplitude
    t = np.linspace(0.0, ex.ringdown_duration, ex.ringdown_points)

    mc_err = 0.0
    if ex.mode == "homogeneous":
        discard = ex.transient_discard if ex.transient_discard is not None else 5 / params.gamma_at
        start = RwaState(0.0, 0j, complex(b0))
        _, b = propagate_grid(start, params, t)
        env_with = np.abs(b) ** 2
        _, b = propagate_grid(start, params.with_(N=0.0), t)
        env_without = np.abs(b) ** 2
    else:
        discard = ex.transient_discard if ex.transient_discard is not None else 5 / atoms.cooling_rate
        samples = sample_thermal(params.V0, lattice.waist, cfg.ensemble, cfg.species, lattice.k, cfg.constants)
        extra, mc_err = ensemble_gamma(samples, atoms.number, params.omega_m, params.M, atoms.cooling_rate,
                                       params.rt, params.m, with_error=True)
        env_with = b0**2 * np.exp(-(params.gamma_m + extra) * t)
        env_without = b0**2 * np.exp(-params.gamma_m * t)

    with_atoms = _fit(t, env_with, discard)
    without_atoms = _fit(t, env_without, discard)
    err = math.sqrt(with_atoms.rate_err**2 + without_atoms.rate_err**2 + mc_err**2)
    return RingdownOutcome(with_atoms, without_atoms, with_atoms.rate - without_atoms.rate, err)


def _ringdown_at_power(args):
    cfg, power = args
    return run_ringdown(cfg, power=power, use_override=False)


def _ringdown_at_number(args):
    cfg, number = args
    return run_ringdown(cfg, number=number)


def run_sweep(cfg: RunConfig, control: str, values=None) -> SweepResult:
    """Added damping ``delta_gamma`` against lattice power or atom number.

    Ensemble-mode power sweeps are delegated to :func:`resonance_curve`;
    everything else repeats :func:`run_ringdown`. Power sweeps always take
    the detuning from the lattice calibration, never from an override.
    """
    ex = cfg.experiment
    if control == "power":
        values = ex.power_sweep if values is None else values
        if ex.mode == "ensemble":
            result = resonance_curve(values, cfg.lattice, cfg.membrane, cfg.atoms, cfg.ensemble,
                                     cfg.species, cfg.constants)
            result.metadata["config_hash"] = cfg.config_hash
            return result
        outcomes = _ordered_map(_ringdown_at_power, [(cfg, float(p)) for p in values], ex.workers)
        name = "power_w"
    elif control == "atom_number":
        values = ex.atom_sweep if values is None else values
        outcomes = _ordered_map(_ringdown_at_number, [(cfg, float(n)) for n in values], ex.workers)
        name = "atom_number"
    else:
        raise ValueError(f"unknown sweep control {control!r}")
    return SweepResult(
        name, np.asarray(values, dtype=float),
        np.array([o.delta_gamma for o in outcomes]),
        np.array([o.delta_gamma_err for o in outcomes]),
        metadata={"seed": cfg.ensemble.seed, "config_hash": cfg.config_hash},
        extra={"gamma_per_s": np.array([o.with_atoms.rate for o in outcomes]),
               "gamma_m_per_s": np.array([o.without_atoms.rate for o in outcomes])},
    )


def _heating_point(args):
    cfg, power, amplitude = args
    ex = cfg.experiment
    lattice = cfg.lattice.at_power(power)
    V0 = dipole_depth(lattice, cfg.species, cfg.constants)
    omega_m, _ = membrane_at_power(power, cfg.membrane)
    ensemble = EnsembleConfig(cfg.atoms.temperature, ex.heating_samples, cfg.ensemble.seed,
                              cfg.ensemble.truncation_energy)
    samples = sample_thermal(V0, lattice.waist, ensemble, cfg.species, lattice.k, cfg.constants)
    drive = DriveSpec("resonant_sine", amplitude, omega_m) if amplitude > 0 else NO_DRIVE
    return simulate_heating(samples, drive, ex.heating_duration, cfg.species, lattice.k,
                            temperature=cfg.atoms.temperature, seed=cfg.ensemble.seed,
                            steps_per_period=ex.heating_steps_per_period, constants=cfg.constants)


def run_heating(cfg: RunConfig, *, powers=None, drive_amplitude: float = None) -> SweepResult:
    """Axial temperature rise and survival after driving the membrane.

    The membrane is driven on its own resonance at every power. The radial
    temperature change is identically zero because the model has no
    transverse dynamics.
    """
    ex = cfg.experiment
    powers = ex.heating_powers if powers is None else powers
    amplitude = ex.heating_drive if drive_amplitude is None else drive_amplitude
    results = _ordered_map(_heating_point, [(cfg, float(p), amplitude) for p in powers], ex.workers)
    n = len(results)
    return SweepResult(
        "power_w", np.asarray(powers, dtype=float),
        np.array([r.delta_T_ax for r in results]),
        np.array([r.delta_T_ax_err for r in results]),
        metadata={"seed": cfg.ensemble.seed, "config_hash": cfg.config_hash, "samples": ex.heating_samples},
        extra={"delta_T_rad": np.zeros(n),
               "survival": np.array([r.survival for r in results]),
               "survival_err": np.array([r.survival_err for r in results])},
    )


def emit_params(cfg: RunConfig) -> list:
    """Rows ``(quantity, value, unit, value_hz)`` of every derived quantity.

    ``value_hz`` is ``value / 2 pi`` for angular frequencies and rates and
    empty otherwise.
    """
    p = derive(cfg.lattice, cfg.membrane, cfg.atoms, cfg.species, cfg.constants,
               cfg.experiment.detuning_override)
    kB = cfg.constants.kB
    rows = [
        ("power", cfg.lattice.power, "W", None),
        ("lattice_depth", p.V0, "J", None),
        ("lattice_depth_temperature", p.V0 / kB, "K", None),
        ("omega_at", p.omega_at, "rad/s", p.omega_at / TWO_PI),
        ("omega_m", p.omega_m, "rad/s", p.omega_m / TWO_PI),
        ("delta", p.delta, "rad/s", p.delta / TWO_PI),
        ("gamma_m", p.gamma_m, "1/s", p.gamma_m / TWO_PI),
        ("gamma_at", p.gamma_at, "1/s", p.gamma_at / TWO_PI),
        ("g", p.g, "rad/s", p.g / TWO_PI),
        ("rt", p.rt, "1", None),
        ("atom_number", p.N, "1", None),
        ("atom_mass", p.m, "kg", None),
        ("membrane_mass", p.M, "kg", None),
        ("lattice_wavenumber", p.k, "1/m", None),
    ]
    if p.gamma_at > 0:
        gamma = adiabatic_gamma(p)
        rows.append(("gamma_total", gamma, "1/s", gamma / TWO_PI))
        rows.append(("delta_gamma", gamma - p.gamma_m, "1/s", (gamma - p.gamma_m) / TWO_PI))
    return rows


# --- CSV --------------------------------------------------------------------

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def format_csv(columns, rows, metadata: dict) -> str:
    meta = " ".join(f"{k}={v}" for k, v in metadata.items())
    lines = [f"# atomem {__version__} {meta}".rstrip(), ",".join(columns)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, metadata: dict) -> None:
    """Write a CSV table atomically; ``path=None`` writes to stdout."""
    text = format_csv(columns, rows, metadata)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".atomem-", suffix=".csv.tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _metadata(cfg: RunConfig, **more):
    meta = {"experiment": cfg.selector, "mode": cfg.experiment.mode, "seed": cfg.ensemble.seed,
            "config_hash": cfg.config_hash}
    meta.update(more)
    return meta


def params_table(cfg: RunConfig):
    return ["quantity", "value", "unit", "value_hz"], emit_params(cfg), _metadata(cfg)


def ringdown_table(cfg: RunConfig, outcome: RingdownOutcome):
    rows = zip(outcome.with_atoms.t, outcome.with_atoms.envelope, outcome.without_atoms.envelope)
    meta = _metadata(cfg, gamma_per_s=repr(float(outcome.with_atoms.rate)),
                     gamma_m_per_s=repr(float(outcome.without_atoms.rate)),
                     delta_gamma_per_s=repr(float(outcome.delta_gamma)),
                     delta_gamma_err_per_s=repr(float(outcome.delta_gamma_err)),
                     discard_s=repr(float(outcome.with_atoms.discard_before)))
    return ["time_s", "envelope_with_atoms", "envelope_without_atoms"], list(rows), meta


def sweep_table(cfg: RunConfig, result: SweepResult):
    if result.control == "power_w":
        head, control = "power_mw", result.values * 1e3
    else:
        head, control = result.control, result.values
    columns = [head, "delta_gamma_per_s", "delta_gamma_err_per_s"]
    cols = [control, result.response, result.response_err]
    for key in ("gamma_per_s", "gamma_m_per_s"):
        if key in result.extra:
            columns.append(key)
            cols.append(result.extra[key])
    return columns, list(zip(*cols)), _metadata(cfg, samples=cfg.ensemble.samples)


def heating_table(cfg: RunConfig, result: SweepResult):
    columns = ["power_mw", "delta_t_ax_uk", "delta_t_ax_err_uk", "delta_t_rad_uk", "survival", "survival_err"]
    cols = [result.values * 1e3, result.response * 1e6, result.response_err * 1e6,
            result.extra["delta_T_rad"] * 1e6, result.extra["survival"], result.extra["survival_err"]]
    meta = _metadata(cfg, samples=cfg.experiment.heating_samples,
                     drive_pm=repr(cfg.experiment.heating_drive * 1e12))
    return columns, list(zip(*cols)), meta


def run(cfg: RunConfig) -> str:
    """Execute the configured experiment and write its CSV; returns the text."""
    if cfg.selector == "params":
        table = params_table(cfg)
    elif cfg.selector == "ringdown":
        table = ringdown_table(cfg, run_ringdown(cfg))
    elif cfg.selector == "sweep-power":
        table = sweep_table(cfg, run_sweep(cfg, "power"))
    elif cfg.selector == "sweep-atoms":
        table = sweep_table(cfg, run_sweep(cfg, "atom_number"))
    elif cfg.selector == "heating":
        table = heating_table(cfg, run_heating(cfg))
    else:
        raise ValueError(f"unknown experiment {cfg.selector!r}")
    write_csv(cfg.output, *table)
    return format_csv(*table)
