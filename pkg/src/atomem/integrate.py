"""Dormand-Prince 5(4) integrator with dense output on a uniform grid."""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, NonFiniteStateError, StepSizeUnderflowError

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
A = np.array([
    [0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# 5th minus embedded 4th order weights (7 stages, FSAL)
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's 4th order continuous extension: y(t + s h) = y + h * sum_j K_j (P[j] @ [s, s^2, s^3, s^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ORDER = 5
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), n)
    n_steps: int
    n_rejected: int
    max_local_error: float


def _initial_step(f, t0, y0, f0, direction_span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / ORDER)
    return min(100 * h0, h1, direction_span)


def dopri5(f, t0, y0, t_out, *, rtol=1e-9, atol=1e-12, fixed_step=None, max_steps=50_000_000):
    """Integrate ``y' = f(t, y)`` and sample the solution at ``t_out``.

    Parameters
    ----------
    f : callable
        ``f(t, y) -> dy/dt``; ``y`` is a 1-D (real or complex) array.
    t0 : float
        Initial time.
    y0 : array_like
        Initial state.
    t_out : array_like
        Increasing output times, all ``>= t0``.
    rtol, atol : float or array
        Tolerances of the mixed error test
        ``|err_i| <= atol_i + rtol * max(|y_i|, |y_new_i|)``.
    fixed_step : float, optional
        Take steps of exactly this size (last step shortened) without error
        control. Used for convergence-order studies.

    Returns
    -------
    Solution
        ``max_local_error`` is the largest accepted weighted error norm times
        ``rtol``, so it never exceeds ``rtol`` under adaptive stepping.
    """
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim != 1 or len(t_out) == 0:
        raise ConfigError("t_out must be a non-empty 1-D array")
    if np.any(np.diff(t_out) <= 0) or t_out[0] < t0:
        raise ConfigError("t_out must be strictly increasing and start at or after t0")
    atol = np.broadcast_to(np.asarray(atol, dtype=float), y.shape)

    t_end = float(t_out[-1])
    out = np.empty((len(t_out), y.size), dtype=y.dtype)
    i_out = 0
    while i_out < len(t_out) and t_out[i_out] == t0:
        out[i_out] = y
        i_out += 1

    t = float(t0)
    K = np.empty((7, y.size), dtype=y.dtype)
    K[0] = f(t, y)
    if fixed_step is not None:
        h = float(fixed_step)
        if not h > 0:
            raise ConfigError("fixed_step must be > 0")
    else:
        h = _initial_step(f, t, y, K[0], max(t_end - t, 1e-300), rtol, atol)

    n_steps = n_rejected = 0
    max_err = 0.0
    while i_out < len(t_out):
        if n_steps >= max_steps:
            raise StepSizeUnderflowError(f"exceeded {max_steps} steps at t = {t!r}")
        h = min(h, t_end - t)
        if t_end - t - h < 1e-9 * h:
            h = t_end - t  # absorb a rounding-sized remainder instead of a sliver step
        if h <= 1e-14 * max(abs(t), abs(t_end)) or h <= 0:
            raise StepSizeUnderflowError(f"step size underflow at t = {t!r} (h = {h!r})")

        for s in range(1, 6):
            K[s] = f(t + C[s] * h, y + h * (A[s, :s] @ K[:s]))
        y_new = y + h * (B[:6] @ K[:6])
        K[6] = f(t + h, y_new)

        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(K[6])):
            if fixed_step is not None or h < 1e-12 * max(abs(t), abs(t_end)):
                raise NonFiniteStateError(f"state became non-finite near t = {t!r}")
            h *= MIN_FACTOR
            n_rejected += 1
            continue

        if fixed_step is not None:
            err_norm = 0.0
        else:
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(h * (E @ K)) / scale))
            if err_norm > 1.0:
                h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1 / ORDER))
                n_rejected += 1
                continue

        t_new = t + h if t + h < t_end else t_end
        while i_out < len(t_out) and t_out[i_out] <= t_new:
            if t_out[i_out] == t_new:
                out[i_out] = y_new
            else:
                theta = (t_out[i_out] - t) / h
                out[i_out] = y + h * ((P @ np.array([theta, theta**2, theta**3, theta**4])) @ K)
            i_out += 1

        n_steps += 1
        max_err = max(max_err, err_norm)
        t, y = t_new, y_new
        K[0] = K[6]
        if fixed_step is None:
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** (-1 / ORDER))
            h *= factor

    return Solution(t=t_out.copy(), y=out, n_steps=n_steps, n_rejected=n_rejected,
                    max_local_error=max_err * rtol)


@numba.njit(cache=True)
def _linear_rhs(M, drive, omega, phase, t, y):
    return M @ y + drive * np.sin(omega * t + phase)


@numba.njit(cache=True)
def _linear_kernel(M, drive, omega, phase, t0, y0, t_out, rtol, atol, fixed_step, max_steps):
    # Status codes: 0 ok, 1 step underflow, 2 non-finite state, 3 too many steps.
    n = y0.size
    y = y0.copy()
    out = np.empty((t_out.size, n), dtype=y0.dtype)
    K = np.empty((7, n), dtype=y0.dtype)
    t_end = t_out[-1]
    i_out = 0
    while i_out < t_out.size and t_out[i_out] == t0:
        out[i_out] = y
        i_out += 1

    t = t0
    K[0] = _linear_rhs(M, drive, omega, phase, t, y)
    if fixed_step > 0:
        h = fixed_step
    else:
        scale = atol + rtol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(K[0]) / scale)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, t_end - t)
        f1 = _linear_rhs(M, drive, omega, phase, t + h0, y + h0 * K[0])
        d2 = np.max(np.abs(f1 - K[0]) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / ORDER)
        h = min(100 * h0, h1, t_end - t)

    n_steps = 0
    n_rejected = 0
    max_err = 0.0
    status = 0
    while i_out < t_out.size:
        if n_steps >= max_steps:
            status = 3
            break
        h = min(h, t_end - t)
        if t_end - t - h < 1e-9 * h:
            h = t_end - t
        if h <= 1e-14 * max(abs(t), abs(t_end)) or h <= 0:
            status = 1
            break
        for s in range(1, 6):
            acc = A[s, 0] * K[0]
            for j in range(1, s):
                acc = acc + A[s, j] * K[j]
            K[s] = _linear_rhs(M, drive, omega, phase, t + C[s] * h, y + h * acc)
        acc = B[0] * K[0]
        for j in range(1, 6):
            acc = acc + B[j] * K[j]
        y_new = y + h * acc
        K[6] = _linear_rhs(M, drive, omega, phase, t + h, y_new)

        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(K[6]))):
            if fixed_step > 0 or h < 1e-12 * max(abs(t), abs(t_end)):
                status = 2
                break
            h *= MIN_FACTOR
            n_rejected += 1
            continue

        err_norm = 0.0
        if fixed_step <= 0:
            err = E[0] * K[0]
            for j in range(1, 7):
                err = err + E[j] * K[j]
            for i in range(n):
                sc = atol[i] + rtol * max(abs(y[i]), abs(y_new[i]))
                e = abs(h * err[i]) / sc
                if e > err_norm:
                    err_norm = e
            if err_norm > 1.0:
                h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1.0 / ORDER))
                n_rejected += 1
                continue

        t_new = t + h if t + h < t_end else t_end
        while i_out < t_out.size and t_out[i_out] <= t_new:
            if t_out[i_out] == t_new:
                out[i_out] = y_new
            else:
                theta = (t_out[i_out] - t) / h
                acc = np.zeros(n, dtype=y0.dtype)
                for j in range(7):
                    w = theta * (P[j, 0] + theta * (P[j, 1] + theta * (P[j, 2] + theta * P[j, 3])))
                    acc = acc + w * K[j]
                out[i_out] = y + h * acc
            i_out += 1

        n_steps += 1
        if err_norm > max_err:
            max_err = err_norm
        t = t_new
        y = y_new
        K[0] = K[6]
        if fixed_step <= 0:
            if err_norm == 0:
                h *= MAX_FACTOR
            else:
                h *= min(MAX_FACTOR, SAFETY * err_norm ** (-1.0 / ORDER))
    return out, n_steps, n_rejected, max_err, status, t


def dopri5_linear(M, y0, t_out, *, t0=0.0, drive=None, drive_omega=0.0, drive_phase=0.0,
                  rtol=1e-9, atol=1e-12, fixed_step=None, max_steps=50_000_000):
    """Compiled :func:`dopri5` for ``y' = M y + drive * sin(drive_omega t + drive_phase)``.

    Same tableau, step control and dense output as :func:`dopri5`.
    """
    dtype = complex if (np.iscomplexobj(M) or np.iscomplexobj(y0)) else float
    M = np.ascontiguousarray(M, dtype=dtype)
    y0 = np.ascontiguousarray(y0, dtype=dtype)
    t_out = np.ascontiguousarray(t_out, dtype=float)
    if t_out.ndim != 1 or len(t_out) == 0:
        raise ConfigError("t_out must be a non-empty 1-D array")
    if np.any(np.diff(t_out) <= 0) or t_out[0] < t0:
        raise ConfigError("t_out must be strictly increasing and start at or after t0")
    drive = np.zeros(y0.size, dtype=dtype) if drive is None else np.ascontiguousarray(drive, dtype=dtype)
    atol = np.ascontiguousarray(np.broadcast_to(np.asarray(atol, dtype=float), y0.shape))
    if fixed_step is not None and not fixed_step > 0:
        raise ConfigError("fixed_step must be > 0")
    out, n_steps, n_rej, max_err, status, t = _linear_kernel(
        M, drive, float(drive_omega), float(drive_phase), float(t0), y0, t_out,
        float(rtol), atol, -1.0 if fixed_step is None else float(fixed_step), int(max_steps))
    if status == 1:
        raise StepSizeUnderflowError(f"step size underflow at t = {t!r}")
    if status == 2:
        raise NonFiniteStateError(f"state became non-finite near t = {t!r}")
    if status == 3:
        raise StepSizeUnderflowError(f"exceeded {max_steps} steps at t = {t!r}")
    return Solution(t=t_out.copy(), y=out, n_steps=n_steps, n_rejected=n_rej,
                    max_local_error=max_err * rtol)
