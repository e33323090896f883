"""Least-squares fits used by the ringdown and sweep protocols."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, NonPositiveSampleError


@dataclass(frozen=True)
class DecayFit:
    rate: float
    amplitude: float
    residual_rms: float
    rate_err: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_err: float
    intercept_err: float

    @property
    def stderr(self):
        return self.slope_err, self.intercept_err


def fit_exponential_decay(t, y, discard_before: float = 0.0) -> DecayFit:
    """Fit ``y = A exp(-rate t)`` by weighted linear regression of ``log y``.

    Weights ``y^2`` make the log-space residuals mimic absolute residuals in
    ``y``. Points with ``t < discard_before`` are dropped first.

    Returns
    -------
    DecayFit
        ``residual_rms`` is the RMS of ``y - model`` relative to ``y``;
        ``rate_err`` is the one-sigma error from the weighted residuals.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = t >= discard_before
    t, y = t[keep], y[keep]
    if t.size < 10:
        raise InsufficientDataError(f"need >= 10 points after discarding t < {discard_before}, have {t.size}")
    if np.any(~(y > 0)):
        raise NonPositiveSampleError("exponential fit needs strictly positive samples")

    # Centre time and scale y to keep the normal equations well conditioned.
    t0 = float(np.mean(t))
    scale = float(np.max(y))
    w = (y / scale) ** 2
    x = t - t0
    ly = np.log(y / scale)
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * ly).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise DegenerateInputError("all fit times coincide")
    slope = (w * (x - xm) * (ly - ym)).sum() / sxx
    intercept = ym - slope * xm

    resid = ly - (intercept + slope * x)
    dof = t.size - 2
    sigma2 = (w * resid**2).sum() / dof
    rate_err = math.sqrt(sigma2 / sxx)
    amplitude = scale * math.exp(intercept - slope * t0)
    model = amplitude * np.exp(slope * t)
    rms = float(np.sqrt(np.mean(((y - model) / y) ** 2)))
    return DecayFit(rate=float(-slope), amplitude=float(amplitude), residual_rms=rms, rate_err=float(rate_err))


def fit_linear(x, y) -> LinearFit:
    """Ordinary least squares ``y = slope x + intercept`` with standard errors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise InsufficientDataError("linear fit needs >= 3 matched points")
    xm = x.mean()
    sxx = ((x - xm) ** 2).sum()
    if sxx == 0:
        raise DegenerateInputError("all x values coincide")
    slope = ((x - xm) * (y - y.mean())).sum() / sxx
    intercept = y.mean() - slope * xm
    resid = y - (slope * x + intercept)
    s2 = (resid**2).sum() / (x.size - 2)
    slope_err = math.sqrt(s2 / sxx)
    intercept_err = math.sqrt(s2 * (1 / x.size + xm**2 / sxx))
    return LinearFit(float(slope), float(intercept), slope_err, intercept_err)
