"""Weibull survival math and the censoring-aware per-step log-likelihood.

All array functions broadcast over numpy inputs. The scalar operations
(`weibull_survival`, `step_log_likelihood`, ...) accept plain floats and the
validated `WeibullParams` / `CensorObservation` records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

K_MAX = 10.0
PROB_FLOOR = 1e-12
LOG_PROB_FLOOR = float(np.log(PROB_FLOOR))
DENSITY_Y_FLOOR = 1e-12


@dataclass(frozen=True)
class WeibullParams:
    scale: float
    shape: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0 < self.shape < K_MAX:
            raise ValueError(f"shape must lie in (0, {K_MAX}), got {self.shape}")


@dataclass(frozen=True)
class CensorObservation:
    """One per-step observation: elapsed time `tse`, remaining time `tte`.

    ``uncensored=True`` means the next arrival was seen `tte` after the step;
    otherwise `tte` is only a lower bound on the remaining time.
    """

    tse: float
    tte: float
    uncensored: bool

    def __post_init__(self):
        if self.tse < 0 or self.tte < 0:
            raise ValueError(f"tse and tte must be nonnegative, got {self.tse}, {self.tte}")


def _check_nonneg(name, x):
    if np.any(np.asarray(x) < 0):
        raise ValueError(f"{name} must be nonnegative")


def cumulative_hazard(y, scale, shape):
    """(y / scale) ** shape, the Weibull cumulative hazard."""
    return (np.asarray(y, dtype=float) / scale) ** shape


def weibull_survival(y, p: WeibullParams):
    _check_nonneg("y", y)
    out = np.exp(-cumulative_hazard(y, p.scale, p.shape))
    return float(out) if np.ndim(out) == 0 else out


def weibull_density(y, p: WeibullParams):
    _check_nonneg("y", y)
    y = np.maximum(np.asarray(y, dtype=float), DENSITY_Y_FLOOR)
    lam, k = p.scale, p.shape
    out = (k / lam) * (y / lam) ** (k - 1) * np.exp(-((y / lam) ** k))
    return float(out) if np.ndim(out) == 0 else out


def excess_survival(t, s, p: WeibullParams):
    """P(Y - s > t | Y > s)."""
    _check_nonneg("t", t)
    _check_nonneg("s", s)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.exp(cumulative_hazard(s, p.scale, p.shape) - cumulative_hazard(s + t, p.scale, p.shape))
    return float(out) if np.ndim(out) == 0 else out


def excess_density(t, s, p: WeibullParams):
    _check_nonneg("t", t)
    _check_nonneg("s", s)
    u = np.maximum(np.asarray(s, dtype=float) + np.asarray(t, dtype=float), DENSITY_Y_FLOOR)
    lam, k = p.scale, p.shape
    out = (k / lam) * (u / lam) ** (k - 1) * excess_survival(t, s, p)
    return float(out) if np.ndim(out) == 0 else out


def _hazard_and_grads(u, scale, shape):
    # H = (u/scale)^shape; dH/dscale = -shape*H/scale; dH/dshape = H*log(u/scale)
    ratio = u / scale
    H = ratio**shape
    with np.errstate(divide="ignore"):
        logr = np.where(u > 0, np.log(np.where(u > 0, ratio, 1.0)), 0.0)
    return H, -shape * H / scale, H * logr


def log_likelihood(tse, tte, uncensored, scale, shape, with_grad=False):
    """Vectorized censored log-likelihood of the conditional excess time.

    Uncensored steps score the mass of ``[tte, tte + 1)``; censored steps score
    the survival beyond `tte`. Probabilities are floored at `PROB_FLOOR` before
    the log, and the gradient is zero wherever the floor is active.

    Returns ``ll`` or ``(ll, dll_dscale, dll_dshape)``.
    """
    tse = np.asarray(tse, dtype=float)
    tte = np.asarray(tte, dtype=float)
    unc = np.asarray(uncensored, dtype=bool)
    scale = np.asarray(scale, dtype=float)
    shape = np.asarray(shape, dtype=float)

    a, da_l, da_k = _hazard_and_grads(tse, scale, shape)
    b, db_l, db_k = _hazard_and_grads(tse + tte, scale, shape)
    c, dc_l, dc_k = _hazard_and_grads(tse + tte + 1.0, scale, shape)

    gap = c - b
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_bin = np.log(-np.expm1(-gap))
        raw = a - b + np.where(unc, log_bin, 0.0)
    raw = np.where(np.isnan(raw), -np.inf, raw)
    floored = raw < LOG_PROB_FLOOR
    ll = np.clip(raw, LOG_PROB_FLOOR, 0.0)
    if not with_grad:
        return ll

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        w = np.where(unc, 1.0 / np.expm1(gap), 0.0)
    w = np.where(np.isfinite(w), w, 0.0)
    d_l = da_l - db_l + w * (dc_l - db_l)
    d_k = da_k - db_k + w * (dc_k - db_k)
    active = ~floored & (raw <= 0.0)
    d_l = np.where(active, d_l, 0.0)
    d_k = np.where(active, d_k, 0.0)
    return ll, d_l, d_k


def step_log_likelihood(obs: CensorObservation, p: WeibullParams) -> float:
    return float(log_likelihood(obs.tse, obs.tte, obs.uncensored, p.scale, p.shape))


def step_log_likelihood_gradient(obs: CensorObservation, p: WeibullParams) -> tuple[float, float]:
    """Analytic (d/dscale, d/dshape) of `step_log_likelihood`."""
    _, d_l, d_k = log_likelihood(obs.tse, obs.tte, obs.uncensored, p.scale, p.shape, with_grad=True)
    return float(d_l), float(d_k)
