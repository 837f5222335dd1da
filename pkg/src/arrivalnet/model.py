"""Recurrent Weibull arrival-time model: activations, losses, training, queries.

The dense head emits ``2p`` raw values per step, laid out as
``(scale_1, shape_1, ..., scale_p, shape_p)``. Three loss modes share the
network:

``matrnn``
    Parameters describe the full inter-arrival time; the likelihood conditions
    on the elapsed time ``tse``.
``wtte``
    Parameters describe the remaining time directly (``tse`` is treated as 0).
``sqloss``
    The scale slot becomes a softplus point estimate of the time to arrival,
    fitted by squared error on uncensored steps.

Grid arrivals are recorded at the end of the cell they fall in, so with the
default ``bin_convention="cell"`` an uncensored step whose next arrival is
``tte`` steps ahead scores the remaining-time mass over ``[tte - 1, tte)``.
``bin_convention="left"`` scores ``[tte, tte + 1)`` instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import neural
from .grid import SurvivalTarget
from .survival import K_MAX, PROB_FLOOR, log_likelihood

log = logging.getLogger(__name__)

LOSS_MODES = ("matrnn", "wtte", "sqloss")
SCALE_RAW_CLAMP = 20.0
SHAPE_RAW_CLAMP = 25.0


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ModelConfig:
    n_processes: int
    mean_interarrival: tuple[float, ...]
    hidden: int = 36
    loss_mode: str = "matrnn"
    k_max: float = K_MAX
    learning_rate: float = 1e-3
    iterations: int = 100
    clip: float = 5.0
    seed: int = 0
    batch_size: int | None = None
    bin_convention: str = "cell"

    def __post_init__(self):
        self.mean_interarrival = tuple(float(m) for m in self.mean_interarrival)
        if self.hidden < 1 or self.n_processes < 1:
            raise ValueError("hidden and n_processes must be >= 1")
        if len(self.mean_interarrival) != self.n_processes:
            raise ValueError("need one mean inter-arrival time per process")
        if any(not m > 0 for m in self.mean_interarrival):
            raise ValueError("mean inter-arrival times must be positive")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.bin_convention not in ("cell", "left"):
            raise ValueError("bin_convention must be 'cell' or 'left'")
        if not self.k_max > 1:
            raise ValueError("k_max must exceed 1")


# -- activations ---------------------------------------------------------------


def activate_shape(raw, k_max=K_MAX):
    """Squash to ``(0, k_max)`` with ``raw = 0`` landing exactly on 1."""
    z = np.clip(raw, -SHAPE_RAW_CLAMP, SHAPE_RAW_CLAMP)
    # k_max * sigmoid(z + logit(1/k_max)) == k_max / (1 + (k_max - 1) * exp(-z))
    return k_max / (1.0 + (k_max - 1.0) * np.exp(-z))


def activate_shape_grad(raw, k_max=K_MAX):
    k = activate_shape(raw, k_max)
    inside = np.abs(raw) < SHAPE_RAW_CLAMP
    return np.where(inside, k * (1.0 - k / k_max), 0.0)


def activate_scale(raw, mean_iat):
    """``mean_iat * exp(raw)``, raw clamped to +-20 against overflow."""
    return mean_iat * np.exp(np.clip(raw, -SCALE_RAW_CLAMP, SCALE_RAW_CLAMP))


def activate_scale_grad(raw, mean_iat):
    inside = np.abs(raw) < SCALE_RAW_CLAMP
    return np.where(inside, activate_scale(raw, mean_iat), 0.0)


def activate_point(raw, mean_iat):
    """Softplus point estimate rescaled so ``raw = 0`` maps to `mean_iat`."""
    return mean_iat * np.logaddexp(0.0, raw) / math.log(2.0)


def activate_point_grad(raw, mean_iat):
    return mean_iat * neural.sigmoid(raw) / math.log(2.0)


def split_outputs(raw, config: ModelConfig):
    """Weibull ``(scale, shape)`` arrays ``[..., p]`` from raw head outputs."""
    mu = np.asarray(config.mean_interarrival)
    return activate_scale(raw[..., 0::2], mu), activate_shape(raw[..., 1::2], config.k_max)


# -- losses --------------------------------------------------------------------


def _as_batch(targets: SurvivalTarget):
    arrs = [np.asarray(a) for a in (targets.tse, targets.tte, targets.uncensored, targets.mask)]
    return arrs[0].astype(float), arrs[1].astype(float), arrs[2].astype(bool), arrs[3].astype(bool)


def likelihood_inputs(targets: SurvivalTarget, config: ModelConfig):
    """Map grid targets to ``(elapsed, lower_edge, uncensored, mask)``."""
    tse, tte, unc, mask = _as_batch(targets)
    if config.bin_convention == "cell":
        if np.any(unc & mask & (tte < 1)):
            raise ValueError("uncensored grid targets need tte >= 1 under the cell convention")
        tte = np.where(unc, np.maximum(tte - 1.0, 0.0), tte)
    if config.loss_mode == "wtte":
        tse = np.zeros_like(tse)
    return tse, tte, unc, mask


def _n_subjects(raw):
    return raw.shape[0] if raw.ndim == 3 else 1


def likelihood_loss_and_grad(raw, targets: SurvivalTarget, config: ModelConfig):
    """Masked negative log-likelihood (summed over steps and processes,
    averaged over subjects) and its gradient with respect to `raw`."""
    if config.loss_mode == "sqloss":
        raise ValueError("likelihood loss requested for an sqloss model")
    s, t, unc, mask = likelihood_inputs(targets, config)
    mu = np.asarray(config.mean_interarrival)
    r_scale, r_shape = raw[..., 0::2], raw[..., 1::2]
    scale = activate_scale(r_scale, mu)
    shape = activate_shape(r_shape, config.k_max)
    ll, d_scale, d_shape = log_likelihood(s, t, unc, scale, shape, with_grad=True)
    n = _n_subjects(raw)
    loss = -np.sum(np.where(mask, ll, 0.0)) / n
    grad = np.zeros_like(raw)
    grad[..., 0::2] = np.where(mask, -d_scale * activate_scale_grad(r_scale, mu), 0.0) / n
    grad[..., 1::2] = np.where(mask, -d_shape * activate_shape_grad(r_shape, config.k_max), 0.0) / n
    return float(loss), grad


def total_loss(raw, targets: SurvivalTarget, config: ModelConfig) -> float:
    return likelihood_loss_and_grad(raw, targets, config)[0]


def sq_loss_and_grad(raw, targets: SurvivalTarget, config: ModelConfig):
    if config.loss_mode != "sqloss":
        raise ValueError("squared loss requested for a likelihood model")
    _, tte, unc, mask = _as_batch(targets)
    mu = np.asarray(config.mean_interarrival)
    r = raw[..., 0::2]
    pred = activate_point(r, mu)
    keep = mask & unc
    resid = np.where(keep, pred - tte, 0.0)
    n = _n_subjects(raw)
    grad = np.zeros_like(raw)
    grad[..., 0::2] = 2.0 * resid * activate_point_grad(r, mu) / n
    return float(np.sum(resid**2) / n), grad


def sq_loss(raw, targets: SurvivalTarget, config: ModelConfig) -> float:
    return sq_loss_and_grad(raw, targets, config)[0]


def loss_and_grad(raw, targets, config: ModelConfig):
    if config.loss_mode == "sqloss":
        return sq_loss_and_grad(raw, targets, config)
    return likelihood_loss_and_grad(raw, targets, config)


def scale_anchors(targets: SurvivalTarget, window_end=None):
    """Per-process mean of observed inter-arrival times.

    Inter-arrival times are read off arrival steps (``tse == 0``) whose next
    arrival is observed. Processes without any fall back to `window_end`, or
    to the number of steps when that is not given.
    """
    tse, tte, unc, mask = _as_batch(targets)
    hit = mask & unc & (tse == 0)
    p = tse.shape[-1]
    fallback = float(window_end if window_end is not None else tse.shape[-2])
    flat_hit = hit.reshape(-1, p)
    flat_tte = tte.reshape(-1, p)
    out = []
    for i in range(p):
        gaps = flat_tte[flat_hit[:, i], i]
        out.append(float(gaps.mean()) if gaps.size else fallback)
    return tuple(out)


# -- training ------------------------------------------------------------------


@dataclass
class TrainResult:
    state: neural.NetworkState
    history: list[float] = field(default_factory=list)
    final_loss: float = float("nan")


def init_state(n_inputs: int, config: ModelConfig) -> neural.NetworkState:
    params = neural.init_params(n_inputs, config.hidden, 2 * config.n_processes, config.seed)
    return neural.NetworkState(params)


def _take(targets: SurvivalTarget, idx):
    return SurvivalTarget(*(np.asarray(a)[idx] for a in _as_batch(targets)))


def train(x, targets: SurvivalTarget, config: ModelConfig, state=None) -> TrainResult:
    """Fit the network with clipped Adam.

    `x` is ``[subjects, steps, features]``; target arrays are
    ``[subjects, steps, p]``. One iteration is one Adam update on one batch.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    if state is None:
        state = init_state(x.shape[-1], config)
    n = x.shape[0]
    bs = n if not config.batch_size else min(config.batch_size, n)
    rng = np.random.default_rng(config.seed + 1)
    order = np.arange(n)
    cursor = n
    history = []
    for it in range(config.iterations):
        if bs == n:
            xb, tb = x, targets
        else:
            if cursor + bs > n:
                order = rng.permutation(n)
                cursor = 0
            idx = order[cursor : cursor + bs]
            cursor += bs
            xb, tb = x[idx], _take(targets, idx)
        raw, cache = neural.forward(state.params, xb)
        loss, d_raw = loss_and_grad(raw, tb, config)
        if not np.isfinite(loss) or not np.all(np.isfinite(d_raw)):
            raise TrainingDiverged(f"non-finite loss at iteration {it}: {loss}")
        grads = neural.clip_gradients(neural.backward(state.params, cache, d_raw), config.clip)
        neural.adam_update(state, grads, config.learning_rate)
        history.append(loss)
        if it % 50 == 0:
            log.debug("iteration %d loss %.6f", it, loss)
    final = evaluate_loss(state, x, targets, config)
    if not np.isfinite(final):
        raise TrainingDiverged(f"non-finite loss after training: {final}")
    return TrainResult(state, history, final)


def evaluate_loss(state, x, targets, config: ModelConfig) -> float:
    raw, _ = neural.forward(state.params, x)
    return loss_and_grad(raw, targets, config)[0]


# -- queries -------------------------------------------------------------------


def final_outputs(state, x, config: ModelConfig):
    """Raw head outputs at the last step, ``[subjects, 2p]``."""
    raw, _ = neural.forward(state.params, x)
    return raw[:, -1, :]


def final_parameters(state, x, config: ModelConfig):
    """Weibull ``(scale, shape)`` at the last step, each ``[subjects, p]``."""
    return split_outputs(final_outputs(state, x, config), config)


def _survival(t, s, scale, shape):
    return np.exp((s / scale) ** shape - ((s + t) / scale) ** shape)


def hit_probability(gamma, elapsed, scale, shape):
    """P(remaining time <= gamma) given `elapsed` time without an arrival."""
    return 1.0 - _survival(np.asarray(gamma, dtype=float), elapsed, scale, shape)


def deferred_probability(gamma1, gamma2, elapsed, scale, shape):
    """P(arrival in [gamma1, gamma1 + gamma2] | no arrival before gamma1)."""
    s1 = np.maximum(_survival(gamma1, elapsed, scale, shape), PROB_FLOOR)
    s2 = _survival(gamma1 + gamma2, elapsed, scale, shape)
    return np.clip(1.0 - s2 / s1, 0.0, 1.0)


def excess_mode(elapsed, scale, shape):
    elapsed, scale, shape = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (elapsed, scale, shape)))
    with np.errstate(divide="ignore", invalid="ignore"):
        uncond = scale * ((shape - 1.0) / shape) ** (1.0 / shape)
    return np.where(shape > 1.0, np.maximum(uncond - elapsed, 0.0), 0.0)


def excess_median(elapsed, scale, shape):
    # solve ((s + t)/scale)^k = (s/scale)^k + ln 2
    return scale * ((elapsed / scale) ** shape + math.log(2.0)) ** (1.0 / shape) - elapsed


def excess_mean(elapsed, scale, shape, tol=1e-8):
    """Mean remaining time, by adaptive quadrature of the excess survival."""
    elapsed, scale, shape = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (elapsed, scale, shape)))
    out = np.empty(elapsed.shape)
    for ix in np.ndindex(elapsed.shape):
        s, lam, k = elapsed[ix], scale[ix], shape[ix]
        a = (s / lam) ** k
        f = lambda t: math.exp(a - ((s + t) / lam) ** k)
        out[ix] = integrate.quad(f, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=200)[0]
    return out if out.ndim else float(out)


POINT_STATISTICS = {"mode": excess_mode, "median": excess_median, "mean": excess_mean}


def _elapsed_for(config, tse_final):
    tse_final = np.asarray(tse_final, dtype=float)
    return np.zeros_like(tse_final) if config.loss_mode == "wtte" else tse_final


def predict_hit_probability(state, x, tse_final, gamma, config: ModelConfig):
    """Per ``[subject, process]`` probability of an arrival within `gamma` steps.

    For ``sqloss`` models this returns the ranking score ``gamma - predicted``.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    raw = final_outputs(state, x, config)
    if config.loss_mode == "sqloss":
        return gamma - activate_point(raw[:, 0::2], np.asarray(config.mean_interarrival))
    scale, shape = split_outputs(raw, config)
    return hit_probability(gamma, _elapsed_for(config, tse_final), scale, shape)


def predict_deferred_probability(state, x, tse_final, gamma1, gamma2, config: ModelConfig):
    if config.loss_mode == "sqloss":
        raise ValueError("deferred probabilities need a likelihood model")
    scale, shape = final_parameters(state, x, config)
    return deferred_probability(gamma1, gamma2, _elapsed_for(config, tse_final), scale, shape)


def predict_point(state, x, tse_final, config: ModelConfig, statistic="mode"):
    if config.loss_mode == "sqloss":
        return activate_point(final_outputs(state, x, config)[:, 0::2], np.asarray(config.mean_interarrival))
    try:
        fn = POINT_STATISTICS[statistic]
    except KeyError:
        raise ValueError(f"unsupported statistic {statistic!r}; use one of {sorted(POINT_STATISTICS)}") from None
    scale, shape = final_parameters(state, x, config)
    return fn(_elapsed_for(config, tse_final), scale, shape)
