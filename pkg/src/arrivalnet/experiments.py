"""Seeded synthetic experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import datagen, model
from .features import fit_normalizer, normalize_features
from .grid import SurvivalTarget
from .metrics import roc_auc
from .pipeline import holdout_labels, prepare


@dataclass
class SplitData:
    x: np.ndarray
    targets: SurvivalTarget
    tse_final: np.ndarray
    labels: np.ndarray
    anchors: tuple[float, ...]


def split_synthetic(dataset: datagen.SyntheticDataset, tau: int, horizon: int, with_covariates=True) -> SplitData:
    """Train on steps ``1..tau``; label arrivals in ``(tau, tau + horizon]``."""
    log = dataset.to_transactions()
    procs = [datagen.process_id(i) for i in range(dataset.spec.n_processes)]
    prep = prepare(log, tau, procs)
    x = prep.features
    if with_covariates:
        z = {s.subject_id: s.covariate for s in dataset.subjects}
        cov = np.array([z[s] for s in prep.subjects])
        x = np.concatenate([x, np.repeat(cov[:, None, None], tau, axis=1)], axis=2)
    x = normalize_features(x, fit_normalizer(x))
    labels, _ = holdout_labels(log, prep.subjects, procs, tau, horizon)
    return SplitData(x, prep.targets, prep.tse_final, labels, model.scale_anchors(prep.targets, tau))


def mean_auc(scores, labels):
    """Mean over processes of ROC-AUC, skipping single-class processes."""
    aucs = [
        roc_auc(scores[:, j], labels[:, j])
        for j in range(labels.shape[1])
        if 0 < labels[:, j].sum() < labels.shape[0]
    ]
    return float(np.mean(aucs)), aucs


def fit_and_score(data: SplitData, config: model.ModelConfig, horizon: int, process=None):
    """Train, then score the holdout. `process` restricts to one process."""
    targets, anchors, tse = data.targets, data.anchors, data.tse_final
    if process is not None:
        sl = slice(process, process + 1)
        targets = SurvivalTarget(*(np.asarray(a)[..., sl] for a in (targets.tse, targets.tte, targets.uncensored, targets.mask)))
        anchors = anchors[sl]
        tse = tse[:, sl]
    config = replace(config, n_processes=len(anchors), mean_interarrival=anchors)
    result = model.train(data.x, targets, config)
    scores = model.predict_hit_probability(result.state, data.x, tse, horizon, config)
    return scores, result


def censoring_experiment(seed=0, n_subjects=1200, hidden=8, iterations=600, learning_rate=2e-2):
    """Likelihood model vs squared-loss baseline on heavily censored, covariate-driven data."""
    tau, horizon = 40, 8
    spec = datagen.GeneratorSpec(
        n_processes=2,
        scales=(40.0, 60.0),
        shapes=(1.5, 1.5),
        n_subjects=n_subjects,
        window=tau + horizon,
        seed=seed,
        covariate_effect=1.2,
    )
    ds = datagen.generate(spec)
    data = split_synthetic(ds, tau, horizon)
    base = model.ModelConfig(
        n_processes=2,
        mean_interarrival=data.anchors,
        hidden=hidden,
        iterations=iterations,
        learning_rate=learning_rate,
        seed=seed,
    )
    out = {"censoring_fraction": datagen.censoring_fraction(ds, tau)[0]}
    for mode in ("matrnn", "sqloss"):
        scores, _ = fit_and_score(data, replace(base, loss_mode=mode), horizon)
        out[mode] = mean_auc(scores, data.labels)[0]
    return out


def joint_experiment(seed=0, n_subjects=300, hidden=8, iterations=200, learning_rate=1e-2, coupling=0.6):
    """One joint model over four coupled processes vs four single-process models."""
    tau, horizon = 50, 5
    spec = datagen.GeneratorSpec(
        n_processes=4,
        scales=(12.0, 16.0, 20.0, 24.0),
        shapes=(1.5, 1.5, 1.5, 1.5),
        n_subjects=n_subjects,
        window=tau + horizon,
        seed=seed,
        covariate_effect=0.5,
        coupling=coupling,
        coupling_factor=0.3,
    )
    data = split_synthetic(datagen.generate(spec), tau, horizon)
    base = model.ModelConfig(
        n_processes=4,
        mean_interarrival=data.anchors,
        hidden=hidden,
        iterations=iterations,
        learning_rate=learning_rate,
        seed=seed,
    )
    joint, _ = fit_and_score(data, base, horizon)
    single = np.column_stack([fit_and_score(data, base, horizon, process=j)[0][:, 0] for j in range(4)])
    return {"joint": mean_auc(joint, data.labels)[0], "single": mean_auc(single, data.labels)[0]}


def recovery_experiment(seed=0, n_subjects=200, window=100, hidden=4, iterations=500, learning_rate=1e-2):
    """Fit stationary exponential data (scale 5) with constant inputs.

    Returns the mean final-step ``(scale, shape)`` and the number of observed
    inter-arrival intervals.
    """
    spec = datagen.GeneratorSpec(scales=(5.0,), shapes=(1.0,), n_subjects=n_subjects, window=window, seed=seed)
    prep = prepare(datagen.generate(spec).to_transactions(), window, ["p0"])
    x = np.zeros(prep.features.shape[:2] + (1,))
    config = model.ModelConfig(
        n_processes=1,
        mean_interarrival=model.scale_anchors(prep.targets, window),
        hidden=hidden,
        iterations=iterations,
        learning_rate=learning_rate,
        seed=seed,
    )
    result = model.train(x, prep.targets, config)
    scale, shape = model.final_parameters(result.state, x, config)
    observed = np.asarray(prep.targets.uncensored) & (np.asarray(prep.targets.tse) == 0) & np.asarray(prep.targets.mask)
    return float(scale.mean()), float(shape.mean()), int(observed.sum())
