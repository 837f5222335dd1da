"""Glue between transaction logs and model tensors.

Training data for a cutoff ``tau`` only ever reads records at or before
``tau``; holdout labels read the records after it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import TransactionLog, build_features
from .grid import ArrivalSequence, SurvivalTarget, build_targets, sliding_windows, stack_targets


@dataclass
class Prepared:
    subjects: list[str]
    processes: list[str]
    features: np.ndarray  # [subjects, tau, 5p + 6], unnormalized
    targets: SurvivalTarget  # arrays [subjects, tau, p]

    @property
    def tse_final(self) -> np.ndarray:
        return np.asarray(self.targets.tse)[:, -1, :].astype(float)


def active_subjects(log: TransactionLog, tau: int, processes=None) -> list[str]:
    """Subjects with at least one arrival of a listed process at or before `tau`."""
    procs = None if processes is None else set(processes)
    return [
        s
        for s in log.subjects()
        if any(r.t <= tau and (procs is None or r.process in procs) for r in log.for_subject(s))
    ]


def targets_for(log: TransactionLog, subject, processes, tau: int) -> SurvivalTarget:
    seqs = [ArrivalSequence.from_times(log.arrival_times(subject, p, tau), tau) for p in processes]
    return stack_targets([build_targets(q) for q in seqs])


def prepare(log: TransactionLog, tau: int, processes=None, subjects=None, basket=None) -> Prepared:
    processes = list(processes) if processes is not None else log.processes()
    subjects = list(subjects) if subjects is not None else active_subjects(log, tau, processes)
    feats, tgts = [], []
    for s in subjects:
        fs = build_features(log, s, tau, processes, basket)
        if fs is None:
            raise KeyError(f"unknown subject {s!r}")
        feats.append(fs.matrix())
        tgts.append(targets_for(log, s, processes, tau))
    p, f = len(processes), 5 * len(processes) + 6
    if not subjects:
        empty = np.zeros((0, tau, p))
        return Prepared([], processes, np.zeros((0, tau, f)), SurvivalTarget(empty, empty, empty.astype(bool), empty.astype(bool)))
    batch = SurvivalTarget(*(np.stack([getattr(t, k) for t in tgts]) for k in ("tse", "tte", "uncensored", "mask")))
    return Prepared(subjects, processes, np.stack(feats), batch)


def segment(x: np.ndarray, targets: SurvivalTarget, window: int, stride: int = 1):
    """Cut every subject into sliding windows along the step axis.

    Targets are sliced, not recomputed, so tse/tte keep their full-history
    values.
    """
    idx = sliding_windows(x.shape[1], window, stride)
    xs = np.concatenate([x[:, r.start : r.stop] for r in idx], axis=0)
    parts = [
        np.concatenate([np.asarray(a)[:, r.start : r.stop] for r in idx], axis=0)
        for a in (targets.tse, targets.tte, targets.uncensored, targets.mask)
    ]
    return xs, SurvivalTarget(*parts)


def holdout_labels(log: TransactionLog, subjects, processes, tau: int, horizon: int):
    """``labels[i, j]``: subject i bought process j in ``(tau, tau + horizon]``.

    Also returns the steps from `tau` to the first later arrival (NaN if none
    is recorded).
    """
    labels = np.zeros((len(subjects), len(processes)), dtype=bool)
    actual = np.full((len(subjects), len(processes)), np.nan)
    for i, s in enumerate(subjects):
        for j, p in enumerate(processes):
            later = [t for t in log.arrival_times(s, p) if t > tau]
            if later:
                actual[i, j] = later[0] - tau
                labels[i, j] = later[0] <= tau + horizon
    return labels, actual
