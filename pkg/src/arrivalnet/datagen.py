"""Synthetic multivariate arrival processes with known Weibull ground truth.

Each subject draws a covariate ``z ~ U(-1, 1)``; process ``i`` then renews with
Weibull inter-arrival times of scale ``scale_i * exp(covariate_effect * z)``
and shape ``shape_i``. With coupling ``rho > 0``, every arrival of one process
shortens, with probability ``rho``, the pending wait of each other process by
``coupling_factor``. Continuous arrival times are snapped up to the integer
grid (``ceil``); arrivals sharing a cell collapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import Transaction, TransactionLog
from .grid import ArrivalSequence, build_targets
from .survival import K_MAX


@dataclass(frozen=True)
class GeneratorSpec:
    n_processes: int = 1
    scales: tuple[float, ...] = (5.0,)
    shapes: tuple[float, ...] = (1.0,)
    n_subjects: int = 100
    window: int = 100
    seed: int = 0
    covariate_effect: float = 0.0
    coupling: float = 0.0
    coupling_factor: float = 0.5
    mean_value: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(x) for x in self.scales))
        object.__setattr__(self, "shapes", tuple(float(x) for x in self.shapes))
        if self.n_processes < 1:
            raise ValueError("n_processes must be >= 1")
        if len(self.scales) != self.n_processes or len(self.shapes) != self.n_processes:
            raise ValueError("need one scale and one shape per process")
        if any(not s > 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if any(not 0 < k < K_MAX for k in self.shapes):
            raise ValueError(f"shapes must lie in (0, {K_MAX})")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must lie in [0, 1]")
        if not 0.0 < self.coupling_factor <= 1.0:
            raise ValueError("coupling_factor must lie in (0, 1]")


@dataclass
class SyntheticSubject:
    subject_id: str
    covariate: float
    scales: tuple[float, ...]
    raw_times: list[np.ndarray]
    sequences: list[ArrivalSequence]
    values: list[np.ndarray] = field(default_factory=list)


@dataclass
class SyntheticDataset:
    spec: GeneratorSpec
    subjects: list[SyntheticSubject]

    def covariates(self) -> np.ndarray:
        """Static covariate repeated over steps, ``[subjects, window, 1]``."""
        z = np.array([s.covariate for s in self.subjects])
        return np.repeat(z[:, None, None], self.spec.window, axis=1)

    def sequences(self, window_end: int | None = None) -> list[list[ArrivalSequence]]:
        """Per subject, per process grid arrivals, optionally truncated."""
        if window_end is None:
            return [list(s.sequences) for s in self.subjects]
        return [[truncate(q, window_end) for q in s.sequences] for s in self.subjects]

    def to_transactions(self) -> TransactionLog:
        records = []
        for subj in self.subjects:
            for i, seq in enumerate(subj.sequences):
                for t, v in zip(seq.arrivals, subj.values[i]):
                    records.append(Transaction(subj.subject_id, process_id(i), t, float(v), 1))
        return TransactionLog(records)


def process_id(i: int) -> str:
    return f"p{i}"


def truncate(seq: ArrivalSequence, window_end: int) -> ArrivalSequence:
    return ArrivalSequence(tuple(a for a in seq.arrivals if a <= window_end), window_end)


def weibull_from_uniform(u, scale, shape):
    """Inverse-transform map ``scale * (-ln u) ** (1 / shape)``."""
    return scale * (-np.log(u)) ** (1.0 / shape)


def sample_weibull(scale, shape, rng: np.random.Generator, size=None):
    u = 1.0 - rng.random(size)  # (0, 1]
    return weibull_from_uniform(u, scale, shape)


def _simulate(spec: GeneratorSpec, scales, rng):
    p = spec.n_processes
    pending = np.array([sample_weibull(scales[i], spec.shapes[i], rng) for i in range(p)])
    times = [[] for _ in range(p)]
    while True:
        i = int(np.argmin(pending))
        now = pending[i]
        if now > spec.window:
            break
        times[i].append(now)
        if spec.coupling > 0 and p > 1:
            for j in range(p):
                if j != i and rng.random() < spec.coupling:
                    pending[j] = now + (pending[j] - now) * spec.coupling_factor
        pending[i] = now + sample_weibull(scales[i], spec.shapes[i], rng)
    return [np.asarray(t) for t in times]


def generate(spec: GeneratorSpec) -> SyntheticDataset:
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_subjects)
    width = len(str(spec.n_subjects - 1))
    subjects = []
    for n, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        z = float(rng.uniform(-1.0, 1.0))
        scales = tuple(s * math.exp(spec.covariate_effect * z) for s in spec.scales)
        raw = _simulate(spec, scales, rng)
        seqs, values = [], []
        for times in raw:
            grid = sorted({int(math.ceil(x)) for x in times if x > 0})
            grid = [g for g in grid if 1 <= g <= spec.window]
            seqs.append(ArrivalSequence(tuple(grid), spec.window))
            v = rng.gamma(2.0, spec.mean_value * math.exp(0.3 * z) / 2.0, size=len(grid))
            values.append(np.round(v, 2))
        subjects.append(SyntheticSubject(f"s{n:0{width}d}", z, scales, raw, seqs, values))
    return SyntheticDataset(spec, subjects)


def censoring_fraction(dataset: SyntheticDataset, window_end: int | None = None):
    """Fraction of unmasked per-step targets that are censored.

    Returns ``(fraction, defined)``; with no unmasked steps the fraction is
    reported as 0.0 and `defined` is False.
    """
    censored = observed = 0
    for seqs in dataset.sequences(window_end):
        for seq in seqs:
            tgt = build_targets(seq)
            observed += int(tgt.mask.sum())
            censored += int((tgt.mask & ~tgt.uncensored).sum())
    if observed == 0:
        return 0.0, False
    return censored / observed, True
