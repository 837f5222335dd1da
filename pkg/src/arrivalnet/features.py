"""Per-step covariates from transaction logs.

Each process gets five channels (recency, frequency, monetary, first-purchase
flag, log(1 + tse)); six more are shared across processes (basket RFM and
overall RFM). With ``p`` processes the network sees ``5p + 6`` inputs.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

PER_PROCESS_CHANNELS = ("recency", "frequency", "monetary", "pch", "log_tse")
SHARED_CHANNELS = (
    "basket_recency",
    "basket_frequency",
    "basket_monetary",
    "overall_recency",
    "overall_frequency",
    "overall_monetary",
)


@dataclass(frozen=True)
class Transaction:
    subject: str
    process: str
    t: int
    value: float = 0.0
    quantity: int = 1

    def __post_init__(self):
        if not self.subject or not self.process:
            raise ValueError("subject and process ids must be nonempty")
        if self.t < 1:
            raise ValueError(f"grid time must be >= 1, got {self.t}")
        if self.value < 0:
            raise ValueError(f"value must be nonnegative, got {self.value}")
        if self.quantity < 1:
            raise ValueError(f"quantity must be >= 1, got {self.quantity}")


@dataclass
class TransactionLog:
    records: list[Transaction] = field(default_factory=list)

    def __post_init__(self):
        self._by_subject = defaultdict(list)
        for r in self.records:
            self._by_subject[r.subject].append(r)

    def subjects(self) -> list[str]:
        return sorted(self._by_subject)

    def processes(self) -> list[str]:
        return sorted({r.process for r in self.records})

    def for_subject(self, subject) -> list[Transaction]:
        return self._by_subject.get(subject, [])

    def arrival_times(self, subject, process, window_end=None) -> list[int]:
        """Distinct grid times with a purchase, optionally capped at `window_end`."""
        ts = {r.t for r in self.for_subject(subject) if r.process == process}
        if window_end is not None:
            ts = {t for t in ts if t <= window_end}
        return sorted(ts)


@dataclass
class FeatureSeries:
    per_process: np.ndarray  # [steps, p, 5]
    shared: np.ndarray  # [steps, 6]

    def matrix(self) -> np.ndarray:
        steps = self.per_process.shape[0]
        return np.concatenate([self.per_process.reshape(steps, -1), self.shared], axis=1)


def rfm(bought: np.ndarray, spend: np.ndarray):
    """Recency, frequency (repeat purchases) and cumulative monetary per step."""
    steps = len(bought)
    idx = np.arange(steps)
    last = np.maximum.accumulate(np.where(bought, idx, -1))
    recency = np.where(last >= 0, idx - last, 0)
    frequency = np.maximum(np.cumsum(bought) - 1, 0)
    monetary = np.cumsum(spend)
    return recency.astype(float), frequency.astype(float), monetary.astype(float)


def _level(records, tau, keep):
    bought = np.zeros(tau, dtype=bool)
    spend = np.zeros(tau)
    for r in records:
        if r.t <= tau and keep(r):
            bought[r.t - 1] = True
            spend[r.t - 1] += r.value
    return bought, spend


def build_features(log: TransactionLog, subject, tau: int, processes, basket=None):
    """Dense features for steps ``1..tau``; None for an unknown subject.

    Only records at or before `tau` are read. `basket` defaults to all of
    `processes`; the overall level always covers every record of the subject.
    """
    records = log.for_subject(subject)
    if not records:
        return None
    basket = set(processes if basket is None else basket)
    steps = np.arange(1, tau + 1)

    per = np.zeros((tau, len(processes), len(PER_PROCESS_CHANNELS)))
    for j, proc in enumerate(processes):
        bought, spend = _level(records, tau, lambda r, proc=proc: r.process == proc)
        rec, freq, mon = rfm(bought, spend)
        pch = np.cumsum(bought) > 0
        tse = np.where(pch, rec, steps)  # counts from window start until first purchase
        per[:, j] = np.column_stack([rec, freq, mon, pch.astype(float), np.log1p(tse)])

    shared = np.column_stack(
        rfm(*_level(records, tau, lambda r: r.process in basket))
        + rfm(*_level(records, tau, lambda r: True))
    )
    return FeatureSeries(per, shared)


def basket_score(mean_purchases: float, unique_customers: int) -> float:
    """Popularity score ``X * ln(N)`` used to rank candidate baskets."""
    if unique_customers < 1:
        raise ValueError("unique_customers must be >= 1")
    if mean_purchases < 0:
        raise ValueError("mean_purchases must be nonnegative")
    return mean_purchases * math.log(unique_customers)


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray


def fit_normalizer(x: np.ndarray) -> NormStats:
    """Population mean/std per channel over every leading axis of `x`."""
    flat = x.reshape(-1, x.shape[-1])
    return NormStats(flat.mean(axis=0), flat.std(axis=0))


def normalize_features(x: np.ndarray, stats: NormStats) -> np.ndarray:
    """Z-score per channel; zero-variance channels become zeros."""
    std = np.where(stats.std > 0, stats.std, 1.0)
    z = (x - stats.mean) / std
    return np.where(stats.std > 0, z, 0.0)
