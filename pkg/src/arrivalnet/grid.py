"""Per-step supervision targets (tse, tte, censoring, mask) on an integer grid.

Steps run over ``t = 1..window_end``. Before the first arrival, ``tse`` counts
from the window start and the step is masked out of the loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrivalSequence:
    arrivals: tuple[int, ...]
    window_end: int

    def __post_init__(self):
        arr = tuple(int(a) for a in self.arrivals)
        object.__setattr__(self, "arrivals", arr)
        if self.window_end <= 0:
            raise ValueError("window_end must be positive")
        if any(b <= a for a, b in zip(arr, arr[1:])):
            raise ValueError(f"arrivals must be strictly increasing: {arr}")
        if arr and (arr[0] <= 0 or arr[-1] > self.window_end):
            raise ValueError(f"arrivals must lie in (0, {self.window_end}]")

    @classmethod
    def from_times(cls, times, window_end: int) -> "ArrivalSequence":
        """Build from unsorted grid times; repeats collapse to one arrival."""
        uniq = sorted({int(t) for t in times if 0 < int(t) <= window_end})
        return cls(tuple(uniq), window_end)


@dataclass
class SurvivalTarget:
    tse: np.ndarray
    tte: np.ndarray
    uncensored: np.ndarray
    mask: np.ndarray

    def __len__(self):
        return len(self.tse)


def count_arrivals(seq: ArrivalSequence, t: int) -> int:
    if not 0 <= t <= seq.window_end:
        raise ValueError(f"t={t} outside window [0, {seq.window_end}]")
    return int(np.searchsorted(seq.arrivals, t, side="right"))


def build_targets(seq: ArrivalSequence) -> SurvivalTarget:
    tau = seq.window_end
    t = np.arange(1, tau + 1)
    w = np.asarray(seq.arrivals, dtype=int)
    n = np.searchsorted(w, t, side="right")  # arrivals at or before t

    last = np.where(n > 0, w[np.maximum(n - 1, 0)] if len(w) else 0, 0)
    tse = t - last
    has_next = n < len(w)
    nxt = w[np.minimum(n, len(w) - 1)] if len(w) else np.zeros_like(t)
    tte = np.where(has_next, nxt - t, tau - t)
    return SurvivalTarget(
        tse=tse.astype(int),
        tte=tte.astype(int),
        uncensored=has_next,
        mask=n > 0,
    )


def build_multivariate_targets(seqs, window_end: int | None = None) -> list[SurvivalTarget]:
    seqs = list(seqs)
    if not seqs:
        return []
    tau = seqs[0].window_end if window_end is None else window_end
    if any(s.window_end != tau for s in seqs):
        raise ValueError("all sequences must share the same window_end")
    return [build_targets(s) for s in seqs]


def stack_targets(targets: list[SurvivalTarget]) -> SurvivalTarget:
    """Stack per-process targets into ``[steps, processes]`` arrays."""
    return SurvivalTarget(
        tse=np.stack([x.tse for x in targets], axis=-1),
        tte=np.stack([x.tte for x in targets], axis=-1),
        uncensored=np.stack([x.uncensored for x in targets], axis=-1),
        mask=np.stack([x.mask for x in targets], axis=-1),
    )


def sliding_windows(length: int, window: int, stride: int = 1) -> list[range]:
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    if window > length:
        raise ValueError(f"window {window} longer than series {length}")
    return [range(s, s + window) for s in range(0, length - window + 1, stride)]
