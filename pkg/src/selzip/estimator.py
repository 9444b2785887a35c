"""Moving-average throughput estimate fed by completed transfers."""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Optional

from .policy import DEFAULT_THROUGHPUT

DEFAULT_DECAY = 0.05


class InvalidSampleError(ValueError):
    pass


@dataclass(frozen=True)
class ThroughputSample:
    bytes_transferred: int
    elapsed: float

    @property
    def rate(self) -> float:
        return self.bytes_transferred / self.elapsed


@dataclass(frozen=True)
class EstimatorState:
    ewma: Optional[float] = None
    sample_count: int = 0
    decay: float = DEFAULT_DECAY
    prior: float = DEFAULT_THROUGHPUT
    warmup: int = 1

    def __post_init__(self):
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")
        if not self.prior > 0:
            raise ValueError("prior must be > 0")
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")

    def params(self) -> dict:
        return {"decay": self.decay, "prior": self.prior, "warmup": self.warmup}


def add_sample(state: EstimatorState, sample: ThroughputSample) -> EstimatorState:
    if not sample.elapsed > 0:
        raise InvalidSampleError(f"elapsed must be > 0, got {sample.elapsed}")
    if not sample.bytes_transferred > 0:
        raise InvalidSampleError(f"bytes_transferred must be > 0, got {sample.bytes_transferred}")
    r = sample.rate
    if state.ewma is None:
        ewma = r
    else:
        ewma = (1 - state.decay) * state.ewma + state.decay * r
    return replace(state, ewma=ewma, sample_count=state.sample_count + 1)


def current_estimate(state: EstimatorState) -> float:
    if state.ewma is not None and state.sample_count >= state.warmup:
        return state.ewma
    return state.prior


def reset(state: EstimatorState) -> EstimatorState:
    return replace(state, ewma=None, sample_count=0)


class ThroughputEstimator:
    """Shared, lock-guarded holder around an :class:`EstimatorState`.

    Invalid samples (zero-byte or zero-duration transfers) are dropped and
    counted rather than raised, since they come from live traffic.
    """

    def __init__(self, decay: float = DEFAULT_DECAY, prior: float = DEFAULT_THROUGHPUT, warmup: int = 1):
        self._state = EstimatorState(decay=decay, prior=prior, warmup=warmup)
        self._lock = threading.Lock()
        self.rejected = 0

    @property
    def state(self) -> EstimatorState:
        with self._lock:
            return self._state

    def observe(self, bytes_transferred: int, elapsed: float) -> bool:
        sample = ThroughputSample(bytes_transferred, elapsed)
        with self._lock:
            try:
                self._state = add_sample(self._state, sample)
            except InvalidSampleError:
                self.rejected += 1
                return False
        return True

    def estimate(self) -> float:
        with self._lock:
            return current_estimate(self._state)

    def reset(self) -> None:
        with self._lock:
            self._state = reset(self._state)
            self.rejected = 0
