"""Per-item compression decision.

Two steps: a cheap threshold gate (size, data type) and then the latency
tradeoff::

    S_c / N + L_c < S / N      ->  compress

where ``S_c`` is the predicted compressed size (``S / compressibility``),
``L_c`` the predicted compression latency (``alpha * S + beta``) and ``N``
the current throughput estimate in bytes per second.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_MIN_SIZE = 4096
DEFAULT_EXCLUDED = frozenset({"image", "audio", "video"})
# 5 Mbps in bytes per second
DEFAULT_THROUGHPUT = 625_000.0

BYTES_PER_MBPS = 125_000.0


class InvalidModelError(ValueError):
    pass


def normalize_label(label: str) -> str:
    norm = str(label).strip().lower()
    if not norm:
        raise ValueError("data-type label must be non-empty")
    return norm


def mbps_to_bps(mbps: float) -> float:
    """Megabits per second to bytes per second."""
    return float(mbps) * BYTES_PER_MBPS


class Action(str, enum.Enum):
    COMPRESS = "Compress"
    SEND_RAW = "SendRaw"


class Reason(str, enum.Enum):
    BELOW_SIZE_THRESHOLD = "BelowSizeThreshold"
    EXCLUDED_TYPE = "ExcludedType"
    TRADEOFF_FAVORS_COMPRESS = "TradeoffFavorsCompress"
    TRADEOFF_FAVORS_RAW = "TradeoffFavorsRaw"


@dataclass(frozen=True)
class TypeModel:
    """Fitted coefficients for one data type.

    ``alpha`` is seconds per byte, ``beta`` seconds, ``compressibility`` the
    original/compressed size ratio.
    """

    label: str
    alpha: float
    beta: float
    compressibility: float

    def validate(self) -> "TypeModel":
        c = self.compressibility
        if not (isinstance(c, (int, float)) and math.isfinite(c) and c > 0):
            raise InvalidModelError(f"{self.label}: compressibility must be finite and > 0, got {c!r}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidModelError(f"{self.label}: {name} must be finite and >= 0, got {v!r}")
        return self

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "alpha": self.alpha,
            "beta": self.beta,
            "compressibility": self.compressibility,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TypeModel":
        return cls(
            label=normalize_label(d["label"]),
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            compressibility=float(d["compressibility"]),
        ).validate()


@dataclass(frozen=True)
class TransferItem:
    payload: bytes
    label: str
    item_id: str = ""
    group: str = ""

    def __post_init__(self):
        object.__setattr__(self, "label", normalize_label(self.label))

    @property
    def size(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class PolicyConfig:
    min_size_bytes: int = DEFAULT_MIN_SIZE
    excluded_labels: frozenset = field(default_factory=lambda: DEFAULT_EXCLUDED)
    default_throughput: float = DEFAULT_THROUGHPUT

    def __post_init__(self):
        if self.min_size_bytes < 0:
            raise ValueError("min_size_bytes must be >= 0")
        if not self.default_throughput > 0:
            raise ValueError("default_throughput must be > 0")
        object.__setattr__(
            self, "excluded_labels", frozenset(normalize_label(x) for x in self.excluded_labels)
        )

    def to_dict(self) -> dict:
        return {
            "min_size_bytes": self.min_size_bytes,
            "excluded_labels": sorted(self.excluded_labels),
            "default_throughput": self.default_throughput,
        }


@dataclass(frozen=True)
class Decision:
    action: Action
    reason: Reason
    predicted_compressed_size: Optional[int] = None
    predicted_compression_latency: Optional[float] = None

    @property
    def compress(self) -> bool:
        return self.action is Action.COMPRESS


def predict_compressed_size(size: int, model: TypeModel) -> int:
    if size < 0:
        raise ValueError("size must be >= 0")
    c = model.compressibility
    if not (math.isfinite(c) and c > 0):
        raise InvalidModelError(f"{model.label}: bad compressibility {c!r}")
    return max(0, round(size / c))


def predict_compression_latency(size: int, model: TypeModel) -> float:
    if size < 0:
        raise ValueError("size must be >= 0")
    if model.alpha < 0 or model.beta < 0 or not math.isfinite(model.alpha + model.beta):
        raise InvalidModelError(f"{model.label}: negative or non-finite latency coefficients")
    return model.alpha * size + model.beta


def threshold_gate(item: TransferItem, config: PolicyConfig) -> Optional[Decision]:
    """Rule compression out early; ``None`` means go on to the tradeoff."""
    return _gate(item.size, item.label, config)


def _gate(size: int, label: str, config: PolicyConfig) -> Optional[Decision]:
    if size < config.min_size_bytes:
        return Decision(Action.SEND_RAW, Reason.BELOW_SIZE_THRESHOLD)
    if label in config.excluded_labels:
        return Decision(Action.SEND_RAW, Reason.EXCLUDED_TYPE)
    return None


def tradeoff(size: int, compressed_size: float, compression_latency: float, throughput: float) -> bool:
    """True when the compressed path is strictly faster. Ties send raw."""
    return compressed_size / throughput + compression_latency < size / throughput


def decide(item: TransferItem, model: TypeModel, throughput: float, config: PolicyConfig) -> Decision:
    return decide_size(item.size, item.label, model, throughput, config)


def decide_size(size: int, label: str, model: TypeModel, throughput: float, config: PolicyConfig) -> Decision:
    """:func:`decide` for callers that know the size and label but hold no payload."""
    if not (throughput > 0 and math.isfinite(throughput)):
        raise ValueError(f"throughput must be positive and finite, got {throughput!r}")
    gated = _gate(size, normalize_label(label), config)
    if gated is not None:
        return gated
    s_c = predict_compressed_size(size, model)
    l_c = predict_compression_latency(size, model)
    if tradeoff(size, s_c, l_c, throughput):
        reason, action = Reason.TRADEOFF_FAVORS_COMPRESS, Action.COMPRESS
    else:
        reason, action = Reason.TRADEOFF_FAVORS_RAW, Action.SEND_RAW
    return Decision(action, reason, s_c, l_c)


def crossover_throughput(size: int, model: TypeModel) -> float:
    """Throughput above which the tradeoff flips to sending raw.

    Infinite when compression has no latency cost but saves bytes; zero when
    it saves nothing.
    """
    saved = size - predict_compressed_size(size, model)
    latency = predict_compression_latency(size, model)
    if saved <= 0:
        return 0.0
    if latency == 0:
        return math.inf
    return saved / latency
