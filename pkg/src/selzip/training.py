"""Install-time training of per-type size and latency models."""

from __future__ import annotations

import json
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .codec import Codec, CodecError
from .policy import TypeModel, normalize_label

logger = logging.getLogger(__name__)

GLOBAL_LABEL = "*"


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingSample:
    label: str
    original_size: int
    compressed_size: int
    compression_latency: float

    def __post_init__(self):
        if self.original_size < 0 or self.compressed_size < 0 or self.compression_latency < 0:
            raise ValueError(f"negative field in training sample: {self}")


def timed_median(fn, repeats: int = 3) -> tuple[float, object]:
    """Median wall time of ``fn()`` over ``repeats`` runs, and the last result."""
    times = []
    result = None
    for _ in range(max(3, repeats)):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), result


def measure_sample(payload: bytes, label: str, codec: Codec, repeats: int = 3) -> TrainingSample:
    try:
        latency, out = timed_median(lambda: codec.compress(payload), repeats)
    except CodecError as exc:
        raise CodecError(f"sample rejected ({label}, {len(payload)} B): {exc}") from exc
    return TrainingSample(normalize_label(label), len(payload), len(out), latency)


def fit_type_model(samples: list[TrainingSample], label: Optional[str] = None) -> TypeModel:
    """OLS of latency on size, plus the size-weighted compressibility."""
    if not samples:
        raise DegenerateFitError("no samples to fit")
    label = normalize_label(label or samples[0].label)
    total_orig = math.fsum(s.original_size for s in samples)
    total_comp = math.fsum(s.compressed_size for s in samples)
    if total_orig == 0 or total_comp == 0:
        raise DegenerateFitError(f"{label}: all-zero sizes, compressibility undefined")
    compressibility = total_orig / total_comp

    xs = [float(s.original_size) for s in samples]
    ys = [s.compression_latency for s in samples]
    n = len(xs)
    y_mean = math.fsum(ys) / n
    if len(set(xs)) < 2:
        return TypeModel(label, 0.0, max(0.0, y_mean), compressibility)

    x_mean = math.fsum(xs) / n
    sxx = math.fsum((x - x_mean) ** 2 for x in xs)
    sxy = math.fsum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    alpha = sxy / sxx
    beta = y_mean - alpha * x_mean
    if alpha < 0:
        alpha, beta = 0.0, y_mean
    beta = max(0.0, beta)
    return TypeModel(label, alpha, beta, compressibility)


@dataclass(frozen=True)
class ModelSet:
    per_label: dict
    global_fallback: TypeModel
    codec_id: str
    trained_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def model_for(self, label: str) -> TypeModel:
        """Per-type model, or the corpus-wide fallback for unseen labels."""
        return self.per_label.get(normalize_label(label), self.global_fallback)

    def to_dict(self) -> dict:
        return {
            "codec_id": self.codec_id,
            "trained_at": self.trained_at,
            "models": [self.per_label[k].to_dict() for k in sorted(self.per_label)],
            "global_fallback": self.global_fallback.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSet":
        models = [TypeModel.from_dict(m) for m in d["models"]]
        return cls(
            per_label={m.label: m for m in models},
            global_fallback=TypeModel.from_dict(d["global_fallback"]),
            codec_id=d["codec_id"],
            trained_at=d.get("trained_at", ""),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "ModelSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_model_set(samples: Iterable[TrainingSample], codec_id: str) -> ModelSet:
    samples = list(samples)
    if not samples:
        raise DegenerateFitError("empty usable corpus")
    by_label: dict[str, list[TrainingSample]] = {}
    for s in samples:
        by_label.setdefault(s.label, []).append(s)
    per_label = {label: fit_type_model(group, label) for label, group in sorted(by_label.items())}
    fallback = fit_type_model(samples, GLOBAL_LABEL)
    return ModelSet(per_label, fallback, codec_id)


def read_manifest(path) -> list[dict]:
    """Read a JSON-lines corpus manifest. Paths resolve against the manifest's directory."""
    path = Path(path)
    records = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "path" not in rec or "label" not in rec:
                raise ValueError(f"{path}:{lineno}: manifest record needs 'path' and 'label'")
            rec["resolved"] = (path.parent / rec["path"]).resolve()
            rec.setdefault("id", Path(rec["path"]).stem)
            rec.setdefault("group", "")
            records.append(rec)
    return records


def train_corpus(manifest, codec: Codec, repeats: int = 3) -> ModelSet:
    records = read_manifest(manifest)
    if not records:
        raise DegenerateFitError(f"{manifest}: empty manifest")
    samples = []
    for rec in records:
        try:
            payload = Path(rec["resolved"]).read_bytes()
            samples.append(measure_sample(payload, rec["label"], codec, repeats))
        except (OSError, CodecError, ValueError) as exc:
            logger.warning("skipping %s: %s", rec["path"], exc)
    if not samples:
        raise DegenerateFitError(f"{manifest}: no usable corpus entries")
    return fit_model_set(samples, codec.codec_id)
