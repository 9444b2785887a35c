"""Policy runs, the per-item time oracle, and the aggregate metrics built on
top of them (speedup, data usage, runtime breakdown, decision confusion)."""

from __future__ import annotations

import enum
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .codec import Codec, DeflateCodec
from .estimator import ThroughputEstimator
from .link import EpochSchedule, LinkSpec, item_rng, transmission_time
from .policy import (
    Action,
    Decision,
    PolicyConfig,
    Reason,
    TransferItem,
    TypeModel,
    decide_size,
    normalize_label,
)
from .training import ModelSet, timed_median
from .transfer import HttpEndpoint, TransferClient, TransferOutcome


class OracleUnavailableError(RuntimeError):
    pass


class Policy(str, enum.Enum):
    UNCOMPRESSED = "Uncompressed"
    COMPRESSED = "Compressed"
    SELECTIVE = "Selective"
    TIME_ORACLE = "TimeOracle"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        key = name.strip().lower().replace("_", "").replace("-", "")
        for p in cls:
            if p.value.lower() == key:
                return p
        raise ValueError(f"unknown policy {name!r}; choose from {[p.value for p in cls]}")


@dataclass
class MeasuredItem:
    """One corpus item with its codec behaviour measured once.

    Analytic runs rebuild every policy's latency from these numbers plus the
    link model, so repeated runs are exact. ``live`` holds shaped-socket
    raw/compressed totals keyed by link level when that pass was run.
    """

    item_id: str
    label: str
    group: str
    size: int
    compressed_size: int
    compression_latency: float
    decompression_latency: float
    decide_overhead: float = 0.0
    codec_id: str = ""
    path: str = ""
    live: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MeasuredItem":
        return cls(**d)


@dataclass(frozen=True)
class ItemMeasurement:
    item_id: str
    raw_total: float
    compressed_total: float
    raw_bytes: int
    compressed_bytes: int

    def __post_init__(self):
        if min(self.raw_total, self.compressed_total, self.raw_bytes, self.compressed_bytes) < 0:
            raise ValueError(f"negative measurement: {self}")


def time_oracle(m: ItemMeasurement) -> Decision:
    if m.compressed_total < m.raw_total:
        return Decision(Action.COMPRESS, Reason.TRADEOFF_FAVORS_COMPRESS)
    return Decision(Action.SEND_RAW, Reason.TRADEOFF_FAVORS_RAW)


def measure_item(payload: bytes, label: str, codec: Codec, item_id: str = "", group: str = "",
                 models: Optional[ModelSet] = None, config: Optional[PolicyConfig] = None,
                 repeats: int = 3, path: str = "") -> MeasuredItem:
    """Dual-measurement pass for one item: compress and decompress timings
    (medians), compressed size, and the cost of one decision."""
    label = normalize_label(label)
    comp_t, blob = timed_median(lambda: codec.compress(payload), repeats)
    decomp_t, back = timed_median(lambda: codec.decompress(blob), repeats)
    if back != payload:
        raise RuntimeError(f"{item_id}: codec round trip failed")
    config = config or PolicyConfig()
    model = models.model_for(label) if models is not None else TypeModel(label, 1e-8, 1e-4, 2.0)
    size = len(payload)
    decide_t, _ = timed_median(lambda: decide_size(size, label, model, config.default_throughput, config), max(repeats, 5))
    return MeasuredItem(item_id, label, group, size, len(blob), comp_t, decomp_t, decide_t,
                        getattr(codec, "codec_id", ""), path)


def analytic_outcome(rec: MeasuredItem, action: Action, link: LinkSpec, seed: int, index: int,
                     overhead: float = 0.0, reason: str = "") -> TransferOutcome:
    """Latency of sending ``rec`` one way over the analytic link.

    The jitter draw depends only on (seed, index), so both choices for an
    item see identical link conditions.
    """
    if action is Action.COMPRESS:
        wire, comp, decomp = rec.compressed_size, rec.compression_latency, rec.decompression_latency
    else:
        wire, comp, decomp = rec.size, 0.0, 0.0
    return TransferOutcome(
        item_id=rec.item_id,
        action_taken=action,
        bytes_on_wire=wire,
        original_size=rec.size,
        overhead=overhead,
        compression_time=comp,
        transmission_time=transmission_time(wire, link, item_rng(seed, index)),
        decompression_time=decomp,
        label=rec.label,
        group=rec.group,
        reason=reason,
        link_mbps=link.mbps,
    )


def item_measurement(rec: MeasuredItem, link: LinkSpec, seed: int = 0, index: int = 0) -> ItemMeasurement:
    raw = analytic_outcome(rec, Action.SEND_RAW, link, seed, index)
    comp = analytic_outcome(rec, Action.COMPRESS, link, seed, index)
    return ItemMeasurement(rec.item_id, raw.end_to_end, comp.end_to_end, raw.bytes_on_wire, comp.bytes_on_wire)


def _live_measurement(rec: MeasuredItem, link: LinkSpec) -> ItemMeasurement:
    key = _level_key(link.mbps)
    if key not in rec.live:
        raise OracleUnavailableError(
            f"{rec.item_id}: no live dual measurement at {link.mbps} Mbps; run the oracle pass with --live first"
        )
    m = rec.live[key]
    return ItemMeasurement(rec.item_id, m["raw_total"], m["compressed_total"], rec.size, rec.compressed_size)


def _level_key(mbps: float) -> str:
    return f"{mbps:g}"


def run_policy(dataset: Sequence, policy: Policy, schedule: EpochSchedule, *,
               models: Optional[ModelSet] = None, estimator: Optional[ThroughputEstimator] = None,
               config: Optional[PolicyConfig] = None, seed: int = 0,
               endpoint: Optional[HttpEndpoint] = None, codec: Optional[Codec] = None) -> list[TransferOutcome]:
    """Send every item of ``dataset`` in order under ``policy``.

    Without ``endpoint`` the run is analytic and ``dataset`` must hold
    :class:`MeasuredItem` records. With an endpoint each item's payload is
    read from ``MeasuredItem.path`` (or taken from a :class:`TransferItem`)
    and really uploaded.
    """
    policy = Policy(policy)
    config = config or PolicyConfig()
    if policy is Policy.SELECTIVE and models is None:
        raise ValueError("Selective policy needs a trained model set")
    if estimator is None:
        estimator = ThroughputEstimator(prior=config.default_throughput)
    estimator.reset()
    if any(not isinstance(rec, MeasuredItem) for rec in dataset):
        if policy is Policy.TIME_ORACLE:
            raise OracleUnavailableError("TimeOracle needs a dual-measurement pass over the dataset first")
        if endpoint is None:
            raise TypeError("analytic runs need MeasuredItem records")
    epochs = schedule.epoch_indices(len(dataset))
    if endpoint is None:
        return _run_analytic(dataset, policy, schedule, epochs, models, estimator, config, seed)
    return _run_live(dataset, policy, schedule, epochs, models, estimator, config, endpoint, codec)


def _run_analytic(dataset, policy, schedule, epochs, models, estimator, config, seed):
    out = []
    for i, rec in enumerate(dataset):
        e = epochs[i]
        link = schedule.epochs[e].link
        overhead = 0.0
        if policy is Policy.UNCOMPRESSED:
            action, reason = Action.SEND_RAW, "Forced"
        elif policy is Policy.COMPRESSED:
            action, reason = Action.COMPRESS, "Forced"
        elif policy is Policy.TIME_ORACLE:
            d = time_oracle(item_measurement(rec, link, seed, i))
            action, reason = d.action, "Oracle"
        else:
            d = decide_size(rec.size, rec.label, models.model_for(rec.label), estimator.estimate(), config)
            action, reason, overhead = d.action, d.reason.value, rec.decide_overhead
        o = analytic_outcome(rec, action, link, seed, i, overhead, reason)
        o.epoch = e
        if o.transmission_time > 0:
            estimator.observe(o.bytes_on_wire, o.transmission_time)
        out.append(o)
    return out


def _payload_of(rec) -> TransferItem:
    if isinstance(rec, TransferItem):
        return rec
    return TransferItem(Path(rec.path).read_bytes(), rec.label, rec.item_id, rec.group)


def _run_live(dataset, policy, schedule, epochs, models, estimator, config, endpoint, codec):
    client = TransferClient(endpoint, codec or DeflateCodec(), estimator)
    out = []
    for i, rec in enumerate(dataset):
        e = epochs[i]
        link = schedule.epochs[e].link
        endpoint.set_link(link)
        item = _payload_of(rec)
        t0 = time.perf_counter()
        if policy is Policy.UNCOMPRESSED:
            d = Decision(Action.SEND_RAW, Reason.TRADEOFF_FAVORS_RAW)
        elif policy is Policy.COMPRESSED:
            d = Decision(Action.COMPRESS, Reason.TRADEOFF_FAVORS_COMPRESS)
        elif policy is Policy.TIME_ORACLE:
            d = time_oracle(_live_measurement(rec, link))
        else:
            d = decide_size(item.size, item.label, models.model_for(item.label), estimator.estimate(), config)
        decision_time = time.perf_counter() - t0 if policy is Policy.SELECTIVE else 0.0
        o = client.send(item, d, decision_time, index=i)
        if policy is not Policy.SELECTIVE:
            o.reason = "Oracle" if policy is Policy.TIME_ORACLE else "Forced"
        o.epoch = e
        o.link_mbps = link.mbps
        out.append(o)
    return out


def live_dual_pass(records: Sequence[MeasuredItem], endpoint: HttpEndpoint, levels: Iterable[LinkSpec],
                   repeats: int = 3, codec: Optional[Codec] = None) -> None:
    """Send each item raw and compressed over the shaped socket at every level,
    storing median end-to-end totals in ``rec.live``."""
    client = TransferClient(endpoint, codec or DeflateCodec())
    raw_d = Decision(Action.SEND_RAW, Reason.TRADEOFF_FAVORS_RAW)
    comp_d = Decision(Action.COMPRESS, Reason.TRADEOFF_FAVORS_COMPRESS)
    for link in levels:
        endpoint.set_link(link)
        for i, rec in enumerate(records):
            item = _payload_of(rec)
            raw = statistics.median(client.send(item, raw_d, index=i).end_to_end for _ in range(repeats))
            comp = statistics.median(client.send(item, comp_d, index=i).end_to_end for _ in range(repeats))
            rec.live[_level_key(link.mbps)] = {"raw_total": raw, "compressed_total": comp}


# -- aggregate metrics -------------------------------------------------------

def _e2e_sum(outcomes: Iterable[TransferOutcome]) -> float:
    return math.fsum(o.end_to_end for o in outcomes)


def speedup(policy_outcomes: Sequence[TransferOutcome], baseline_outcomes: Sequence[TransferOutcome]) -> float:
    """Summed baseline latency over summed policy latency (end to end)."""
    num, den = _e2e_sum(baseline_outcomes), _e2e_sum(policy_outcomes)
    if den == 0:
        return math.inf if num > 0 else 1.0
    return num / den


def data_usage(policy_outcomes: Sequence[TransferOutcome], baseline_outcomes: Sequence[TransferOutcome]) -> float:
    num = sum(o.bytes_on_wire for o in policy_outcomes)
    den = sum(o.bytes_on_wire for o in baseline_outcomes)
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def _as_compress(d) -> bool:
    if isinstance(d, bool):
        return d
    if isinstance(d, Decision):
        return d.compress
    if isinstance(d, TransferOutcome):
        return d.compressed
    return Action(d) is Action.COMPRESS


def confusion(selective_decisions: Sequence, oracle_decisions: Sequence) -> dict:
    """Success, false-positive (compressed needlessly) and false-negative
    (missed a beneficial compression) rates against the oracle."""
    if len(selective_decisions) != len(oracle_decisions):
        raise ValueError("decision lists differ in length")
    n = len(selective_decisions)
    if n == 0:
        raise ValueError("no decisions to compare")
    fp = fn = 0
    for s, o in zip(selective_decisions, oracle_decisions):
        s, o = _as_compress(s), _as_compress(o)
        fp += s and not o
        fn += o and not s
    return {"success_rate": (n - fp - fn) / n, "false_positive_rate": fp / n, "false_negative_rate": fn / n}


def breakdown(outcomes: Sequence[TransferOutcome]) -> dict:
    parts = {
        "overhead": math.fsum(o.overhead for o in outcomes),
        "compression": math.fsum(o.compression_time for o in outcomes),
        "transmission": math.fsum(o.transmission_time for o in outcomes),
    }
    total = math.fsum(parts.values())
    if total == 0:
        return {"overhead": 0.0, "compression": 0.0, "transmission": 1.0}
    return {k: v / total for k, v in parts.items()}


def compressed_percentage_series(outcomes: Sequence[TransferOutcome], schedule: EpochSchedule) -> list[dict]:
    rows = []
    for (a, b), epoch in zip(schedule.bounds(len(outcomes)), schedule.epochs):
        chunk = outcomes[a:b]
        n = len(chunk)
        rows.append({
            "epoch": epoch.partition_index,
            "link_mbps": epoch.link.mbps,
            "n_items": n,
            "compressed_fraction": (sum(o.compressed for o in chunk) / n) if n else 0.0,
        })
    return rows


def group_speedups(policy_outcomes, baseline_outcomes) -> dict:
    groups: dict[str, list] = {}
    for p, b in zip(policy_outcomes, baseline_outcomes):
        if p.item_id != b.item_id:
            raise ValueError("outcome lists are not aligned by item")
        groups.setdefault(p.group, ([], []))
        groups[p.group][0].append(p)
        groups[p.group][1].append(b)
    return {g: speedup(ps, bs) for g, (ps, bs) in sorted(groups.items())}


def standard_error(values: Sequence[float]) -> float:
    vals = [v for v in values if math.isfinite(v)]
    if len(vals) < 2:
        return 0.0
    return statistics.stdev(vals) / math.sqrt(len(vals))


def win_rate(policy_outcomes, other_outcomes) -> float:
    """Share of groups where ``policy`` finishes strictly faster than ``other``."""
    per_group = group_speedups(policy_outcomes, other_outcomes)
    if not per_group:
        return 0.0
    return sum(v > 1.0 for v in per_group.values()) / len(per_group)
