"""Experiment orchestration: corpus generation, training, the dual-measurement
pass, policy runs and report files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .codec import DeflateCodec
from .corpus import CorpusSpec, generate_corpus, preset
from .estimator import DEFAULT_DECAY, ThroughputEstimator
from .link import EpochSchedule, LinkSpec, make_schedule
from .metrics import (
    MeasuredItem,
    Policy,
    breakdown,
    compressed_percentage_series,
    confusion,
    data_usage,
    group_speedups,
    live_dual_pass,
    measure_item,
    run_policy,
    speedup,
    standard_error,
    win_rate,
)
from .policy import DEFAULT_EXCLUDED, DEFAULT_MIN_SIZE, DEFAULT_THROUGHPUT, PolicyConfig
from .training import ModelSet, read_manifest, train_corpus
from .transfer import HttpEndpoint, TransferOutcome

logger = logging.getLogger(__name__)

MEASUREMENTS = "measurements.jsonl"
OUTCOMES = "outcomes.jsonl"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
EPOCHS_CSV = "epochs.csv"
SCHEDULE_JSON = "schedule.json"
CONFIG_JSON = "config.json"

REPORT_COLUMNS = [
    "dataset", "condition", "link_mbps", "policy", "n_items", "n_groups",
    "total_s", "client_total_s", "decompression_s",
    "speedup", "speedup_se", "win_vs_uncompressed", "win_vs_compressed",
    "bytes_on_wire", "data_usage", "compressed_frac",
    "overhead_frac", "compression_frac", "transmission_frac",
    "success_rate", "false_positive_rate", "false_negative_rate",
    "config_hash", "codec_id", "min_size_bytes", "excluded_labels",
    "decay", "prior_bps", "warmup", "group_size",
]
EPOCH_COLUMNS = [
    "dataset", "condition", "policy", "epoch", "link_mbps", "n_items",
    "compressed_frac", "speedup", "config_hash",
]
ALL_POLICIES = [p.value for p in Policy]


class HarnessError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    manifest: str = ""
    models: str = ""
    measurements: str = ""
    out: str = "out"
    mbps: list = field(default_factory=lambda: [2.0, 5.0, 10.0])
    dynamic: bool = False
    partitions: int = 4
    schedule: str = ""
    policies: list = field(default_factory=lambda: list(ALL_POLICIES))
    seed: int = 0
    decay: float = DEFAULT_DECAY
    prior_bps: float = DEFAULT_THROUGHPUT
    warmup: int = 1
    min_size_bytes: int = DEFAULT_MIN_SIZE
    excluded_labels: list = field(default_factory=lambda: sorted(DEFAULT_EXCLUDED))
    rtt: float = 0.0
    jitter: float = 0.0
    dataset: str = ""
    live_url: str = ""
    repeats: int = 3

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(self.min_size_bytes, frozenset(self.excluded_labels), self.prior_bps)

    def estimator(self) -> ThroughputEstimator:
        return ThroughputEstimator(self.decay, self.prior_bps, self.warmup)

    def measurements_path(self) -> Path:
        return Path(self.measurements) if self.measurements else Path(self.out) / MEASUREMENTS

    def dataset_name(self) -> str:
        if self.dataset:
            return self.dataset
        return Path(self.manifest).parent.name if self.manifest else "dataset"

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self, extra: str = "") -> str:
        """Hash of everything that shapes results; the output directory is left out."""
        d = self.to_dict()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True) + extra
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- gen / train / oracle -----------------------------------------------------

def cmd_gen(out_dir, preset_name: str = "mixed", n_items: int = 100, seed: int = 0,
            spec: Optional[CorpusSpec] = None) -> Path:
    spec = spec or preset(preset_name, n_items, seed)
    return generate_corpus(spec, out_dir)


def cmd_train(manifest, out_path, repeats: int = 3) -> Path:
    if not Path(manifest).exists():
        raise HarnessError(f"manifest not found: {manifest}")
    models = train_corpus(manifest, DeflateCodec(), repeats)
    return models.save(out_path)


def load_measurements(path) -> list[MeasuredItem]:
    path = Path(path)
    if not path.exists():
        raise HarnessError(f"no dual-measurement log at {path}; run `selzip oracle` first")
    with path.open() as fh:
        return [MeasuredItem.from_dict(json.loads(line)) for line in fh if line.strip()]


def save_measurements(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    return path


def cmd_oracle(config: ExperimentConfig) -> Path:
    """Measure each item both ways once; with ``live_url`` also over shaped sockets."""
    if not config.manifest or not Path(config.manifest).exists():
        raise HarnessError(f"manifest not found: {config.manifest!r}")
    models = ModelSet.load(config.models) if config.models and Path(config.models).exists() else None
    codec = DeflateCodec()
    pcfg = config.policy_config()
    records = []
    for rec in read_manifest(config.manifest):
        payload = Path(rec["resolved"]).read_bytes()
        records.append(measure_item(payload, rec["label"], codec, rec["id"], rec.get("group", ""),
                                    models, pcfg, config.repeats, str(rec["resolved"])))
    if config.live_url:
        levels = [LinkSpec.from_mbps(m, config.rtt, config.jitter) for m in config.mbps]
        endpoint = HttpEndpoint.from_url(config.live_url)
        try:
            live_dual_pass(records, endpoint, levels, config.repeats, codec)
        finally:
            endpoint.close()
    return save_measurements(records, config.measurements_path())


# -- run ------------------------------------------------------------------------

def conditions(config: ExperimentConfig, n_items: int) -> list[tuple[str, EpochSchedule]]:
    levels = [LinkSpec.from_mbps(m, config.rtt, config.jitter) for m in config.mbps]
    if config.schedule:
        return [("dynamic", EpochSchedule.load(config.schedule, config.rtt, config.jitter))]
    if config.dynamic:
        return [("dynamic", make_schedule(n_items, config.partitions, levels, config.seed))]
    return [(f"fixed-{lv.mbps:g}mbps", EpochSchedule.fixed(lv)) for lv in levels]


def cmd_run(config: ExperimentConfig) -> dict:
    policies = [Policy.parse(p) for p in config.policies]
    records = load_measurements(config.measurements_path())
    if not records:
        raise HarnessError("dual-measurement log is empty")
    models = None
    if Policy.SELECTIVE in policies:
        if not config.models or not Path(config.models).exists():
            raise HarnessError("Selective policy needs a model set; run `selzip train` first")
        models = ModelSet.load(config.models)

    endpoint = HttpEndpoint.from_url(config.live_url) if config.live_url else None
    pcfg = config.policy_config()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    runs: list[tuple[str, EpochSchedule, dict]] = []
    try:
        for cond, schedule in conditions(config, len(records)):
            per_policy = {}
            for policy in policies:
                per_policy[policy.value] = run_policy(
                    records, policy, schedule, models=models, estimator=config.estimator(),
                    config=pcfg, seed=config.seed, endpoint=endpoint)
            runs.append((cond, schedule, per_policy))
    finally:
        if endpoint is not None:
            endpoint.close()

    codec_id = records[0].codec_id or DeflateCodec().codec_id
    model_hash = hashlib.sha256(Path(config.models).read_bytes()).hexdigest() if models else ""
    meta = {
        "dataset": config.dataset_name(),
        "config_hash": config.config_hash(model_hash),
        "codec_id": codec_id,
        "min_size_bytes": config.min_size_bytes,
        "excluded_labels": sorted(config.excluded_labels),
        "decay": config.decay,
        "prior_bps": config.prior_bps,
        "warmup": config.warmup,
        "group_size": _group_size(records),
        "seed": config.seed,
        "mode": "live" if config.live_url else "analytic",
    }

    with (out / OUTCOMES).open("w") as fh:
        for cond, schedule, per_policy in runs:
            for pol, outs in per_policy.items():
                for o in outs:
                    fh.write(json.dumps({"condition": cond, "policy": pol, **o.to_dict()}, sort_keys=True) + "\n")
    if any(cond == "dynamic" for cond, _, _ in runs):
        runs[0][1].save(out / SCHEDULE_JSON)
    (out / CONFIG_JSON).write_text(json.dumps({"config": config.to_dict(), "meta": meta}, indent=2, sort_keys=True) + "\n")
    return write_reports(runs, meta, out)


def _group_size(records) -> int:
    counts: dict[str, int] = {}
    for r in records:
        counts[r.group] = counts.get(r.group, 0) + 1
    return max(counts.values()) if counts else 0


# -- reports ----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (list, tuple)):
        return "|".join(str(x) for x in v)
    return str(v)


def policy_row(policy: str, outs, per_policy: dict, meta: dict, cond: str, schedule: EpochSchedule) -> dict:
    base = per_policy.get(Policy.UNCOMPRESSED.value)
    comp = per_policy.get(Policy.COMPRESSED.value)
    oracle = per_policy.get(Policy.TIME_ORACLE.value)
    levels = sorted({e.link.mbps for e in schedule.epochs})
    frac = breakdown(outs)
    row = {
        "dataset": meta["dataset"],
        "condition": cond,
        "link_mbps": levels[0] if len(levels) == 1 else "|".join(f"{x:g}" for x in levels),
        "policy": policy,
        "n_items": len(outs),
        "n_groups": len({o.group for o in outs}),
        "total_s": sum_e2e(outs),
        "client_total_s": math.fsum(o.total for o in outs),
        "decompression_s": math.fsum(o.decompression_time for o in outs),
        "speedup": speedup(outs, base) if base else "",
        "speedup_se": standard_error(list(group_speedups(outs, base).values())) if base else "",
        "win_vs_uncompressed": win_rate(outs, base) if base else "",
        "win_vs_compressed": win_rate(outs, comp) if comp else "",
        "bytes_on_wire": sum(o.bytes_on_wire for o in outs),
        "data_usage": data_usage(outs, base) if base else "",
        "compressed_frac": sum(o.compressed for o in outs) / len(outs) if outs else 0.0,
        "overhead_frac": frac["overhead"],
        "compression_frac": frac["compression"],
        "transmission_frac": frac["transmission"],
        "success_rate": "",
        "false_positive_rate": "",
        "false_negative_rate": "",
    }
    if oracle:
        c = confusion(outs, oracle)
        row.update(success_rate=c["success_rate"], false_positive_rate=c["false_positive_rate"],
                   false_negative_rate=c["false_negative_rate"])
    for k in ("config_hash", "codec_id", "min_size_bytes", "excluded_labels", "decay", "prior_bps", "warmup", "group_size"):
        row[k] = meta[k]
    return row


def sum_e2e(outs) -> float:
    return math.fsum(o.end_to_end for o in outs)


def epoch_rows(policy: str, outs, per_policy: dict, meta: dict, cond: str, schedule: EpochSchedule) -> list[dict]:
    base = per_policy.get(Policy.UNCOMPRESSED.value)
    rows = []
    bounds = schedule.bounds(len(outs))
    for series, (a, b) in zip(compressed_percentage_series(outs, schedule), bounds):
        rows.append({
            "dataset": meta["dataset"],
            "condition": cond,
            "policy": policy,
            "epoch": series["epoch"],
            "link_mbps": series["link_mbps"],
            "n_items": series["n_items"],
            "compressed_frac": series["compressed_fraction"],
            "speedup": speedup(outs[a:b], base[a:b]) if base and b > a else "",
            "config_hash": meta["config_hash"],
        })
    return rows


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in columns})
    return buf.getvalue()


def write_reports(runs, meta: dict, out) -> dict:
    out = Path(out)
    rows, erows = [], []
    summary = {"meta": meta, "conditions": {}}
    for cond, schedule, per_policy in runs:
        summary["conditions"][cond] = {"schedule": schedule.to_dict(), "policies": {}}
        for pol, outs in per_policy.items():
            row = policy_row(pol, outs, per_policy, meta, cond, schedule)
            rows.append(row)
            er = epoch_rows(pol, outs, per_policy, meta, cond, schedule)
            erows.extend(er)
            summary["conditions"][cond]["policies"][pol] = {
                **{k: row[k] for k in REPORT_COLUMNS if k not in meta and k not in ("dataset", "condition", "policy")},
                "epochs": [{k: r[k] for k in ("epoch", "link_mbps", "n_items", "compressed_frac", "speedup")} for r in er],
            }
    (out / REPORT_CSV).write_text(_csv_text(REPORT_COLUMNS, rows))
    (out / EPOCHS_CSV).write_text(_csv_text(EPOCH_COLUMNS, erows))
    (out / REPORT_JSON).write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    return summary


def cmd_report(run_dir, out=None) -> dict:
    """Rebuild report files from a run directory's outcome log."""
    run_dir = Path(run_dir)
    out = Path(out) if out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = run_dir / CONFIG_JSON
    if not cfg_path.exists() or not (run_dir / OUTCOMES).exists():
        raise HarnessError(f"{run_dir} has no {OUTCOMES}/{CONFIG_JSON}; run `selzip run` first")
    saved = json.loads(cfg_path.read_text())
    config = ExperimentConfig(**saved["config"])
    meta = saved["meta"]

    grouped: dict[str, dict[str, list]] = {}
    with (run_dir / OUTCOMES).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            cond, pol = d.pop("condition"), d.pop("policy")
            grouped.setdefault(cond, {}).setdefault(pol, []).append(TransferOutcome.from_dict(d))

    n_items = len(next(iter(next(iter(grouped.values())).values())))
    if (run_dir / SCHEDULE_JSON).exists():
        dyn = EpochSchedule.load(run_dir / SCHEDULE_JSON, config.rtt, config.jitter)
        schedules = {"dynamic": dyn}
    else:
        schedules = dict(conditions(config, n_items))
    runs = [(cond, schedules[cond], per_policy) for cond, per_policy in grouped.items()]
    return write_reports(runs, meta, out)
