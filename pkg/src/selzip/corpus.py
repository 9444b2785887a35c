"""Synthetic corpora with controlled compressibility.

Three payload profiles:

``text``
    accelerometer-style CSV rows (random-walk readings, long activity runs);
    DEFLATE ratio lands around 3.5-4.5 depending on ``walk_step``.
``random``
    seeded uniform bytes, standing in for already-encoded media (ratio ~1.0).
``tiny``
    a handful of air-quality-style CSV rows, at most 256 bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

PROFILES = ("text", "random", "tiny")
TINY_MAX = 256


@dataclass(frozen=True)
class ItemClass:
    label: str
    profile: str
    count: int
    min_size: int = 8 * 1024
    max_size: int = 512 * 1024

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose from {PROFILES}")
        if self.count < 0 or self.min_size < 0 or self.max_size < self.min_size:
            raise ValueError(f"bad size/count in {self}")


@dataclass(frozen=True)
class CorpusSpec:
    classes: tuple
    seed: int = 0
    group_size: int = 10
    walk_step: int = 5
    shuffle: bool = True

    def to_dict(self) -> dict:
        return {**asdict(self), "classes": [asdict(c) for c in self.classes]}

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        d = dict(d)
        d["classes"] = tuple(ItemClass(**c) for c in d["classes"])
        return cls(**d)


def preset(name: str, n_items: int, seed: int = 0) -> CorpusSpec:
    """Named corpus mixes used by the CLI and the acceptance suite."""
    if name == "text":
        classes = (ItemClass("text", "text", n_items),)
    elif name == "random":
        classes = (ItemClass("image", "random", n_items),)
    elif name == "tiny":
        classes = (ItemClass("sensor", "tiny", n_items, 32, TINY_MAX),)
    elif name == "mixed":
        n_text = n_items // 2
        n_img = (n_items * 3) // 10
        classes = (
            ItemClass("text", "text", n_text),
            ItemClass("image", "random", n_img, 8 * 1024, 256 * 1024),
            ItemClass("sensor", "tiny", n_items - n_text - n_img, 32, TINY_MAX),
        )
    else:
        raise ValueError(f"unknown preset {name!r}")
    return CorpusSpec(classes, seed=seed)


def text_payload(size: int, rng: np.random.Generator, walk_step: int = 5) -> bytes:
    if size == 0:
        return b""
    rows = size // 16 + 16
    base = rng.integers(1800, 2400, 3)
    walk = np.cumsum(rng.integers(-walk_step, walk_step + 1, (rows, 3)), axis=0) + base
    activity = np.repeat(rng.integers(1, 8, rows // 200 + 1), 200)[:rows]
    t0 = int(rng.integers(0, 10**6))
    lines = [b"%d,%d,%d,%d,%d\n" % (t0 + i, x, y, z, a) for i, ((x, y, z), a) in enumerate(zip(walk, activity))]
    return b"".join(lines)[:size]


def random_payload(size: int, rng: np.random.Generator) -> bytes:
    return rng.bytes(size)


def tiny_payload(size: int, rng: np.random.Generator) -> bytes:
    size = min(size, TINY_MAX)
    out = b""
    hour = int(rng.integers(0, 24))
    while len(out) < size:
        vals = rng.normal([2.1, 1100, 240, 10.0, 940, 110], [1.2, 200, 120, 6.0, 250, 45])
        row = b"10/03/2004;%02d.00.00;%.1f;%d;%d;%.1f;%d;%d\n" % (
            hour % 24, abs(vals[0]), abs(vals[1]), abs(vals[2]), abs(vals[3]), abs(vals[4]), abs(vals[5]),
        )
        out += row
        hour += 1
    return out[:size]


def _sizes(cls: ItemClass, rng: np.random.Generator) -> np.ndarray:
    lo, hi = max(cls.min_size, 1), max(cls.max_size, 1)
    return np.floor(np.exp(rng.uniform(np.log(lo), np.log(hi + 1), cls.count))).astype(int).clip(cls.min_size, cls.max_size)


def generate_items(spec: CorpusSpec):
    """Yield ``(item_id, label, group, profile, payload)`` deterministically per seed."""
    rng = np.random.default_rng(spec.seed)
    plan = []
    for cls in spec.classes:
        for size in _sizes(cls, rng):
            plan.append((cls, int(size)))
    order = rng.permutation(len(plan)) if spec.shuffle else np.arange(len(plan))
    for pos, k in enumerate(order):
        cls, size = plan[int(k)]
        item_rng = np.random.default_rng([spec.seed, int(k)])
        if cls.profile == "text":
            payload = text_payload(size, item_rng, spec.walk_step)
        elif cls.profile == "random":
            payload = random_payload(size, item_rng)
        else:
            payload = tiny_payload(size, item_rng)
        group = f"g{pos // spec.group_size:04d}"
        yield f"item{pos:05d}", cls.label, group, cls.profile, payload


def generate_corpus(spec: CorpusSpec, out_dir) -> Path:
    """Write payload files plus ``manifest.jsonl`` and ``corpus.json``; return the manifest path."""
    out_dir = Path(out_dir)
    items_dir = out_dir / "items"
    items_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    with manifest.open("w") as fh:
        for item_id, label, group, profile, payload in generate_items(spec):
            rel = f"items/{item_id}.bin"
            (out_dir / rel).write_bytes(payload)
            fh.write(json.dumps({"path": rel, "label": label, "id": item_id, "group": group, "profile": profile}) + "\n")
    (out_dir / "corpus.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    return manifest
