"""Bandwidth emulation: analytic link model, token-bucket socket shaping and
epoch schedules for time-varying experiments."""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .policy import BYTES_PER_MBPS, mbps_to_bps

BUCKET_BYTES = 0


@dataclass(frozen=True)
class LinkSpec:
    bandwidth: float  # bytes per second
    rtt: float = 0.0
    jitter_fraction: float = 0.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.rtt < 0:
            raise ValueError("rtt must be >= 0")
        if not 0 <= self.jitter_fraction < 1:
            raise ValueError("jitter_fraction must be in [0, 1)")

    @classmethod
    def from_mbps(cls, mbps: float, rtt: float = 0.0, jitter_fraction: float = 0.0) -> "LinkSpec":
        return cls(mbps_to_bps(mbps), rtt, jitter_fraction)

    @property
    def mbps(self) -> float:
        return self.bandwidth / BYTES_PER_MBPS


def transmission_time(nbytes: int, link: LinkSpec, rng: Optional[np.random.Generator] = None) -> float:
    """Analytic transfer time ``(rtt + n / bandwidth) * (1 + u)``.

    ``u`` is uniform in +/- jitter_fraction, drawn from ``rng``; a link with
    jitter needs an explicit generator so runs stay reproducible.
    """
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    base = link.rtt + nbytes / link.bandwidth
    if link.jitter_fraction == 0:
        return base
    if rng is None:
        raise ValueError("a seeded generator is required when jitter_fraction > 0")
    u = rng.uniform(-link.jitter_fraction, link.jitter_fraction)
    return base * (1.0 + u)


def item_rng(seed: int, index: int) -> np.random.Generator:
    """Per-item stream so raw and compressed sends of one item see the same jitter."""
    return np.random.default_rng([int(seed), int(index)])


class ShapedSocket:
    """Wraps a connected socket so sends leave at ``link.bandwidth``.

    Token bucket holding at most ``bucket`` bytes of credit, kept as the time
    the link next falls idle. The default of 0 means no burst allowance: an
    n-byte send always takes n / bandwidth, however long the socket sat idle,
    which is what the analytic model charges. Reads pass straight through.
    """

    chunk = 16 * 1024

    def __init__(self, sock: socket.socket, link: LinkSpec, bucket: int = BUCKET_BYTES):
        self._sock = sock
        self.link = link
        self.bucket = bucket
        self._free_at = time.monotonic()
        self._lock = threading.Lock()

    def _take(self, n: int) -> None:
        rate = self.link.bandwidth
        now = time.monotonic()
        # idle time turns into credit, capped at the bucket
        self._free_at = max(self._free_at, now - self.bucket / rate) + n / rate
        if self._free_at > now:
            time.sleep(self._free_at - now)

    def sendall(self, data) -> None:
        view = memoryview(data)
        step = self.chunk
        with self._lock:
            for start in range(0, len(view), step):
                piece = view[start:start + step]
                self._take(len(piece))
                self._sock.sendall(piece)

    def send(self, data) -> int:
        self.sendall(data)
        return len(data)

    def __getattr__(self, name):
        return getattr(self._sock, name)


def shaped_stream(link: LinkSpec, inner: socket.socket, bucket: int = BUCKET_BYTES) -> ShapedSocket:
    return ShapedSocket(inner, link, bucket)


@dataclass(frozen=True)
class Epoch:
    partition_index: int
    link: LinkSpec


@dataclass(frozen=True)
class EpochSchedule:
    epochs: tuple
    seed: int = 0
    levels: tuple = ()

    def __post_init__(self):
        idx = [e.partition_index for e in self.epochs]
        if not idx or idx != list(range(len(idx))):
            raise ValueError("epochs must cover partitions 0..n-1 in order")

    @property
    def n_partitions(self) -> int:
        return len(self.epochs)

    @classmethod
    def fixed(cls, link: LinkSpec) -> "EpochSchedule":
        return cls((Epoch(0, link),), 0, (link,))

    def bounds(self, n_items: int) -> list[tuple[int, int]]:
        """Equal-count item ranges per partition (earlier partitions take the remainder)."""
        q, r = divmod(n_items, self.n_partitions)
        out, start = [], 0
        for i in range(self.n_partitions):
            stop = start + q + (1 if i < r else 0)
            out.append((start, stop))
            start = stop
        return out

    def epoch_indices(self, n_items: int) -> list[int]:
        idx = []
        for i, (a, b) in enumerate(self.bounds(n_items)):
            idx.extend([i] * (b - a))
        return idx

    def to_dict(self) -> dict:
        levels = self.levels or tuple(dict.fromkeys(e.link for e in self.epochs))
        return {
            "seed": self.seed,
            "levels_mbps": [lv.mbps for lv in levels],
            "n_partitions": self.n_partitions,
            "epochs": [{"partition_index": e.partition_index, "mbps": e.link.mbps} for e in self.epochs],
        }

    @classmethod
    def from_dict(cls, d: dict, rtt: float = 0.0, jitter_fraction: float = 0.0) -> "EpochSchedule":
        levels = [LinkSpec.from_mbps(m, rtt, jitter_fraction) for m in d.get("levels_mbps", [])]
        seed = int(d.get("seed", 0))
        if d.get("epochs"):
            epochs = tuple(
                Epoch(int(e["partition_index"]), LinkSpec.from_mbps(e["mbps"], rtt, jitter_fraction))
                for e in d["epochs"]
            )
            return cls(epochs, seed, tuple(levels))
        return make_schedule(None, int(d["n_partitions"]), levels, seed)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path, rtt: float = 0.0, jitter_fraction: float = 0.0) -> "EpochSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()), rtt, jitter_fraction)


def make_schedule(dataset_size: Optional[int], n_partitions: int, levels: Sequence[LinkSpec], seed: int) -> EpochSchedule:
    """Pick each partition's link uniformly at random from ``levels``."""
    if n_partitions < 1:
        raise ValueError("n_partitions must be >= 1")
    if not levels:
        raise ValueError("need at least one link level")
    if dataset_size is not None and dataset_size < n_partitions:
        raise ValueError(f"cannot split {dataset_size} items into {n_partitions} partitions")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(levels), size=n_partitions)
    epochs = tuple(Epoch(i, levels[int(k)]) for i, k in enumerate(picks))
    return EpochSchedule(epochs, int(seed), tuple(levels))
