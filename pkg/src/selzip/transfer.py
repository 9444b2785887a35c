"""Client side of a transfer: compress when told to, upload, and account for
where the time went."""

from __future__ import annotations

import hashlib
import http.client
import json
import logging
import socket
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol

from .codec import Codec, CodecError, DeflateCodec
from .estimator import ThroughputEstimator
from .link import LinkSpec, ShapedSocket, item_rng, transmission_time
from .policy import Action, Decision, TransferItem
from .schemas import CODEC_HEADER, ITEM_HEADER, LABEL_HEADER

logger = logging.getLogger(__name__)


class TransferError(RuntimeError):
    """Transport-level failure. Retryable; carries whatever timings were taken."""

    def __init__(self, message: str, partial: Optional[dict] = None):
        super().__init__(message)
        self.partial = partial or {}


@dataclass
class TransferOutcome:
    item_id: str
    action_taken: Action
    bytes_on_wire: int
    original_size: int
    overhead: float = 0.0
    compression_time: float = 0.0
    transmission_time: float = 0.0
    decompression_time: float = 0.0
    codec_fallback: bool = False
    label: str = ""
    group: str = ""
    reason: str = ""
    epoch: int = 0
    link_mbps: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        self.action_taken = Action(self.action_taken)
        self.total = self.overhead + self.compression_time + self.transmission_time

    @property
    def compressed(self) -> bool:
        return self.action_taken is Action.COMPRESS

    @property
    def end_to_end(self) -> float:
        """Client total plus server-side decompression."""
        return self.total + self.decompression_time

    def to_dict(self) -> dict:
        d = asdict(self)
        d["action_taken"] = self.action_taken.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransferOutcome":
        d = dict(d)
        d.pop("total", None)
        return cls(**d)


class Endpoint(Protocol):
    def post(self, body: bytes, headers: dict, index: int = 0) -> tuple[dict, float]:
        """Deliver ``body``; return the server acknowledgment and the elapsed
        request time (transmission plus server processing)."""


class _ShapedConnection(http.client.HTTPConnection):
    def __init__(self, host, port, link: Optional[LinkSpec], timeout=60.0):
        super().__init__(host, port, timeout=timeout)
        self.link = link

    def connect(self):
        super().connect()
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        if self.link is not None:
            self.sock = ShapedSocket(self.sock, self.link)


class HttpEndpoint:
    """Uploads to a running selzip server, optionally pacing the uplink."""

    def __init__(self, host: str = "127.0.0.1", port: int = 8080, link: Optional[LinkSpec] = None,
                 path: str = "/transfer", timeout: float = 60.0):
        self.host, self.port, self.path, self.timeout = host, port, path, timeout
        self._link = link
        self._conn: Optional[_ShapedConnection] = None

    @classmethod
    def from_url(cls, url: str, link: Optional[LinkSpec] = None) -> "HttpEndpoint":
        from urllib.parse import urlsplit

        parts = urlsplit(url)
        return cls(parts.hostname or "127.0.0.1", parts.port or 80, link, parts.path or "/transfer")

    def set_link(self, link: Optional[LinkSpec]) -> None:
        if link != self._link:
            self._link = link
            self.close()

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def post(self, body: bytes, headers: dict, index: int = 0) -> tuple[dict, float]:
        if self._conn is None:
            self._conn = _ShapedConnection(self.host, self.port, self._link, self.timeout)
        headers = {**headers, "Content-Type": "application/octet-stream"}
        t0 = time.perf_counter()
        try:
            self._conn.request("POST", self.path, body=body, headers=headers)
            resp = self._conn.getresponse()
            raw = resp.read()
        except (OSError, http.client.HTTPException) as exc:
            self.close()
            raise TransferError(f"transport failure: {exc}", {"elapsed": time.perf_counter() - t0}) from exc
        elapsed = time.perf_counter() - t0
        try:
            payload = json.loads(raw)
        except ValueError:
            payload = {"error": "bad_response", "detail": raw[:200].decode("latin-1")}
        if resp.status != 200:
            raise TransferError(f"server answered {resp.status}: {payload}", {"elapsed": elapsed, "status": resp.status})
        return payload, elapsed


class AnalyticEndpoint:
    """In-process stand-in for the server over an analytic link.

    Decompression really runs (and is timed); the wire time comes from
    :func:`selzip.link.transmission_time` with per-item seeded jitter.
    """

    def __init__(self, link: LinkSpec, seed: int = 0):
        self.link = link
        self.seed = seed

    def set_link(self, link: LinkSpec) -> None:
        self.link = link

    def post(self, body: bytes, headers: dict, index: int = 0) -> tuple[dict, float]:
        from .codec import wire_codec

        codec_name = headers.get(CODEC_HEADER, "identity")
        codec = wire_codec(codec_name)
        dt = 0.0
        if codec.codec_id == "identity":
            payload = body
        else:
            t0 = time.perf_counter()
            payload = codec.decompress(body)
            dt = time.perf_counter() - t0
        wire = transmission_time(len(body), self.link, item_rng(self.seed, index))
        ack = {
            "item_id": headers.get(ITEM_HEADER, ""),
            "label": headers.get(LABEL_HEADER, ""),
            "codec": codec_name,
            "received_bytes": len(body),
            "decompressed_bytes": len(payload),
            "decompression_time": dt,
            "sha256": hashlib.sha256(payload).hexdigest(),
        }
        return ack, wire + dt


class TransferClient:
    def __init__(self, endpoint: Endpoint, codec: Optional[Codec] = None,
                 estimator: Optional[ThroughputEstimator] = None, verify: bool = False):
        self.endpoint = endpoint
        self.codec = codec or DeflateCodec()
        self.estimator = estimator
        self.verify = verify

    def send(self, item: TransferItem, decision: Decision, decision_time: float = 0.0,
             index: int = 0) -> TransferOutcome:
        t_start = time.perf_counter()
        action = decision.action
        fallback = False
        compression_time = 0.0
        body = item.payload
        if action is Action.COMPRESS:
            t0 = time.perf_counter()
            try:
                body = self.codec.compress(item.payload)
            except CodecError as exc:
                logger.warning("item %s: codec failed (%s); sending raw", item.item_id, exc)
                action, fallback, body = Action.SEND_RAW, True, item.payload
            compression_time = time.perf_counter() - t0
            if fallback:
                compression_time = 0.0

        headers = {
            CODEC_HEADER: "deflate" if action is Action.COMPRESS else "identity",
            LABEL_HEADER: item.label,
            ITEM_HEADER: item.item_id or str(index),
        }
        t_post = time.perf_counter()
        try:
            ack, elapsed = self.endpoint.post(body, headers, index)
        except TransferError as exc:
            exc.partial.update(compression_time=compression_time, overhead=decision_time)
            raise
        post_wall = time.perf_counter() - t_post

        decompression_time = float(ack.get("decompression_time", 0.0))
        transmission = max(0.0, elapsed - decompression_time)
        if ack.get("received_bytes") != len(body):
            raise TransferError(
                f"byte accounting mismatch: sent {len(body)}, server received {ack.get('received_bytes')}"
            )
        if self.verify and ack.get("sha256") != hashlib.sha256(item.payload).hexdigest():
            raise TransferError(f"item {item.item_id}: server payload differs from original")
        if self.estimator is not None:
            self.estimator.observe(len(body), transmission)

        wall = time.perf_counter() - t_start
        bookkeeping = max(0.0, wall - compression_time - post_wall)
        return TransferOutcome(
            item_id=item.item_id or str(index),
            action_taken=action,
            bytes_on_wire=len(body),
            original_size=item.size,
            overhead=decision_time + bookkeeping,
            compression_time=compression_time,
            transmission_time=transmission,
            decompression_time=decompression_time if action is Action.COMPRESS else 0.0,
            codec_fallback=fallback,
            label=item.label,
            group=item.group,
            reason=decision.reason.value,
        )
