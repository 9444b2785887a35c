"""Codec seam.

Only DEFLATE (zlib container) and identity ship; anything else plugs in by
registering an object with ``compress``/``decompress`` and a ``codec_id``.
"""

from __future__ import annotations

import zlib
from typing import Protocol


class CodecError(RuntimeError):
    """Raised when a codec fails to compress or decompress a payload."""


class Codec(Protocol):
    codec_id: str

    def compress(self, data: bytes) -> bytes: ...

    def decompress(self, data: bytes) -> bytes: ...


class DeflateCodec:
    def __init__(self, level: int = 6):
        if not -1 <= level <= 9:
            raise ValueError(f"zlib level out of range: {level}")
        self.level = level
        self.codec_id = f"deflate-zlib-{level}"

    def compress(self, data: bytes) -> bytes:
        try:
            return zlib.compress(data, self.level)
        except zlib.error as exc:
            raise CodecError(str(exc)) from exc

    def decompress(self, data: bytes) -> bytes:
        try:
            return zlib.decompress(data)
        except zlib.error as exc:
            raise CodecError(f"corrupt deflate stream: {exc}") from exc


class IdentityCodec:
    codec_id = "identity"

    def compress(self, data: bytes) -> bytes:
        return bytes(data)

    def decompress(self, data: bytes) -> bytes:
        return bytes(data)


# wire names used in the X-Selzip-Codec header
_WIRE = {
    "deflate": DeflateCodec,
    "identity": IdentityCodec,
}


def wire_codec(name: str) -> Codec:
    """Look up a codec by the name carried on the wire."""
    try:
        return _WIRE[name.strip().lower()]()
    except KeyError:
        raise CodecError(f"unknown codec {name!r}") from None


def register_wire_codec(name: str, factory) -> None:
    _WIRE[name.strip().lower()] = factory


def default_codec() -> DeflateCodec:
    return DeflateCodec(6)
