"""Canonical, self-delimiting binary encoding used for hashing and export.

Each value is a one-byte type tag followed by its payload:

    0x00 None
    0x01 int      8-byte big-endian, unsigned
    0x02 bytes    4-byte big-endian length + data
    0x03 str      4-byte big-endian length + UTF-8 data
    0x04 sequence 4-byte big-endian count + encoded items
    0x05 bool     one byte

Encoding is injective, so equal encodings mean equal values and hashing the
encoding is safe. ``unpack`` returns sequences as lists.
"""

from __future__ import annotations

import struct
from typing import Any

_NONE, _INT, _BYTES, _STR, _SEQ, _BOOL = range(6)


class DecodeError(ValueError):
    pass


def _write(out: bytearray, value: Any) -> None:
    if value is None:
        out.append(_NONE)
    elif isinstance(value, bool):
        out.append(_BOOL)
        out.append(1 if value else 0)
    elif isinstance(value, int):
        if value < 0 or value >= 1 << 64:
            raise ValueError(f"integer out of u64 range: {value}")
        out.append(_INT)
        out += struct.pack(">Q", value)
    elif isinstance(value, (bytes, bytearray, memoryview)):
        data = bytes(value)
        out.append(_BYTES)
        out += struct.pack(">I", len(data))
        out += data
    elif isinstance(value, str):
        data = value.encode("utf-8")
        out.append(_STR)
        out += struct.pack(">I", len(data))
        out += data
    elif isinstance(value, (list, tuple)):
        out.append(_SEQ)
        out += struct.pack(">I", len(value))
        for item in value:
            _write(out, item)
    else:
        raise TypeError(f"cannot encode {type(value).__name__}")


def pack(value: Any) -> bytes:
    out = bytearray()
    _write(out, value)
    return bytes(out)


def _read(data: bytes, pos: int) -> tuple[Any, int]:
    if pos >= len(data):
        raise DecodeError("truncated input")
    tag = data[pos]
    pos += 1
    if tag == _NONE:
        return None, pos
    if tag == _BOOL:
        if pos >= len(data) or data[pos] not in (0, 1):
            raise DecodeError("bad bool")
        return data[pos] == 1, pos + 1
    if tag == _INT:
        if pos + 8 > len(data):
            raise DecodeError("truncated int")
        return struct.unpack_from(">Q", data, pos)[0], pos + 8
    if tag in (_BYTES, _STR, _SEQ):
        if pos + 4 > len(data):
            raise DecodeError("truncated length")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if tag == _SEQ:
            items = []
            for _ in range(n):
                item, pos = _read(data, pos)
                items.append(item)
            return items, pos
        if pos + n > len(data):
            raise DecodeError("truncated payload")
        chunk = data[pos:pos + n]
        if tag == _STR:
            try:
                return chunk.decode("utf-8"), pos + n
            except UnicodeDecodeError as exc:
                raise DecodeError("invalid utf-8") from exc
        return chunk, pos + n
    raise DecodeError(f"unknown tag 0x{tag:02x}")


def unpack(data: bytes) -> Any:
    value, pos = _read(data, 0)
    if pos != len(data):
        raise DecodeError("trailing bytes")
    return value


def unpack_stream(data: bytes) -> list[Any]:
    """Decode a concatenation of encoded values."""
    values = []
    pos = 0
    while pos < len(data):
        value, pos = _read(data, pos)
        values.append(value)
    return values
