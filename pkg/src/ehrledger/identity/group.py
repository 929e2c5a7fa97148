"""Prime-order group used by the anonymous credential scheme.

Thin wrapper over the ``ecdsa`` package's Jacobian points on secp256k1.
Fixed bases are derived by hash-to-curve (try-and-increment), so nobody
knows discrete logs between them.
"""

from __future__ import annotations

from ecdsa import SECP256k1
from ecdsa.ellipticcurve import INFINITY, PointJacobi

from ..config import GROUP_NAME, tagged_digest

if GROUP_NAME != "secp256k1":
    raise ImportError(f"unsupported group {GROUP_NAME}")

CURVE = SECP256k1.curve
ORDER = SECP256k1.order
GENERATOR: PointJacobi = SECP256k1.generator
IDENTITY = INFINITY
SCALAR_SIZE = 32
POINT_SIZE = 33

Point = PointJacobi

_P = CURVE.p()


def random_scalar(rng) -> int:
    return rng.randrange(1, ORDER)


def hash_to_scalar(tag: str, data: bytes) -> int:
    return int.from_bytes(tagged_digest(tag, data), "big") % ORDER


def hash_to_point(tag: str, data: bytes) -> PointJacobi:
    counter = 0
    while True:
        h = tagged_digest(tag, data + counter.to_bytes(4, "big"))
        x = int.from_bytes(h, "big") % _P
        rhs = (pow(x, 3, _P) + 7) % _P
        y = pow(rhs, (_P + 1) // 4, _P)
        if y * y % _P == rhs:
            if y & 1:
                y = _P - y
            return PointJacobi(CURVE, x, y, 1, ORDER, generator=True)
        counter += 1


def encode_point(p) -> bytes:
    if p == INFINITY:
        return b"\x00"
    return p.to_bytes("compressed")


def decode_point(data: bytes) -> PointJacobi:
    if data == b"\x00":
        return INFINITY
    if len(data) != POINT_SIZE:
        raise ValueError("bad point length")
    return PointJacobi.from_bytes(CURVE, data, valid_encodings=["compressed"])


def encode_scalar(k: int) -> bytes:
    return k.to_bytes(SCALAR_SIZE, "big")


def decode_scalar(data: bytes) -> int:
    if len(data) != SCALAR_SIZE:
        raise ValueError("bad scalar length")
    k = int.from_bytes(data, "big")
    if k >= ORDER:
        raise ValueError("scalar out of range")
    return k
