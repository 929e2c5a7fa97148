"""Single place naming the digest and group used across the package.

Changing either value regenerates every block hash, transaction id, private
anchor and credential vector; nothing else in the code hard-codes them.
"""

import hashlib

HASH_NAME = "sha256"
DIGEST_SIZE = 32
GROUP_NAME = "secp256k1"

ZERO_DIGEST = bytes(DIGEST_SIZE)
SALT_SIZE = 16


def digest(data: bytes) -> bytes:
    return hashlib.new(HASH_NAME, data).digest()


def tagged_digest(tag: str, data: bytes) -> bytes:
    """Domain-separated digest: H(len(tag) || tag || data)."""
    t = tag.encode()
    return digest(len(t).to_bytes(2, "big") + t + data)
