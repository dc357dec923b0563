"""Deterministic randomness keyed by a 32-byte seed.

Every random draw in a session comes from an :class:`Rng` derived from the
session seed by a path of labels (role, layer, purpose), so transcripts are
reproducible and independent workers never share a stream.
"""

from __future__ import annotations

import hashlib
import secrets

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

SEED_BYTES = 32


def parse_seed(value: str | bytes | int | None) -> bytes:
    """Accept a hex string, raw 32 bytes, an integer, or None (fresh entropy)."""
    if value is None:
        return secrets.token_bytes(SEED_BYTES)
    if isinstance(value, bytes):
        if len(value) != SEED_BYTES:
            raise ValueError(f"seed must be {SEED_BYTES} bytes, got {len(value)}")
        return value
    if isinstance(value, int):
        if value < 0 or value.bit_length() > 8 * SEED_BYTES:
            raise ValueError("integer seed out of range")
        return value.to_bytes(SEED_BYTES, "big")
    text = value.strip().lower().removeprefix("0x")
    if len(text) > 2 * SEED_BYTES or not text:
        raise ValueError("hex seed must be 1..64 hex digits")
    return bytes.fromhex(text.rjust(2 * SEED_BYTES, "0"))


def _encode_part(part: object) -> bytes:
    if isinstance(part, bytes):
        tag, body = b"b", part
    elif isinstance(part, bool):
        tag, body = b"?", bytes([part])
    elif isinstance(part, int):
        tag, body = b"i", str(part).encode()
    elif isinstance(part, str):
        tag, body = b"s", part.encode()
    else:
        raise TypeError(f"cannot derive from {type(part).__name__}")
    return tag + len(body).to_bytes(4, "little") + body


class Rng:
    """ChaCha20 keystream with typed sampling helpers."""

    def __init__(self, seed: bytes | str | int | None = None):
        self.seed = parse_seed(seed)
        cipher = Cipher(algorithms.ChaCha20(self.seed, bytes(16)), mode=None)
        self._stream = cipher.encryptor()

    def derive(self, *parts: object) -> Rng:
        h = hashlib.sha256(b"hybridpi/rng\x00" + self.seed)
        for part in parts:
            h.update(_encode_part(part))
        return Rng(h.digest())

    def bytes(self, count: int) -> bytes:
        return self._stream.update(bytes(count))

    def uint64(self, shape) -> np.ndarray:
        size = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.bytes(8 * size), dtype="<u8").reshape(shape).copy()

    def bits(self, shape) -> np.ndarray:
        size = int(np.prod(shape, dtype=np.int64))
        raw = np.frombuffer(self.bytes((size + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:size].reshape(shape)

    def below(self, bound: int, shape) -> np.ndarray:
        """Uniform integers in [0, bound) as uint64, by rejection sampling."""
        if not 0 < bound <= 1 << 63:
            raise ValueError("bound must be in (0, 2^63]")
        size = int(np.prod(shape, dtype=np.int64))
        mask = np.uint64((1 << max(1, (bound - 1).bit_length())) - 1)
        out = np.empty(0, dtype=np.uint64)
        while out.size < size:
            need = size - out.size
            draw = self.uint64(need + need // 2 + 16) & mask
            out = np.concatenate([out, draw[draw < np.uint64(bound)]])
        return out[:size].reshape(shape)

    def randbelow(self, bound: int) -> int:
        """Uniform Python int in [0, bound); for big-integer exponents."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        nbits = bound.bit_length()
        nbytes = (nbits + 7) // 8
        excess = 8 * nbytes - nbits
        while True:
            value = int.from_bytes(self.bytes(nbytes), "big") >> excess
            if value < bound:
                return value
