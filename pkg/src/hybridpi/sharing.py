"""Additive secret sharing over Z_p and the online linear layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShareError
from .rng import Rng

ROLES = ("client", "server")


def matvec_mod(W: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """W @ x mod p in int64 without overflow (p < 2^31)."""
    W = np.asarray(W, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    if W.ndim != 2 or x.ndim != 1 or W.shape[1] != x.shape[0]:
        raise ShareError(f"cannot multiply {W.shape} matrix by {x.shape} vector")
    # each product < p^2; keep partial sums below 2^63
    step = max(1, ((1 << 62) // max(1, (p - 1) ** 2)))
    out = np.zeros(W.shape[0], dtype=np.int64)
    for lo in range(0, W.shape[1], step):
        out = (out + W[:, lo:lo + step] @ x[lo:lo + step]) % p
    return out


@dataclass(frozen=True)
class Share:
    values: np.ndarray
    role: str
    layer: int
    p: int

    def __post_init__(self):
        if self.role not in ROLES:
            raise ShareError(f"unknown share role {self.role!r}")
        v = np.asarray(self.values, dtype=np.int64)
        if v.ndim != 1:
            raise ShareError("share values must be a vector")
        if v.size and (v.min() < 0 or v.max() >= self.p):
            raise ShareError("share values must lie in [0, p)")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return len(self.values)


def sample_mask(dim: int, p: int, rng: Rng) -> np.ndarray:
    if dim <= 0:
        raise ShareError("mask dimension must be positive")
    return rng.below(p, dim).astype(np.int64)


def split(values, p: int, rng: Rng, layer: int = 0) -> tuple[Share, Share]:
    """Random (client, server) sharing of a vector."""
    v = np.asarray(values, dtype=np.int64) % p
    c = sample_mask(len(v), p, rng)
    return Share(c, "client", layer, p), Share((v - c) % p, "server", layer, p)


def server_online_linear(W: np.ndarray, bias, x_minus_r, s, p: int, layer: int = 0) -> Share:
    """<y>_s = W (x - r) + s + bias mod p."""
    x_minus_r = np.asarray(x_minus_r, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    W = np.asarray(W)
    if W.shape[1] != len(x_minus_r):
        raise ShareError(f"layer {layer}: weight has {W.shape[1]} columns, input has {len(x_minus_r)}")
    if len(s) != W.shape[0]:
        raise ShareError(f"layer {layer}: mask s has {len(s)} entries, weight has {W.shape[0]} rows")
    y = matvec_mod(W, x_minus_r, p) + s
    if bias is not None:
        bias = np.asarray(bias, dtype=np.int64)
        if len(bias) != W.shape[0]:
            raise ShareError(f"layer {layer}: bias has {len(bias)} entries, weight has {W.shape[0]} rows")
        y = y + bias
    return Share(y % p, "server", layer, p)


def client_offline_share(W: np.ndarray, r, s, p: int, layer: int = 0) -> Share:
    """<y>_c = W r - s mod p (what the client decrypts offline)."""
    return Share((matvec_mod(W, r, p) - np.asarray(s, dtype=np.int64)) % p, "client", layer, p)


def reconstruct(a: Share, b: Share) -> np.ndarray:
    if {a.role, b.role} != set(ROLES):
        raise ShareError("reconstruction needs one client and one server share")
    if a.layer != b.layer or a.dim != b.dim or a.p != b.p:
        raise ShareError("shares belong to different layers, sizes or moduli")
    return (a.values + b.values) % a.p
