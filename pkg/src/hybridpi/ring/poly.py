"""Polynomials in Z_q[x]/(x^n + 1) with a negacyclic NTT.

Coefficients are stored as uint64 (q < 2^62). Products need up to 124 bits,
so the butterflies run on numpy object arrays of Python ints, vectorized per
stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache

import numpy as np

from ..errors import RingError
from ..rng import Rng
from .modular import Modulus, find_root


class Domain(str, Enum):
    COEFFICIENT = "coefficient"
    EVALUATION = "evaluation"


def _bit_reverse(i: int, bits: int) -> int:
    return int(format(i, f"0{bits}b")[::-1], 2) if bits else 0


@dataclass(frozen=True)
class NttTables:
    n: int
    q: int
    psi: int
    psi_rev: np.ndarray = field(repr=False)  # psi^bitrev(i), object
    psi_inv_rev: np.ndarray = field(repr=False)
    n_inv: int

    @classmethod
    def build(cls, n: int, modulus: Modulus, psi: int | None = None) -> NttTables:
        q = modulus.q
        if psi is None:
            psi = find_root(n, modulus)
        if pow(psi, n, q) != q - 1:
            raise RingError(f"psi={psi} is not a primitive {2 * n}-th root mod {q}")
        bits = n.bit_length() - 1
        powers = [1] * n
        for i in range(1, n):
            powers[i] = powers[i - 1] * psi % q
        psi_inv = pow(psi, -1, q)
        inv_powers = [1] * n
        for i in range(1, n):
            inv_powers[i] = inv_powers[i - 1] * psi_inv % q
        rev = [_bit_reverse(i, bits) for i in range(n)]
        fwd = np.array([powers[r] for r in rev], dtype=object)
        inv = np.array([inv_powers[r] for r in rev], dtype=object)
        return cls(n, q, psi, fwd, inv, pow(n, -1, q))


@dataclass(frozen=True, eq=False)
class Ring:
    """The ring Z_q[x]/(x^n + 1) together with its NTT tables."""

    n: int
    modulus: Modulus
    psi: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.n & (self.n - 1):
            raise RingError(f"n={self.n} is not a power of two")
        if not self.modulus.supports(self.n):
            raise RingError(f"q={self.q} is not 1 mod 2n for n={self.n}")

    @property
    def q(self) -> int:
        return self.modulus.q

    @cached_property
    def tables(self) -> NttTables:
        return NttTables.build(self.n, self.modulus, self.psi)

    def same_as(self, other: Ring) -> bool:
        return self is other or (self.n == other.n and self.q == other.q)

    def __eq__(self, other):
        return isinstance(other, Ring) and self.same_as(other)

    def __hash__(self):
        return hash((self.n, self.q))

    def poly(self, coeffs, domain: Domain = Domain.COEFFICIENT) -> Polynomial:
        arr = np.asarray(coeffs)
        if arr.dtype == object:
            arr = np.array([int(c) % self.q for c in arr], dtype=np.uint64)
        elif arr.dtype.kind == "i":
            arr = np.mod(arr.astype(np.int64), self.q).astype(np.uint64)
        else:
            arr = arr.astype(np.uint64)
        return Polynomial(self, arr, domain)

    def zero(self) -> Polynomial:
        return Polynomial(self, np.zeros(self.n, dtype=np.uint64))

    def monomial(self, degree: int, coeff: int = 1) -> Polynomial:
        out = np.zeros(self.n, dtype=np.uint64)
        sign, degree = (-1) ** (degree // self.n), degree % self.n
        out[degree] = (sign * coeff) % self.q
        return Polynomial(self, out)


@lru_cache(maxsize=64)
def make_ring(n: int, q: int, psi: int | None = None) -> Ring:
    return Ring(n, Modulus(q), psi)


@dataclass(frozen=True, eq=False)
class Polynomial:
    ring: Ring
    coeffs: np.ndarray
    domain: Domain = Domain.COEFFICIENT

    def __post_init__(self):
        c = self.coeffs
        if c.dtype != np.uint64 or c.shape != (self.ring.n,):
            raise RingError(f"expected {self.ring.n} uint64 coefficients, got {c.dtype}{c.shape}")
        if c.size and int(c.max()) >= self.ring.q:
            raise RingError("coefficient not reduced mod q")
        c.flags.writeable = False

    @property
    def n(self) -> int:
        return self.ring.n

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.ring.same_as(other.ring)
            and self.domain == other.domain
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def _check(self, other: Polynomial):
        if not self.ring.same_as(other.ring):
            raise RingError("ring mismatch")
        if self.domain != other.domain:
            raise RingError("domain mismatch")

    def __add__(self, other: Polynomial) -> Polynomial:
        self._check(other)
        q = np.uint64(self.ring.q)
        s = self.coeffs + other.coeffs
        return Polynomial(self.ring, np.where(s >= q, s - q, s), self.domain)

    def __sub__(self, other: Polynomial) -> Polynomial:
        self._check(other)
        q = np.uint64(self.ring.q)
        d = self.coeffs + (q - other.coeffs)
        return Polynomial(self.ring, np.where(d >= q, d - q, d), self.domain)

    def __neg__(self) -> Polynomial:
        q = np.uint64(self.ring.q)
        neg = np.where(self.coeffs == 0, self.coeffs, q - self.coeffs)
        return Polynomial(self.ring, neg, self.domain)

    def scale(self, c: int) -> Polynomial:
        q = self.ring.q
        out = (self.coeffs.astype(object) * (c % q)) % q
        return Polynomial(self.ring, out.astype(np.uint64), self.domain)

    def pointwise(self, other: Polynomial) -> Polynomial:
        self._check(other)
        if self.domain != Domain.EVALUATION:
            raise RingError("pointwise product needs evaluation-domain operands")
        out = (self.coeffs.astype(object) * other.coeffs.astype(object)) % self.ring.q
        return Polynomial(self.ring, out.astype(np.uint64), Domain.EVALUATION)

    def centered(self) -> np.ndarray:
        """Coefficients lifted to (-q/2, q/2] as Python ints (object array)."""
        q = self.ring.q
        c = self.coeffs.astype(object)
        return np.where(c > q // 2, c - q, c)

    def __mul__(self, other: Polynomial) -> Polynomial:
        return poly_mul(self, other)


def ntt_forward(p: Polynomial) -> Polynomial:
    """Negacyclic Cooley-Tukey NTT; output in bit-reversed order."""
    if p.domain != Domain.COEFFICIENT:
        raise RingError("ntt_forward expects a coefficient-domain polynomial")
    t_ = p.ring.tables
    n, q = p.n, p.ring.q
    a = p.coeffs.astype(object)
    t, m = n, 1
    while m < n:
        t //= 2
        v = a.reshape(m, 2, t)
        s = t_.psi_rev[m : 2 * m].reshape(m, 1)
        u = v[:, 0, :].copy()
        w = (v[:, 1, :] * s) % q
        v[:, 0, :] = (u + w) % q
        v[:, 1, :] = (u - w) % q
        m *= 2
    return Polynomial(p.ring, a.astype(np.uint64), Domain.EVALUATION)


def ntt_inverse(p: Polynomial) -> Polynomial:
    """Gentleman-Sande inverse of :func:`ntt_forward`."""
    if p.domain != Domain.EVALUATION:
        raise RingError("ntt_inverse expects an evaluation-domain polynomial")
    t_ = p.ring.tables
    n, q = p.n, p.ring.q
    a = p.coeffs.astype(object)
    t, m = 1, n
    while m > 1:
        h = m // 2
        v = a.reshape(h, 2, t)
        s = t_.psi_inv_rev[h:m].reshape(h, 1)
        u = v[:, 0, :].copy()
        w = v[:, 1, :].copy()
        v[:, 0, :] = (u + w) % q
        v[:, 1, :] = ((u - w) * s) % q
        t *= 2
        m = h
    a = (a * t_.n_inv) % q
    return Polynomial(p.ring, a.astype(np.uint64), Domain.COEFFICIENT)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    if not a.ring.same_as(b.ring):
        raise RingError("ring mismatch")
    if a.domain == Domain.EVALUATION and b.domain == Domain.EVALUATION:
        return a.pointwise(b)
    if a.domain != Domain.COEFFICIENT or b.domain != Domain.COEFFICIENT:
        raise RingError("mixed-domain product")
    return ntt_inverse(ntt_forward(a).pointwise(ntt_forward(b)))


def negacyclic_schoolbook(a, b, modulus: int) -> np.ndarray:
    """O(n^2) product mod (x^n + 1, modulus) on plain integer sequences."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    n = len(a)
    if len(b) != n:
        raise RingError("length mismatch")
    out = [0] * n
    for i, ai in enumerate(a):
        if not ai:
            continue
        for j, bj in enumerate(b):
            k = i + j
            if k < n:
                out[k] += ai * bj
            else:
                out[k - n] -= ai * bj
    return np.array([x % modulus for x in out], dtype=object)


def poly_mul_schoolbook(a: Polynomial, b: Polynomial) -> Polynomial:
    if not a.ring.same_as(b.ring):
        raise RingError("ring mismatch")
    if a.domain != Domain.COEFFICIENT or b.domain != Domain.COEFFICIENT:
        raise RingError("schoolbook product needs coefficient-domain operands")
    return a.ring.poly(negacyclic_schoolbook(a.coeffs, b.coeffs, a.ring.q))


def sample(ring: Ring, kind: str, rng: Rng, eta: int = 2) -> Polynomial:
    """Draw a polynomial: ``uniform`` over Z_q, ``ternary`` {-1,0,1}, or ``cbd``."""
    n, q = ring.n, ring.q
    if kind == "uniform":
        return Polynomial(ring, rng.below(q, n))
    if kind == "ternary":
        signed = rng.below(3, n).astype(np.int64) - 1
    elif kind == "cbd":
        if eta < 1:
            raise ValueError("eta must be >= 1")
        bits = rng.bits((2, n, eta)).astype(np.int64)
        signed = bits[0].sum(axis=1) - bits[1].sum(axis=1)
    else:
        raise ValueError(f"unknown sampling kind {kind!r}")
    return Polynomial(ring, np.mod(signed, q).astype(np.uint64))
