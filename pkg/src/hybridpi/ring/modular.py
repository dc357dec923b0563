"""Prime moduli and scalar modular arithmetic."""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from ..errors import RingError

MAX_MODULUS_BITS = 62


def is_prime(x: int) -> bool:
    return x >= 2 and bool(gmpy2.is_prime(x, 40))


@dataclass(frozen=True)
class Modulus:
    """A prime modulus q < 2^62.

    Reduction uses Python's arbitrary-precision ``%``; ``bits`` is kept for
    sampling masks and serialization width checks.
    """

    q: int

    def __post_init__(self):
        if self.q.bit_length() > MAX_MODULUS_BITS:
            raise RingError(f"modulus {self.q} exceeds 2^{MAX_MODULUS_BITS}")
        if not is_prime(self.q):
            raise RingError(f"modulus {self.q} is not prime")

    @property
    def bits(self) -> int:
        return self.q.bit_length()

    def supports(self, n: int) -> bool:
        return (self.q - 1) % (2 * n) == 0


def mod_op(a: int, b: int, m: Modulus, kind: str) -> int:
    """Exact ``a <kind> b mod q`` for kind in add, sub, mul, pow, inv.

    For ``inv`` the second operand is ignored.
    """
    q = m.q
    if not 0 <= a < q:
        raise RingError(f"operand {a} not reduced mod {q}")
    if kind != "pow" and kind != "inv" and not 0 <= b < q:
        raise RingError(f"operand {b} not reduced mod {q}")
    if kind == "add":
        return (a + b) % q
    if kind == "sub":
        return (a - b) % q
    if kind == "mul":
        return a * b % q
    if kind == "pow":
        return pow(a, b, q)
    if kind == "inv":
        if a == 0:
            raise RingError("inverse of zero")
        return pow(a, -1, q)
    raise ValueError(f"unknown modular operation {kind!r}")


def find_root(n: int, m: Modulus) -> int:
    """Smallest-generator primitive 2n-th root of unity mod q.

    Any x with x^((q-1)/2n) = g and g^n = -1 gives g of order exactly 2n,
    since 2n is a power of two. Candidates are tried in order x = 2, 3, ...
    so the result is deterministic.
    """
    if n < 1 or n & (n - 1):
        raise RingError(f"n={n} is not a power of two")
    q = m.q
    if (q - 1) % (2 * n):
        raise RingError(f"q={q} is not 1 mod 2n={2 * n}; no primitive root exists")
    exponent = (q - 1) // (2 * n)
    for x in range(2, q):
        g = pow(x, exponent, q)
        if pow(g, n, q) == q - 1:
            return g
    raise RingError(f"no primitive {2 * n}-th root mod {q}")


def find_prime(bits: int, step: int = 2, residue: int = 1) -> int:
    """Largest prime below 2^bits congruent to ``residue`` mod ``step``."""
    if step < 1:
        raise ValueError("step must be positive")
    top = (1 << bits) - 1
    x = top - ((top - residue) % step)
    while x > 1:
        if is_prime(x):
            return x
        x -= step
    raise RingError(f"no prime found below 2^{bits} with residue {residue} mod {step}")


def ntt_prime(n: int, bits: int = 60, cofactor: int = 1) -> int:
    """Largest prime q < 2^bits with q = 1 mod (2n * cofactor)."""
    return find_prime(bits, step=2 * n * cofactor, residue=1)
