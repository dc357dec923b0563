"""Exact modular arithmetic and the negacyclic NTT over Z_q[x]/(x^n + 1)."""

from .modular import Modulus, find_prime, find_root, is_prime, mod_op, ntt_prime
from .poly import (
    Domain,
    NttTables,
    Polynomial,
    Ring,
    make_ring,
    negacyclic_schoolbook,
    ntt_forward,
    ntt_inverse,
    poly_mul,
    poly_mul_schoolbook,
    sample,
)

__all__ = [
    "Domain",
    "Modulus",
    "NttTables",
    "Polynomial",
    "Ring",
    "find_prime",
    "find_root",
    "is_prime",
    "make_ring",
    "mod_op",
    "negacyclic_schoolbook",
    "ntt_forward",
    "ntt_inverse",
    "ntt_prime",
    "poly_mul",
    "poly_mul_schoolbook",
    "sample",
]
