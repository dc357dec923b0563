"""Minimal symmetric BFV: encrypt, decrypt, add, plaintext multiply, packed matvec."""

from ..params import HeParams, setup_he
from .bfv import (
    Ciphertext,
    MatvecPlan,
    Packing,
    PlaintextVector,
    PreparedCiphertext,
    SecretKey,
    ct_add,
    ct_neg_plain,
    ct_pt_mul,
    decrypt,
    decrypt_blocks,
    encrypt,
    encrypt_blocks,
    exact_noise,
    he_matvec,
    keygen,
    matvec_blocks,
    matvec_output_packing,
    serialized_size,
    stacked_weight_poly,
)

__all__ = [
    "Ciphertext",
    "HeParams",
    "MatvecPlan",
    "Packing",
    "PlaintextVector",
    "PreparedCiphertext",
    "SecretKey",
    "ct_add",
    "ct_neg_plain",
    "ct_pt_mul",
    "decrypt",
    "decrypt_blocks",
    "encrypt",
    "encrypt_blocks",
    "exact_noise",
    "he_matvec",
    "keygen",
    "matvec_blocks",
    "matvec_output_packing",
    "serialized_size",
    "setup_he",
    "stacked_weight_poly",
]
