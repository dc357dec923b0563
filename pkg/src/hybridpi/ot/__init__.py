"""Oblivious transfer backends and random-OT precomputation."""

from .backends import (
    BaseOT,
    DealerOT,
    RandomOtReceiver,
    RandomOtSender,
    blocks_to_bytes,
    bytes_to_blocks,
    decode_ints,
    derandomize_receive,
    derandomize_send,
    derandomize_transfer,
    encode_int,
    make_backend,
    ot_precompute_receive,
    ot_precompute_send,
    ot_transfer,
    pack_bits,
    random_ot_transfer,
    unpack_bits,
)

__all__ = [
    "BaseOT", "DealerOT", "RandomOtReceiver", "RandomOtSender", "blocks_to_bytes",
    "bytes_to_blocks", "decode_ints", "derandomize_receive", "derandomize_send",
    "derandomize_transfer", "encode_int", "make_backend", "ot_precompute_receive",
    "ot_precompute_send", "ot_transfer", "pack_bits", "random_ot_transfer", "unpack_bits",
]
