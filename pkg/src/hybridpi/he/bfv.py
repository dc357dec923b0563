"""Symmetric BFV over Z_q[x]/(x^n + 1) with plaintext space Z_p[x]/(x^n + 1).

Only what the offline share generation needs: encrypt, decrypt, ciphertext
and plaintext addition, and plaintext-polynomial multiplication. Every
ciphertext carries an exact integer upper bound on its noise so the server
can refuse to return a ciphertext that might not decrypt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigError, NoiseOverflowError, PackingError, RingError
from ..params import HeParams
from ..ring import Domain, Polynomial, ntt_forward, ntt_inverse, sample
from ..rng import Rng


@dataclass(frozen=True)
class Packing:
    """Where a vector lives in the coefficients: index = offset + stride * t."""

    length: int
    offset: int = 0
    stride: int = 1

    def indices(self) -> np.ndarray:
        return self.offset + self.stride * np.arange(self.length, dtype=np.int64)

    def fits(self, n: int) -> bool:
        return self.length == 0 or self.offset + self.stride * (self.length - 1) < n


@dataclass(frozen=True)
class PlaintextVector:
    values: np.ndarray
    packing: Packing

    def __post_init__(self):
        if len(self.values) != self.packing.length:
            raise ConfigError("values length does not match packing")

    @classmethod
    def packed(cls, values, offset: int = 0, stride: int = 1) -> PlaintextVector:
        v = np.asarray(values, dtype=np.int64)
        return cls(v, Packing(len(v), offset, stride))

    def coefficients(self, params: HeParams) -> np.ndarray:
        """Full length-n plaintext coefficient vector (int64, in [0, p))."""
        if not self.packing.fits(params.n):
            raise ConfigError("packing does not fit in n coefficients")
        v = np.asarray(self.values, dtype=np.int64)
        if v.size and (v.min() < 0 or v.max() >= params.p):
            raise ConfigError("plaintext value outside [0, p)")
        out = np.zeros(params.n, dtype=np.int64)
        out[self.packing.indices()] = v
        return out


@dataclass(frozen=True, eq=False)
class SecretKey:
    params: HeParams
    s: Polynomial

    @cached_property
    def s_ntt(self) -> Polynomial:
        return ntt_forward(self.s)


@dataclass(frozen=True, eq=False)
class Ciphertext:
    """c0 + c1*s = delta*m + e (mod q) with |e| <= noise_bound.

    ``noise_bound`` is None for ciphertexts whose history is unknown
    (for example, received from a peer).
    """

    params: HeParams
    c0: Polynomial
    c1: Polynomial
    noise_bound: int | None

    @property
    def noise_bits(self) -> float | None:
        if self.noise_bound is None:
            return None
        return math.log2(self.noise_bound) if self.noise_bound > 0 else 0.0

    def to_bytes(self) -> bytes:
        return (
            self.params.digest
            + self.c0.coeffs.astype("<u8").tobytes()
            + self.c1.coeffs.astype("<u8").tobytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes, params: HeParams, noise_bound: int | None = None) -> Ciphertext:
        n = params.n
        if len(data) != 32 + 16 * n:
            raise ConfigError(f"ciphertext must be {32 + 16 * n} bytes, got {len(data)}")
        if data[:32] != params.digest:
            raise ConfigError("ciphertext was produced under different HE params")
        ring = params.ring
        c0 = np.frombuffer(data, dtype="<u8", count=n, offset=32).astype(np.uint64)
        c1 = np.frombuffer(data, dtype="<u8", count=n, offset=32 + 8 * n).astype(np.uint64)
        try:
            return cls(params, Polynomial(ring, c0), Polynomial(ring, c1), noise_bound)
        except RingError as exc:
            raise ConfigError(f"malformed ciphertext: {exc}") from exc


def serialized_size(params: HeParams) -> int:
    return 32 + 16 * params.n


def keygen(params: HeParams, rng: Rng) -> SecretKey:
    return SecretKey(params, sample(params.ring, "ternary", rng))


def _lift(coeffs: np.ndarray, params: HeParams) -> Polynomial:
    """Centered lift of a Z_p vector into R_q."""
    p = params.p
    c = np.asarray(coeffs, dtype=np.int64)
    centered = np.where(c > p // 2, c - p, c)
    return params.ring.poly(centered)


def _delta_times(coeffs: np.ndarray, params: HeParams) -> Polynomial:
    scaled = (np.asarray(coeffs, dtype=np.int64).astype(object) * params.delta) % params.q
    return Polynomial(params.ring, scaled.astype(np.uint64))


def encrypt(m: PlaintextVector, sk: SecretKey, rng: Rng) -> Ciphertext:
    params = sk.params
    ring = params.ring
    a = sample(ring, "uniform", rng)
    e = sample(ring, "cbd", rng, eta=params.eta)
    a_s = ntt_inverse(ntt_forward(a).pointwise(sk.s_ntt))
    c0 = _delta_times(m.coefficients(params), params) + e - a_s
    return Ciphertext(params, c0, a, params.eta)


def _phase(ct: Ciphertext, sk: SecretKey) -> np.ndarray:
    c1s = ntt_inverse(ntt_forward(ct.c1).pointwise(sk.s_ntt))
    return (ct.c0 + c1s).coeffs.astype(object)


def decrypt(ct: Ciphertext, sk: SecretKey, packing: Packing | None = None,
            strict: bool = True) -> PlaintextVector:
    """Round p*(c0 + c1*s)/q to the nearest integer, mod p.

    With ``strict`` set, a ciphertext whose tracked noise bound is past the
    decryption budget raises :class:`NoiseOverflowError` instead of
    returning values that may be wrong.
    """
    params = sk.params
    if ct.params != params:
        raise ConfigError("ciphertext and key use different parameters")
    if strict and ct.noise_bound is not None and not params.noise_ok(ct.noise_bound):
        raise NoiseOverflowError(
            f"noise bound 2^{ct.noise_bits:.1f} exceeds budget "
            f"2^{math.log2(params.q / (2 * params.p)):.1f}"
        )
    x = _phase(ct, sk)
    p, q = params.p, params.q
    m = ((x * p + q // 2) // q) % p
    m = m.astype(np.int64)
    packing = packing or Packing(params.n)
    return PlaintextVector(m[packing.indices()], packing)


def exact_noise(ct: Ciphertext, sk: SecretKey, expected) -> int:
    """max |e| where c0 + c1*s - delta*expected = e (mod q), centered."""
    params = sk.params
    if isinstance(expected, PlaintextVector):
        expected = expected.coefficients(params)
    x = _phase(ct, sk)
    q = params.q
    e = (x - np.asarray(expected, dtype=np.int64).astype(object) * params.delta) % q
    e = np.where(e > q // 2, e - q, e)
    return int(max(abs(int(v)) for v in e))


def _add_bounds(*bounds):
    if any(b is None for b in bounds):
        return None
    return sum(bounds)


def ct_add(a: Ciphertext, b: Ciphertext | PlaintextVector) -> Ciphertext:
    params = a.params
    if isinstance(b, PlaintextVector):
        c0 = a.c0 + _delta_times(b.coefficients(params), params)
        return Ciphertext(params, c0, a.c1, _add_bounds(a.noise_bound, params.rho))
    if b.params != params:
        raise ConfigError("ciphertext parameter mismatch")
    bound = _add_bounds(a.noise_bound, b.noise_bound, params.rho)
    return Ciphertext(params, a.c0 + b.c0, a.c1 + b.c1, bound)


def ct_neg_plain(pt: PlaintextVector, p: int) -> PlaintextVector:
    """Additive inverse of a plaintext vector mod p."""
    return PlaintextVector((-np.asarray(pt.values, dtype=np.int64)) % p, pt.packing)


@dataclass(frozen=True, eq=False)
class PreparedCiphertext:
    """A ciphertext with both components already in the NTT domain."""

    ct: Ciphertext
    c0_ntt: Polynomial
    c1_ntt: Polynomial

    @classmethod
    def of(cls, ct: Ciphertext) -> PreparedCiphertext:
        return cls(ct, ntt_forward(ct.c0), ntt_forward(ct.c1))


def _weight_l1(w: np.ndarray, p: int) -> int:
    w = np.asarray(w, dtype=np.int64)
    centered = np.where(w > p // 2, w - p, w)
    return int(np.abs(centered).sum())


def _pt_mul_accumulate(terms, params: HeParams) -> Ciphertext:
    acc0 = acc1 = None
    bound: int | None = 0
    for prepared, w in terms:
        w = np.asarray(w, dtype=np.int64)
        if w.shape != (params.n,):
            raise ConfigError(f"weight polynomial must have {params.n} coefficients")
        if w.size and (w.min() < 0 or w.max() >= params.p):
            raise ConfigError("weight coefficient outside [0, p)")
        w_ntt = ntt_forward(_lift(w, params))
        t0 = prepared.c0_ntt.pointwise(w_ntt)
        t1 = prepared.c1_ntt.pointwise(w_ntt)
        acc0 = t0 if acc0 is None else acc0 + t0
        acc1 = t1 if acc1 is None else acc1 + t1
        nb = prepared.ct.noise_bound
        if bound is not None and nb is not None:
            # w*e - rho*k with |k| <= ||w||_1 (centered)
            bound += _weight_l1(w, params.p) * (nb + params.rho)
        else:
            bound = None
    if acc0 is None:
        raise ConfigError("nothing to multiply")
    if len(terms) > 1 and bound is not None:
        bound += (len(terms) - 1) * params.rho
    return Ciphertext(params, ntt_inverse(acc0), ntt_inverse(acc1), bound)


def ct_pt_mul(ct: Ciphertext, w) -> Ciphertext:
    """Multiply by a plaintext polynomial w over Z_p (negacyclic in Z_p[x])."""
    if isinstance(w, Polynomial):
        if w.domain != Domain.COEFFICIENT:
            raise RingError("weight polynomial must be in coefficient domain")
        w = w.coeffs.astype(np.int64)
    return _pt_mul_accumulate([(PreparedCiphertext.of(ct), w)], ct.params)


def stacked_weight_poly(W: np.ndarray, n: int) -> np.ndarray:
    """W(x) = sum_i x^(i*c) * rev(row_i), as a length-n coefficient vector."""
    W = np.asarray(W, dtype=np.int64)
    m, c = W.shape
    if (m + 1) * c - 1 >= n:
        raise PackingError(f"{m}x{c} matrix needs (m+1)*c - 1 < n = {n}")
    out = np.zeros(n, dtype=np.int64)
    out[: m * c] = W[:, ::-1].reshape(-1)
    return out


def matvec_output_packing(rows: int, cols: int) -> Packing:
    return Packing(rows, offset=cols - 1, stride=cols)


def he_matvec(W, ct: Ciphertext | PreparedCiphertext) -> Ciphertext:
    """Encrypted W @ x for x packed at coefficients 0..c-1 of ``ct``.

    Output ``i`` is at coefficient ``i*c + c - 1``; see
    :func:`matvec_output_packing`. Raises :class:`PackingError` when the
    matrix does not fit one ciphertext.
    """
    prepared = ct if isinstance(ct, PreparedCiphertext) else PreparedCiphertext.of(ct)
    params = prepared.ct.params
    poly = stacked_weight_poly(W, params.n)
    return _pt_mul_accumulate([(prepared, poly)], params)


@dataclass(frozen=True)
class MatvecPlan:
    """Split of a rows x cols matrix into ciphertext-sized pieces.

    The input is cut into column blocks of ``col_block`` entries (one
    ciphertext each, zero-padded); the output into row chunks of
    ``row_block`` rows, each returned in its own ciphertext as the sum of its
    per-column-block products.
    """

    rows: int
    cols: int
    n: int
    col_block: int
    row_block: int

    @classmethod
    def for_shape(cls, rows: int, cols: int, n: int) -> MatvecPlan:
        if rows < 1 or cols < 1:
            raise ConfigError("matrix must be non-empty")
        col_block = min(cols, n // 2)
        row_block = min(rows, n // col_block - 1)
        return cls(rows, cols, n, col_block, row_block)

    @property
    def n_col_blocks(self) -> int:
        return -(-self.cols // self.col_block)

    @property
    def n_row_chunks(self) -> int:
        return -(-self.rows // self.row_block)

    def col_slice(self, b: int) -> slice:
        return slice(b * self.col_block, min(self.cols, (b + 1) * self.col_block))

    def row_slice(self, k: int) -> slice:
        return slice(k * self.row_block, min(self.rows, (k + 1) * self.row_block))

    def input_packing(self, b: int) -> Packing:
        s = self.col_slice(b)
        return Packing(s.stop - s.start)

    def output_packing(self, k: int) -> Packing:
        s = self.row_slice(k)
        return matvec_output_packing(s.stop - s.start, self.col_block)

    def weight_block(self, W: np.ndarray, k: int, b: int) -> np.ndarray:
        block = np.zeros((self.row_slice(k).stop - self.row_slice(k).start, self.col_block),
                         dtype=np.int64)
        part = W[self.row_slice(k), self.col_slice(b)]
        block[:, : part.shape[1]] = part
        return block


def encrypt_blocks(x, plan: MatvecPlan, sk: SecretKey, rng: Rng) -> list[Ciphertext]:
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (plan.cols,):
        raise ConfigError(f"expected input of length {plan.cols}")
    return [
        encrypt(PlaintextVector(x[plan.col_slice(b)], plan.input_packing(b)), sk, rng)
        for b in range(plan.n_col_blocks)
    ]


def matvec_blocks(W, cts: list[Ciphertext], plan: MatvecPlan) -> list[Ciphertext]:
    """Chunked fallback of :func:`he_matvec`: one output ciphertext per row chunk."""
    W = np.asarray(W, dtype=np.int64)
    if W.shape != (plan.rows, plan.cols):
        raise ConfigError(f"weight shape {W.shape} does not match plan")
    if len(cts) != plan.n_col_blocks:
        raise ConfigError(f"expected {plan.n_col_blocks} input ciphertexts, got {len(cts)}")
    prepared = [PreparedCiphertext.of(ct) for ct in cts]
    params = cts[0].params
    out = []
    for k in range(plan.n_row_chunks):
        terms = [
            (prepared[b], stacked_weight_poly(plan.weight_block(W, k, b), params.n))
            for b in range(plan.n_col_blocks)
        ]
        out.append(_pt_mul_accumulate(terms, params))
    return out


def decrypt_blocks(cts: list[Ciphertext], plan: MatvecPlan, sk: SecretKey,
                   strict: bool = True) -> np.ndarray:
    if len(cts) != plan.n_row_chunks:
        raise ConfigError(f"expected {plan.n_row_chunks} result ciphertexts, got {len(cts)}")
    parts = [decrypt(ct, sk, plan.output_packing(k), strict).values for k, ct in enumerate(cts)]
    return np.concatenate(parts).astype(np.int64)
