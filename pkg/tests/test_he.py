import numpy as np
import pytest

from hybridpi.errors import ConfigError, NoiseOverflowError, PackingError
from hybridpi.he import (
    Ciphertext,
    MatvecPlan,
    Packing,
    PlaintextVector,
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
)
from hybridpi.params import HeParams, setup_he
from hybridpi.ring import negacyclic_schoolbook
from hybridpi.rng import Rng

from helpers import bundled_params


@pytest.fixture(scope="module")
def small():
    he = setup_he(n=256)
    return he, keygen(he, Rng(b"k" * 32))


@pytest.fixture(scope="module")
def default():
    he = bundled_params().he
    return he, keygen(he, Rng(1))


def enc(values, sk, rng):
    return encrypt(PlaintextVector.packed(values), sk, rng)


def test_params_shape():
    he = bundled_params().he
    assert he.n == 4096 and he.p < 2 ** 21 and he.q < 2 ** 62
    assert (he.q - 1) % (2 * he.n) == 0 and he.rho == 1
    assert HeParams.from_bytes(he.to_bytes()) == he
    with pytest.raises(ConfigError):
        HeParams(n=256, q=he.q, p=15)


def test_keygen_deterministic_and_ternary(default):
    he, sk = default
    again = keygen(he, Rng(1))
    assert sk.s == again.s
    s = sk.s.centered()
    counts = np.array([(s == v).sum() for v in (-1, 0, 1)])
    assert counts.sum() == he.n
    assert np.all(np.abs(counts - he.n / 3) < 0.1 * he.n / 3)


def test_roundtrip_default(default):
    he, sk = default
    rng = Rng(2)
    assert not decrypt(enc(np.zeros(he.n, dtype=np.int64), sk, rng), sk).values.any()
    for _ in range(100):
        m = rng.below(he.p, he.n).astype(np.int64)
        assert np.array_equal(decrypt(enc(m, sk, rng), sk).values, m)


def test_thousand_additions(small):
    he, sk = small
    rng = Rng(3)
    acc = enc(np.ones(4), sk, rng)
    for _ in range(999):
        acc = ct_add(acc, enc(np.ones(4), sk, rng))
    assert list(decrypt(acc, sk, Packing(4)).values) == [1000] * 4
    assert exact_noise(acc, sk, PlaintextVector.packed([1000] * 4)) <= acc.noise_bound


def test_add_identities(small):
    he, sk = small
    rng = Rng(4)
    m1, m2 = rng.below(he.p, 32).astype(np.int64), rng.below(he.p, 32).astype(np.int64)
    c1 = enc(m1, sk, rng)
    pk = Packing(32)
    assert np.array_equal(decrypt(ct_add(c1, PlaintextVector.packed(np.zeros(32))), sk, pk).values, m1)
    assert np.array_equal(decrypt(ct_add(c1, enc(m2, sk, rng)), sk, pk).values, (m1 + m2) % he.p)
    neg = ct_neg_plain(PlaintextVector.packed(m1), he.p)
    assert not decrypt(ct_add(c1, neg), sk, pk).values.any()


def test_plain_mul(small):
    he, sk = small
    rng = Rng(5)
    m = rng.below(he.p, he.n).astype(np.int64)
    ct = enc(m, sk, rng)
    one = np.zeros(he.n, dtype=np.int64)
    one[0] = 1
    assert np.array_equal(decrypt(ct_pt_mul(ct, one), sk).values, m)
    three = one * 3
    twos = enc(np.full(he.n, 2), sk, rng)
    assert np.all(decrypt(ct_pt_mul(twos, three), sk).values == 6)


def test_plain_mul_schoolbook():
    he = setup_he(n=64)
    sk = keygen(he, Rng(6))
    rng = Rng(7)
    for _ in range(5):
        m = rng.below(he.p, 64).astype(np.int64)
        w = rng.below(he.p, 64).astype(np.int64)
        ct = ct_pt_mul(enc(m, sk, rng), w)
        want = negacyclic_schoolbook(m, w, he.p).astype(np.int64)
        assert np.array_equal(decrypt(ct, sk).values, want)


def test_matvec_small(small):
    he, sk = small
    rng = Rng(8)
    out = he_matvec(np.eye(2, dtype=np.int64), enc([11, 22], sk, rng))
    assert list(decrypt(out, sk, matvec_output_packing(2, 2)).values) == [11, 22]
    out = he_matvec(np.array([[1, 2], [3, 4]]), enc([1, 1], sk, rng))
    assert list(decrypt(out, sk, matvec_output_packing(2, 2)).values) == [3, 7]
    W = rng.below(he.p, (8, 16)).astype(np.int64)
    x = rng.below(he.p, 16).astype(np.int64)
    out = he_matvec(W, enc(x, sk, rng))
    want = (W.astype(object) @ x.astype(object)) % he.p
    assert list(decrypt(out, sk, matvec_output_packing(8, 16)).values) == list(want)


def test_matvec_too_big(small):
    he, sk = small
    with pytest.raises(PackingError):
        he_matvec(np.ones((16, 16), dtype=np.int64), enc([1] * 16, sk, Rng(9)))


def test_matvec_blocks_random_shapes(small):
    he, sk = small
    rng = Rng(10)
    gen = np.random.default_rng(10)
    for _ in range(20):
        rows, cols = int(gen.integers(1, 300)), int(gen.integers(1, 300))
        plan = MatvecPlan.for_shape(rows, cols, he.n)
        W = rng.below(he.p, (rows, cols)).astype(np.int64)
        x = rng.below(he.p, cols).astype(np.int64)
        got = decrypt_blocks(matvec_blocks(W, encrypt_blocks(x, plan, sk, rng), plan), plan, sk)
        want = (W.astype(object) @ x.astype(object)) % he.p
        assert list(got) == list(want), (rows, cols)


def test_serialization(small):
    he, sk = small
    ct = enc([1, 2, 3], sk, Rng(11))
    blob = ct.to_bytes()
    assert len(blob) == serialized_size(he)
    back = Ciphertext.from_bytes(blob, he, noise_bound=he.eta)
    assert list(decrypt(back, sk, Packing(3)).values) == [1, 2, 3]
    with pytest.raises(ConfigError):
        Ciphertext.from_bytes(blob[:-1], he)


def test_noise_overflow_detected(small):
    he, sk = small
    rng = Rng(12)
    w = rng.below(he.p, he.n).astype(np.int64)
    ct = ct_pt_mul(ct_pt_mul(enc(rng.below(he.p, he.n), sk, rng), w), w)
    assert not he.noise_ok(ct.noise_bound)
    with pytest.raises(NoiseOverflowError):
        decrypt(ct, sk)


def test_noise_bound_is_sound(small):
    he, sk = small
    rng = Rng(13)
    W = rng.below(he.p, (10, 20)).astype(np.int64)
    x = rng.below(he.p, 20).astype(np.int64)
    out = he_matvec(W, enc(x, sk, rng))
    dec = decrypt(out, sk)
    assert exact_noise(out, sk, dec.values) <= out.noise_bound
