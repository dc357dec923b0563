import numpy as np
import pytest

from hybridpi.errors import RingError
from hybridpi.ring import (
    Domain,
    Modulus,
    find_root,
    make_ring,
    mod_op,
    negacyclic_schoolbook,
    ntt_forward,
    ntt_inverse,
    ntt_prime,
    poly_mul,
    poly_mul_schoolbook,
    sample,
)
from hybridpi.rng import Rng


def test_mod_ops():
    m = Modulus(7)
    assert mod_op(5, 4, m, "add") == 2
    assert mod_op(2, 5, m, "sub") == 4
    assert mod_op(3, 0, m, "inv") == 5
    assert all(mod_op(x, mod_op(x, 0, m, "inv"), m, "mul") == 1 for x in range(1, 7))
    gen = np.random.default_rng(0)
    q = Modulus(ntt_prime(64))
    for a in gen.integers(0, q.q, 20):
        assert mod_op(int(a), 1, q, "mul") == a


def test_mod_op_rejects():
    m = Modulus(7)
    with pytest.raises(RingError):
        mod_op(0, 0, m, "inv")
    with pytest.raises(RingError):
        mod_op(9, 1, m, "add")
    with pytest.raises(RingError):
        Modulus(15)


def test_find_root():
    psi = find_root(4, Modulus(17))
    assert pow(psi, 8, 17) == 1 and pow(psi, 4, 17) == 16
    assert find_root(1, Modulus(13)) == 12
    q = ntt_prime(2048)
    psi = find_root(2048, Modulus(q))
    assert pow(psi, 2048, q) == q - 1 and pow(psi, 4096, q) == 1
    with pytest.raises(RingError):
        find_root(8, Modulus(19))  # 18 is not divisible by 16


def test_ntt_constant_is_dc():
    ring = make_ring(8, 17)
    a = ring.poly([5, 0, 0, 0, 0, 0, 0, 0])
    assert list(ntt_forward(a).coeffs) == [5] * 8


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096])
def test_ntt_roundtrip(n):
    ring = make_ring(n, ntt_prime(n))
    a = sample(ring, "uniform", Rng(n))
    f = ntt_forward(a)
    assert f.domain == Domain.EVALUATION
    assert ntt_inverse(f) == a


@pytest.mark.parametrize("n", [8, 16, 32, 64])
def test_ntt_mul_matches_schoolbook(n):
    ring = make_ring(n, ntt_prime(n))
    rng = Rng(100 + n)
    for _ in range(5):
        a, b = sample(ring, "uniform", rng), sample(ring, "uniform", rng)
        assert poly_mul(a, b) == poly_mul_schoolbook(a, b)


def test_small_prime_schoolbook():
    ring = make_ring(8, 17)
    rng = Rng(3)
    a, b = sample(ring, "uniform", rng), sample(ring, "uniform", rng)
    want = negacyclic_schoolbook(a.coeffs, b.coeffs, 17)
    assert [int(x) for x in poly_mul(a, b).coeffs] == [int(x) for x in want]


def test_negacyclic_wrap():
    ring = make_ring(64, ntt_prime(64))
    x_last = ring.monomial(63)
    x = ring.monomial(1)
    prod = poly_mul(x_last, x)
    assert int(prod.coeffs[0]) == ring.q - 1 and not prod.coeffs[1:].any()
    one = ring.monomial(0)
    a = sample(ring, "uniform", Rng(1))
    assert poly_mul(a, one) == a


def test_sampling():
    ring = make_ring(4096, ntt_prime(4096))
    s1 = sample(ring, "ternary", Rng(5))
    assert s1 == sample(ring, "ternary", Rng(5))
    cbd = sample(ring, "cbd", Rng(6), eta=2).centered()
    assert cbd.min() >= -2 and cbd.max() <= 2
    u = sample(ring, "uniform", Rng(7)).coeffs.astype(float)
    assert abs(u.mean() - ring.q / 2) < 0.05 * ring.q / 2


def test_ring_mismatch():
    a = make_ring(8, 17).zero()
    b = make_ring(8, 97).zero()
    with pytest.raises(RingError):
        poly_mul(a, b)
