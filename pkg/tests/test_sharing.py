import numpy as np
import pytest
from scipy.stats import chisquare

from hybridpi.errors import ShareError
from hybridpi.rng import Rng
from hybridpi.sharing import (
    Share,
    client_offline_share,
    matvec_mod,
    reconstruct,
    sample_mask,
    server_online_linear,
    split,
)

P = 2097143


def test_matvec_mod_large_values():
    rng = Rng(1)
    W = rng.below(P, (5, 3000)).astype(np.int64)
    x = rng.below(P, 3000).astype(np.int64)
    want = (W.astype(object) @ x.astype(object)) % P
    assert list(matvec_mod(W, x, P)) == list(want)
    with pytest.raises(ShareError):
        matvec_mod(W, x[:-1], P)


def test_mask_sampling():
    assert np.array_equal(sample_mask(10, P, Rng(2)), sample_mask(10, P, Rng(2)))
    m = sample_mask(10_000, P, Rng(3))
    assert m.min() >= 0 and m.max() < P
    counts = np.bincount(m * 20 // P, minlength=20)
    assert chisquare(counts).pvalue > 1e-3
    with pytest.raises(ShareError):
        sample_mask(0, P, Rng(3))


def test_online_linear_identity():
    x_minus_r = np.array([5, 7, 11])
    out = server_online_linear(np.eye(3, dtype=np.int64), None, x_minus_r, np.zeros(3, dtype=np.int64), P)
    assert list(out.values) == [5, 7, 11]
    s = np.array([3, 4])
    out = server_online_linear(np.ones((2, 3), dtype=np.int64), np.array([1, 2]), np.zeros(3), s, P)
    assert list(out.values) == [4, 6]


def test_shares_reconstruct_linear_layer():
    rng = Rng(4)
    for layer in range(10):
        rows, cols = 7, 13
        W = rng.below(P, (rows, cols)).astype(np.int64)
        bias = rng.below(P, rows).astype(np.int64)
        x, r, s = (rng.below(P, n).astype(np.int64) for n in (cols, cols, rows))
        yc = client_offline_share(W, r, s, P, layer)
        ys = server_online_linear(W, bias, (x - r) % P, s, P, layer)
        assert np.array_equal(reconstruct(yc, ys), (matvec_mod(W, x, P) + bias) % P)


def test_split_reconstruct():
    v = np.array([1, 2, P - 1])
    c, s = split(v, P, Rng(5))
    assert np.array_equal(reconstruct(c, s), v)
    z = Share(np.zeros(3, dtype=np.int64), "server", 0, P)
    assert np.array_equal(reconstruct(Share(v, "client", 0, P), z), v)
    neg = Share((P - v) % P, "server", 0, P)
    assert not reconstruct(Share(v, "client", 0, P), neg).any()


def test_share_validation():
    with pytest.raises(ShareError):
        Share(np.array([P]), "client", 0, P)
    with pytest.raises(ShareError):
        Share(np.array([1]), "dealer", 0, P)
    a = Share(np.array([1]), "client", 0, P)
    with pytest.raises(ShareError):
        reconstruct(a, a)
    with pytest.raises(ShareError):
        reconstruct(a, Share(np.array([1]), "server", 1, P))
    with pytest.raises(ShareError):
        server_online_linear(np.ones((2, 3)), None, np.zeros(3), np.zeros(3), P, layer=4)
