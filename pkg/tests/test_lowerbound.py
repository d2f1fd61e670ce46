import math

import numpy as np
import pytest

from dpspectra.lowerbound import attack_demo, gen_database, gen_instance, hamming, quality, reconstruct
from dpspectra.privacy import make_rng


def test_database_n2_uniform():
    ones_first = sum(gen_database(2, make_rng(s))[0] for s in range(2000))
    assert abs(ones_first / 2000 - 0.5) < 0.05


def test_database_reproducible_and_balanced():
    a = gen_database(8, make_rng(42))
    np.testing.assert_array_equal(a, gen_database(8, make_rng(42)))
    assert a.sum() == 4
    assert gen_database(10**4, make_rng(1)).sum() == 5000


def test_database_odd_n():
    with pytest.raises(ValueError):
        gen_database(7, make_rng(0))


def test_instance_small(rng):
    d = gen_database(8, rng)
    inst = gen_instance(8, 2, d)
    assert inst.s == 4 and inst.sigma1 == 4.0
    np.testing.assert_array_equal(inst.matrix.array[:4], np.tile(d, (4, 1)))
    assert not inst.matrix.array[4:].any()


def test_instance_extreme_coherence(rng):
    inst = gen_instance(8, 8, gen_database(8, rng))
    assert inst.s == 1 and np.count_nonzero(inst.matrix.array.any(axis=1)) == 1


def test_instance_nonintegral(rng):
    with pytest.raises(ValueError):
        gen_instance(8, 3, gen_database(8, rng))


def test_quality_examples(rng):
    n = 16
    inst = gen_instance(n, 4, gen_database(n, rng))
    dbar = inst.direction
    assert quality(inst, dbar) == pytest.approx(inst.sigma1, rel=1e-14)
    w = rng.standard_normal(n)
    w -= (w @ dbar) * dbar
    w /= np.linalg.norm(w)
    assert quality(inst, w) == pytest.approx(0.0, abs=1e-12)
    v = (dbar + w) / np.linalg.norm(dbar + w)
    assert quality(inst, v) == pytest.approx(inst.sigma1 / math.sqrt(2), rel=1e-12)
    with pytest.raises(ValueError):
        quality(inst, 2 * dbar)


def test_reconstruct_examples(rng):
    n = 32
    d = gen_database(n, rng)
    dbar = d / math.sqrt(n / 2)
    np.testing.assert_array_equal(reconstruct(dbar), d)
    zero = reconstruct(np.zeros(n))
    assert not zero.any() and hamming(zero, d) == n // 2


@pytest.mark.parametrize("alpha", [1e-4, 1e-3, 1e-2, 0.05])
def test_reconstruct_hamming_bound(rng, alpha):
    n = 256
    worst = 0.0
    for _ in range(200):
        d = gen_database(n, rng)
        dbar = d / math.sqrt(n / 2)
        w = rng.standard_normal(n)
        if rng.random() < 0.5:
            # Concentrate the error on few coordinates, the costly case.
            w[rng.permutation(n)[8:]] = 0.0
        w -= (w @ dbar) * dbar
        w /= np.linalg.norm(w)
        c = 1 - alpha
        v = c * dbar + math.sqrt(1 - c * c) * w
        ham = hamming(reconstruct(v), d)
        worst = max(worst, ham / ((n / 2) * 6 * math.sqrt(alpha)))
    assert worst <= 1.0


def test_reconstruct_monotone(rng):
    v = rng.standard_normal(20) * 0.3
    u = v + np.abs(rng.standard_normal(20))
    assert np.all(reconstruct(u) >= reconstruct(v))
    d = reconstruct(v)
    np.testing.assert_array_equal(reconstruct(d * math.sqrt(2 / 20)), d)


def test_attack_noiseless():
    rep = attack_demo(64, 8, math.inf, 0.1, 4, make_rng(9))
    for row in rep["trials"]:
        assert not row["failed"]
        assert row["hamming"] == 0
        assert row["quality"] == pytest.approx(row["sigma1"], rel=1e-12)
        assert row["above_threshold"]


def test_attack_private_report_shape():
    n, C = 64, 8
    rep = attack_demo(n, C, C / n, C / (5 * n), 5, make_rng(10))
    assert rep["summary"]["trials"] == 5
    for row in rep["trials"]:
        if row["failed"]:
            continue
        if row["quality"] >= 0.999 * row["sigma1"]:
            assert row["correlation"] >= 0.999 - 1e-12
        assert 0 <= row["hamming"] <= n
    assert set(rep["summary"]["hamming_quantiles"]) == {"min", "q25", "median", "q75", "max"}
