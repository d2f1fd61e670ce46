import math

import numpy as np
import pytest

from dpspectra.errors import OverflowRiskError
from dpspectra.matrix import SymmetricMatrix
from dpspectra.privacy import make_rng
from dpspectra.sensitivity import ProbeConfig, matrix_power, mu_k_power_bound, power_gap_estimate
from dpspectra.synthetic import hadamard, random_orthogonal, with_spectrum

HALF_NORMAL_MEAN = math.sqrt(2 / math.pi)


def test_matrix_power_matches_numpy(rng):
    a = rng.standard_normal((5, 5))
    for q in (1, 2, 3, 7, 16):
        np.testing.assert_allclose(matrix_power(a, q), np.linalg.matrix_power(a, q), rtol=1e-10, atol=1e-10)


def test_q1_zero_matrix():
    mean, se = power_gap_estimate(SymmetricMatrix(np.zeros((6, 6))), 2, 4, 1, 10**4, make_rng(1))
    assert abs(mean - HALF_NORMAL_MEAN) <= 3 * se


def test_q1_independent_of_matrix(rng):
    a = rng.standard_normal((8, 8)) * 10
    M = SymmetricMatrix((a + a.T) / 2)
    mean, se = power_gap_estimate(M, 0, 5, 1, 10**4, make_rng(2))
    assert abs(mean - HALF_NORMAL_MEAN) <= 3 * se


def test_rank_one_closed_form():
    s1 = 5.0
    M = SymmetricMatrix(np.diag([s1, 0.0, 0.0, 0.0]))
    mean, se = power_gap_estimate(M, 0, 0, 3, 10**4, make_rng(3))
    assert abs(mean - ((s1 + 1) ** 3 - s1**3) * HALF_NORMAL_MEAN) <= 3 * se


def test_deterministic_given_seed(rng):
    M = SymmetricMatrix(np.diag([3.0, 1.0]))
    assert power_gap_estimate(M, 0, 1, 4, 50, make_rng(8)) == power_gap_estimate(M, 0, 1, 4, 50, make_rng(8))


def test_overflow_guard():
    with pytest.raises(OverflowRiskError):
        power_gap_estimate(SymmetricMatrix(np.diag([1e10, 1.0])), 0, 0, 64, 5, make_rng(0))
    with pytest.raises(ValueError):
        power_gap_estimate(SymmetricMatrix(np.eye(2)), 0, 0, 65, 5, make_rng(0))


def test_bound_diagonal_saturates():
    M = SymmetricMatrix(np.diag([10.0, 3.0, 1.0, 0.5]))
    for k in (1, 2, 3):
        got = mu_k_power_bound(M, k, 4)
        assert got["bound"] == pytest.approx(9 * 4 * 10.0**3, rel=1e-12)


def test_bound_formula_flat_example():
    n, s1, q = 64, 40.0, 8
    lam = np.zeros(n)
    lam[0] = s1
    M = with_spectrum(lam, hadamard(n))
    got = mu_k_power_bound(M, 1, q)
    assert got["mu_k"] == pytest.approx(1.0, rel=1e-10)
    assert got["bound"] == pytest.approx(9 * (1 / 8) * 8 * 40.0**7, rel=1e-9)
    assert got["valid"]


def test_bound_q1():
    M = SymmetricMatrix(np.diag([2.0, 1.0]))
    assert mu_k_power_bound(M, 1, 1)["bound"] == pytest.approx(9.0)


def test_probe_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(q=0, k=1, s=0, t=0)
    with pytest.raises(ValueError):
        ProbeConfig(q=2, k=1, s=0, t=0, trials=0)


def test_precondition_flags(rng):
    n = 16
    lam = np.concatenate([[40.0], rng.uniform(0, 10, n - 1)])
    M = with_spectrum(lam, random_orthogonal(n, rng))
    got = mu_k_power_bound(M, 1, 4)
    assert got["preconditions"]["sigma1_ge_4q"] and got["preconditions"]["gap"]
    assert got["preconditions"]["q_ge_ln_n_plus_1"] == (4 >= math.log(16) + 1)
