import math
import warnings

import numpy as np
import pytest

from dpspectra.errors import DegenerateIterateError
from dpspectra.matrix import SymmetricMatrix, exact_factorization, matvec
from dpspectra.power import (
    AdversarialScript,
    GaussianNoise,
    PpiConfig,
    Status,
    ZeroNoise,
    c_candidates,
    choose_T,
    ppi,
    robust_power_iteration,
    search_C,
    sign_pattern,
)
from dpspectra.privacy import NoiseLedger, PrivacyBudget, make_rng
from dpspectra.synthetic import hadamard, random_orthogonal, with_spectrum

INF = math.inf


def test_robust_stops_on_exact_eigenvector():
    A = SymmetricMatrix(np.diag([4.0, 0.0]))
    x, trace = robust_power_iteration(A, 10, 0.1, 4.0, ZeroNoise(2), np.array([1.0, 0.0]))
    np.testing.assert_array_equal(x, [1.0, 0.0])
    assert trace.status is Status.CONVERGED and trace.stop_round == 1
    assert trace.norms == [4.0]


def test_robust_noiseless_tangent_decay():
    A = SymmetricMatrix(np.diag([2.0, 1.0]))
    x0 = np.array([1.0, 1.0]) / math.sqrt(2)
    x, trace = robust_power_iteration(A, 20, 0.5, INF, ZeroNoise(2), x0)
    assert trace.status is Status.RAN_FULL
    assert abs(x[0]) >= 1 - 2 * 0.5 ** (2 * 20)
    # Closed form: x_T proportional to (2^T, 1).
    np.testing.assert_allclose(x, np.array([2.0**20, 1.0]) / math.hypot(2.0**20, 1.0), rtol=1e-15)


def test_robust_degenerate_iterate():
    A = SymmetricMatrix(np.diag([3.0, 1.0]))
    x0 = np.array([0.6, 0.8])
    script = AdversarialScript([-(A.array @ x0)])
    with pytest.raises(DegenerateIterateError):
        robust_power_iteration(A, 1, 0.1, INF, script, x0)


def _gapped_instance(rng, n, sig, k):
    Q = random_orthogonal(n, rng)
    return with_spectrum(sig, Q), Q[:, :k], Q[:, k:]


@pytest.mark.parametrize("adversarial", [False, True])
@pytest.mark.parametrize("k", [1, 2])
def test_robust_convergence_bound(k, adversarial):
    """Perturbations meeting the norm conditions keep ||Ax|| >= (1 - beta) sigma_k."""
    n, beta, gamma = 24, 0.1, 0.5
    violations = 0
    for seed in range(20):
        rng = make_rng(seed, 31)
        sig = np.concatenate([np.linspace(1000.0, 990.0, k), rng.uniform(0, (1 - gamma) * 990.0, n - k)])
        A, PU, PV = _gapped_instance(rng, n, sig, k)
        sk = sig[k - 1]
        delta = beta * gamma * sk / 9.0  # condition 3 with equality
        lower = 8 * delta / (gamma * sk)
        while True:  # condition 2, by rejection
            x0 = rng.standard_normal(n)
            x0 /= np.linalg.norm(x0)
            if np.linalg.norm(PU.T @ x0) >= lower and np.linalg.norm(PV.T @ x0) >= lower:
                break
        T = math.ceil(4 * math.log(sk))
        # Condition 1: every ||g_t|| <= delta (hence also both projections).
        if adversarial:
            # Push away from the top space: oppose the current U-component.
            vecs = []
            x = x0
            for _ in range(T):
                pu = PU @ (PU.T @ (A.array @ x))
                g = -delta * pu / np.linalg.norm(pu)
                vecs.append(g)
                xp = A.array @ x + g
                x = xp / np.linalg.norm(xp)
        else:
            vecs = [delta * v / np.linalg.norm(v) for v in rng.standard_normal((T, n))]
        for threshold in (sk, INF):
            x, _ = robust_power_iteration(A, T, beta, threshold, AdversarialScript(vecs), x0)
            if np.linalg.norm(A.array @ x) < (1 - beta) * sk:
                violations += 1
    assert violations == 0


def test_ppi_noise_scale_and_ledger():
    cfg = PpiConfig(T=4, epsilon=1.0, delta=1 / math.e, C=2.0)
    assert cfg.sigma == pytest.approx(8.0, rel=1e-12)
    ledger = NoiseLedger()
    A = SymmetricMatrix(np.diag([2.0, 1.0]))
    x, trace = ppi(A, cfg, make_rng(1), ledger=ledger)
    assert x is not None and len(ledger) == 4
    e = ledger.entries[0]
    assert e.scale == pytest.approx(8.0, rel=1e-12) and e.sensitivity == 1.0
    eps, delta = ledger.total_basic()
    assert eps == pytest.approx(4 * 2 / 8.0) and delta == pytest.approx(1 / math.e)


def test_ppi_zero_noise_diag():
    A = SymmetricMatrix(np.diag([2.0, 1.0]))
    cfg = PpiConfig(T=40, epsilon=INF, delta=1e-6, C=2.0)
    x, trace = ppi(A, cfg, make_rng(3))
    assert abs(x[0]) >= 0.999
    assert all(trace.gate_passed)
    for it in trace.iterates[1:]:
        assert abs(np.linalg.norm(it) - 1.0) <= 1e-12


def test_ppi_zero_noise_is_classical_power_iteration(rng):
    n = 16
    a = rng.standard_normal((n, n))
    A = SymmetricMatrix((a + a.T) / 2)
    x0 = rng.standard_normal(n) / math.sqrt(n)
    x, _ = ppi(A, PpiConfig(T=12, epsilon=INF, delta=1e-6, C=1.0), rng, gate=False, x0=x0)
    y = x0.copy()
    for _ in range(12):
        y = A.array @ y
        y = y / np.linalg.norm(y)
    np.testing.assert_array_equal(x, y)


def test_ppi_gate_catches_coherent_iterates():
    n = 16
    A = SymmetricMatrix(5.0 * np.eye(n))
    fails = 0
    for seed in range(100):
        x, trace = ppi(A, PpiConfig(T=5, epsilon=1.0, delta=1e-6, C=1.0), make_rng(seed))
        fails += x is None
        if x is None:
            assert trace.failed and trace.gate_passed[-1] is False
    assert fails >= 99


def test_ppi_gate_checked_before_first_matvec():
    A = SymmetricMatrix(np.eye(4))
    x0 = np.array([2.0, 0.0, 0.0, 0.0])
    x, trace = ppi(A, PpiConfig(T=3, epsilon=1.0, delta=1e-6, C=1.0), make_rng(0), x0=x0)
    assert x is None and trace.stop_round == 1 and trace.norms == []


def test_ppi_large_C_never_fails():
    n = 64
    A = with_spectrum(np.linspace(10, 1, n), hadamard(n))
    for seed in range(50):
        x, _ = ppi(A, PpiConfig(T=10, epsilon=1.0, delta=1e-6, C=256.0), make_rng(seed))
        assert x is not None


def test_choose_T():
    assert choose_T(math.e**2) == 8
    assert choose_T(math.e**10) == 40
    assert choose_T(1.0) == 1
    with pytest.warns(UserWarning):
        assert choose_T(0.5) == 1


def test_c_candidates():
    assert c_candidates(2) == [1, 2]
    assert c_candidates(64) == [1, 2, 4, 8, 16, 32, 64]
    assert c_candidates(100)[-1] == 64


def test_search_c_zero_noise_picks_smallest_passing():
    n = 16
    A = with_spectrum(np.linspace(10, 1, n), hadamard(n))
    res = search_C(A, 8, PrivacyBudget(INF, 1e-6), make_rng(4))
    passing = [C for C, t in zip(c_candidates(n), res.traces) if not t.failed]
    assert res.C == passing[0]
    assert res.scores[0] is None  # C = 1 cannot pass


def test_search_c_all_fail():
    A = SymmetricMatrix(np.eye(2))
    res = search_C(A, 3, PrivacyBudget(1.0, 1e-6), make_rng(0), gate=True)
    if res.failed:
        assert res.C is None and len(res.traces) == 2


def test_sign_pattern_t0_and_n2():
    A = SymmetricMatrix(np.diag([3.0, 1.0]))
    F = exact_factorization(A)
    counts = {}
    cfg = PpiConfig(T=3, epsilon=1.0, delta=1e-6, C=64.0)
    for seed in range(4000):
        s = tuple(sign_pattern(A, 3, make_rng(seed, 9), cfg, factorization=F))
        counts[s] = counts.get(s, 0) + 1
    assert len(counts) == 4
    for c in counts.values():
        assert abs(c / 4000 - 0.25) <= 0.03
    s0 = sign_pattern(A, 0, make_rng(1), factorization=F)
    assert set(s0.tolist()) <= {-1, 1}
