import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpspectra.coherence import coherence_report, mu, mu0, mu_k
from dpspectra.lowerbound import gen_database, gen_instance
from dpspectra.matrix import RectMatrix, SymmetricMatrix, dilate, exact_factorization
from dpspectra.synthetic import with_spectrum

from .conftest import hadamard4, random_symmetric


def hadamard_matrix():
    return with_spectrum([4.0, 3.0, 2.0, 1.0], hadamard4())


def test_identity_is_maximally_coherent():
    assert mu(exact_factorization(SymmetricMatrix(np.eye(4)))) == 4.0


def test_hadamard_eigenvectors_are_flat():
    assert mu(exact_factorization(hadamard_matrix())) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n, C", [(8, 2), (16, 4), (32, 32)])
def test_lower_bound_instance_coherence(rng, n, C):
    inst = gen_instance(n, C, gen_database(n, rng))
    assert mu(exact_factorization(inst.matrix)) == pytest.approx(C, rel=1e-8)


def test_mu0_examples():
    assert mu0(np.eye(4)[:, :2]) == pytest.approx(2.0)
    flat = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float) / 2.0
    assert mu0(flat) == pytest.approx(1.0)
    assert mu0(hadamard4()) == pytest.approx(1.0)


def test_mu0_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        mu0(np.ones((4, 2)))


def test_mu_k_examples():
    assert mu_k(exact_factorization(SymmetricMatrix(np.diag([3.0, 1.0]))), 1) == 2.0
    assert mu_k(exact_factorization(hadamard_matrix()), 2) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        mu_k(exact_factorization(SymmetricMatrix(np.eye(2))), 3)


def test_mu_k_full_equals_mu(rng):
    F = exact_factorization(SymmetricMatrix(random_symmetric(9, rng)))
    assert mu_k(F, 9) == mu(F)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_property_ordering(n, seed):
    F = exact_factorization(SymmetricMatrix(random_symmetric(n, np.random.default_rng(seed))))
    vals = [mu_k(F, k) for k in range(1, n + 1)]
    assert 1.0 - 1e-12 <= vals[0]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= mu(F) + 1e-12 <= n + 1e-12


def test_dilation_preserves_coherence_square(rng):
    for _ in range(3):
        a = rng.standard_normal((6, 6))
        mu_a = mu(exact_factorization(RectMatrix(a)))
        mu_b = mu(exact_factorization(dilate(RectMatrix(a))))
        assert mu_b == pytest.approx(mu_a, rel=1e-10)


def test_dilation_coherence_rectangular_convention(rng):
    # For m != n the dilation rescales each block by (m + n) / 2.
    a = rng.standard_normal((3, 7))
    F = exact_factorization(RectMatrix(a))
    r = F.rank()
    u, v = F.left[:, :r], F.right[:, :r]
    want = (3 + 7) / 2.0 * max(np.max(u * u), np.max(v * v))
    assert mu(exact_factorization(dilate(RectMatrix(a)))) == pytest.approx(want, rel=1e-10)


def test_null_columns_excluded_by_default():
    a = np.zeros((4, 4))
    a[0, 0] = 1.0
    rep = coherence_report(SymmetricMatrix(a), ks=[1], include_null=False)
    assert rep.rank == 1 and rep.mu == 4.0
    full = coherence_report(SymmetricMatrix(a), include_null=True)
    assert full.mu >= rep.mu - 1e-12
    assert rep.svd_provenance.startswith("jacobi-cyclic:")
    assert rep.to_dict()["mu_k"] == {"1": 4.0}
